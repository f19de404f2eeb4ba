#include "beamsim/scene.hpp"

#include <algorithm>
#include <cmath>

namespace beamsim::scene {

namespace {

constexpr double kMastWidth = 0.4;

// Stream tags for the per-scene generator.
constexpr uint64_t kPlacementTag = 1;

}  // namespace

int image_label(VehicleType t) { return static_cast<int>(t) + 1; }

const char* to_string(VehicleType t) {
  switch (t) {
    case VehicleType::bus:
      return "bus";
    case VehicleType::car:
      return "car";
    case VehicleType::truck:
      return "truck";
  }
  return "?";
}

VehicleType vehicle_type_from_string(const std::string& name) {
  if (name == "bus") return VehicleType::bus;
  if (name == "car") return VehicleType::car;
  if (name == "truck") return VehicleType::truck;
  throw DataError("unknown vehicle type: " + name);
}

SceneConfig::SceneConfig() {
  vehicle_dims = {
      {VehicleType::bus, {2.5, 12.0, 3.2}},
      {VehicleType::car, {1.8, 4.5, 1.5}},
      {VehicleType::truck, {2.5, 8.0, 3.5}},
  };
}

void SceneConfig::validate() const {
  if (road_length_m <= 0) throw ConfigError("scene: road_length_m must be > 0");
  if (lane_count < 1) throw ConfigError("scene: lane_count must be >= 1");
  if (lane_width_m <= 0) throw ConfigError("scene: lane_width_m must be > 0");
  if (bs_height_m <= 0) throw ConfigError("scene: bs_height_m must be > 0");
  if (bs_position.z != bs_height_m) {
    throw ConfigError("scene: bs_position.z must equal bs_height_m");
  }
  if (vehicle_count_range[0] < 1 ||
      vehicle_count_range[0] > vehicle_count_range[1]) {
    throw ConfigError("scene: vehicle_count_range needs 1 <= min <= max");
  }
  if (traffic_density < 0 || traffic_density > 1) {
    throw ConfigError("scene: traffic_density must be in [0, 1]");
  }
  if (vehicle_dims.empty()) throw ConfigError("scene: vehicle_dims empty");
  for (const auto& [type, dims] : vehicle_dims) {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) {
      throw ConfigError(std::string("scene: nonpositive dims for ") +
                        to_string(type));
    }
  }
}

Box bs_structure_box(const Vec3& bs_position) {
  const Vec3 dims{kMastWidth, kMastWidth, bs_position.z};
  return Box::from_center({bs_position.x, bs_position.y, bs_position.z / 2},
                          dims);
}

Scene generate_scene(const SceneConfig& cfg, uint64_t scene_id) {
  cfg.validate();
  Rng rng = Rng::stream(cfg.rng_seed, scene_id, kPlacementTag);

  // Vehicle count: min plus density-weighted Bernoulli draws up to max.
  const int span = cfg.vehicle_count_range[1] - cfg.vehicle_count_range[0];
  int count = cfg.vehicle_count_range[0];
  for (int i = 0; i < span; ++i) {
    if (rng.uniform() < cfg.traffic_density) ++count;
  }

  std::vector<VehicleType> types;
  types.reserve(cfg.vehicle_dims.size());
  for (const auto& [type, dims] : cfg.vehicle_dims) types.push_back(type);

  std::vector<VehicleInstance> placed;
  placed.reserve(count);
  const int max_attempts = 200 * count;
  for (int attempt = 0;
       attempt < max_attempts && static_cast<int>(placed.size()) < count;
       ++attempt) {
    const VehicleType type = types[rng.uniform_int(types.size())];
    const Vec3 dims = cfg.vehicle_dims.at(type);
    const int lane = static_cast<int>(rng.uniform_int(cfg.lane_count));
    const double y_lo = dims.y / 2;
    const double y_hi = cfg.road_length_m - dims.y / 2;
    if (y_lo >= y_hi) continue;  // vehicle longer than the road

    VehicleInstance v;
    v.type = type;
    v.dims = dims;
    v.center = {(lane + 0.5) * cfg.lane_width_m, rng.uniform(y_lo, y_hi),
                dims.z / 2};
    const Box box = v.bounding_box();
    const bool collides =
        std::any_of(placed.begin(), placed.end(), [&](const VehicleInstance& o) {
          return box.overlaps(o.bounding_box());
        });
    if (!collides) placed.push_back(v);
  }
  if (static_cast<int>(placed.size()) < count) {
    throw SceneInfeasibleError("scene " + std::to_string(scene_id) +
                               ": could not place " + std::to_string(count) +
                               " vehicles");
  }

  const size_t receiver_idx = rng.uniform_int(placed.size());
  Scene sc;
  sc.scene_id = scene_id;
  sc.bs_position = cfg.bs_position;
  sc.receiver = placed[receiver_idx];
  for (size_t i = 0; i < placed.size(); ++i) {
    if (i != receiver_idx) sc.obstacles.push_back(placed[i]);
  }
  return sc;
}

bool classify_los(const Scene& sc) {
  const Vec3 antenna = sc.receiver.roof_center();
  for (const auto& obstacle : sc.obstacles) {
    if (segment_intersects_box(sc.bs_position, antenna,
                               obstacle.bounding_box())) {
      return false;
    }
  }
  return true;
}

GpsReading read_gps(const Scene& sc, double noise_sigma_m, Rng& rng) {
  if (noise_sigma_m < 0) throw std::invalid_argument("read_gps: sigma < 0");
  GpsReading reading;
  reading.latitude_like = sc.receiver.center.x + noise_sigma_m * rng.normal();
  reading.longitude_like = sc.receiver.center.y + noise_sigma_m * rng.normal();
  return reading;
}

namespace {

// Face index order: -x, +x, -y, +y, +z. The ground-contact face is skipped.
Vec3 sample_face(const Box& box, int face, Rng& rng) {
  const double u = rng.uniform();
  const double v = rng.uniform();
  const Vec3 d = box.dims();
  switch (face) {
    case 0:
      return {box.lo.x, box.lo.y + u * d.y, box.lo.z + v * d.z};
    case 1:
      return {box.hi.x, box.lo.y + u * d.y, box.lo.z + v * d.z};
    case 2:
      return {box.lo.x + u * d.x, box.lo.y, box.lo.z + v * d.z};
    case 3:
      return {box.lo.x + u * d.x, box.hi.y, box.lo.z + v * d.z};
    default:
      return {box.lo.x + u * d.x, box.lo.y + v * d.y, box.hi.z};
  }
}

}  // namespace

PointCloud sample_lidar(const Scene& sc, double max_range_m,
                        int points_per_face, Rng& rng) {
  if (max_range_m <= 0) throw std::invalid_argument("sample_lidar: range <= 0");
  if (points_per_face < 1) {
    throw std::invalid_argument("sample_lidar: points_per_face < 1");
  }
  const Vec3 origin = sc.receiver.roof_center();

  std::vector<Box> targets;
  targets.reserve(sc.obstacles.size() + 1);
  for (const auto& obstacle : sc.obstacles) {
    targets.push_back(obstacle.bounding_box());
  }
  targets.push_back(bs_structure_box(sc.bs_position));

  PointCloud cloud;
  for (const Box& box : targets) {
    for (int face = 0; face < 5; ++face) {
      for (int i = 0; i < points_per_face; ++i) {
        const Vec3 p = sample_face(box, face, rng);
        if (distance(p, origin) <= max_range_m) cloud.points.push_back(p);
      }
    }
  }
  return cloud;
}

SceneImage render_image(const Scene& sc, const CameraGeometry& cam,
                        int64_t rows, int64_t cols) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("render_image: resolution must be positive");
  }
  if (cam.x_max <= cam.x_min || cam.y_max <= cam.y_min) {
    throw std::invalid_argument("render_image: empty camera frame");
  }

  SceneImage img;
  img.rows = rows;
  img.cols = cols;
  img.labels.assign(rows * cols, 0);
  std::vector<double> depth(rows * cols, -1.0);

  const double px = (cam.x_max - cam.x_min) / static_cast<double>(rows);
  const double py = (cam.y_max - cam.y_min) / static_cast<double>(cols);

  auto rasterize = [&](const VehicleInstance& v) {
    const Box box = v.bounding_box();
    const double top = box.hi.z;
    // Pixel (r, c) samples the world point at its center.
    int64_t r0 = static_cast<int64_t>(std::ceil((box.lo.x - cam.x_min) / px - 0.5));
    int64_t r1 = static_cast<int64_t>(std::floor((box.hi.x - cam.x_min) / px - 0.5));
    int64_t c0 = static_cast<int64_t>(std::ceil((box.lo.y - cam.y_min) / py - 0.5));
    int64_t c1 = static_cast<int64_t>(std::floor((box.hi.y - cam.y_min) / py - 0.5));
    r0 = std::max<int64_t>(r0, 0);
    c0 = std::max<int64_t>(c0, 0);
    r1 = std::min(r1, rows - 1);
    c1 = std::min(c1, cols - 1);
    for (int64_t r = r0; r <= r1; ++r) {
      for (int64_t c = c0; c <= c1; ++c) {
        const int64_t idx = r * cols + c;
        if (top > depth[idx]) {
          depth[idx] = top;
          img.labels[idx] = image_label(v.type);
        }
      }
    }
  };

  rasterize(sc.receiver);
  for (const auto& obstacle : sc.obstacles) rasterize(obstacle);
  return img;
}

}  // namespace beamsim::scene
