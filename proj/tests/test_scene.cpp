#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>

#include "beamsim/scene.hpp"

using namespace beamsim;
using namespace beamsim::scene;

namespace {

SceneConfig desk_config() {
  SceneConfig cfg;
  cfg.road_length_m = 200.0;
  cfg.lane_count = 4;
  cfg.lane_width_m = 3.5;
  cfg.bs_position = {-3.0, 100.0, 4.0};
  cfg.bs_height_m = 4.0;
  cfg.vehicle_count_range = {1, 8};
  cfg.traffic_density = 0.6;
  cfg.rng_seed = 7;
  return cfg;
}

bool vehicles_equal(const VehicleInstance& a, const VehicleInstance& b) {
  return a.type == b.type && a.center.x == b.center.x &&
         a.center.y == b.center.y && a.center.z == b.center.z &&
         a.dims.x == b.dims.x && a.dims.y == b.dims.y && a.dims.z == b.dims.z;
}

// Exhaustive pairwise box-intersection oracle.
bool any_overlap(const Scene& sc) {
  std::vector<Box> boxes;
  boxes.push_back(sc.receiver.bounding_box());
  for (const auto& o : sc.obstacles) boxes.push_back(o.bounding_box());
  for (size_t i = 0; i < boxes.size(); ++i) {
    for (size_t j = i + 1; j < boxes.size(); ++j) {
      if (boxes[i].overlaps(boxes[j])) return true;
    }
  }
  return false;
}

// Dense sampling of the base-station-to-antenna segment against the boxes.
bool los_by_sampling(const Scene& sc, int steps = 10000) {
  const Vec3 a = sc.bs_position;
  const Vec3 b = sc.receiver.roof_center();
  for (int i = 0; i <= steps; ++i) {
    const Vec3 p = a + (b - a) * (static_cast<double>(i) / steps);
    for (const auto& o : sc.obstacles) {
      if (o.bounding_box().contains(p)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("single-vehicle scene makes that vehicle the receiver") {
  SceneConfig cfg = desk_config();
  cfg.vehicle_count_range = {1, 1};
  const Scene sc = generate_scene(cfg, 0);
  CHECK(sc.obstacles.empty());
  CHECK(sc.receiver.center.z == doctest::Approx(sc.receiver.dims.z / 2));
}

TEST_CASE("generation is deterministic in (seed, scene_id)") {
  const SceneConfig cfg = desk_config();
  const Scene a = generate_scene(cfg, 42);
  const Scene b = generate_scene(cfg, 42);
  REQUIRE(a.obstacles.size() == b.obstacles.size());
  CHECK(vehicles_equal(a.receiver, b.receiver));
  for (size_t i = 0; i < a.obstacles.size(); ++i) {
    CHECK(vehicles_equal(a.obstacles[i], b.obstacles[i]));
  }
  const Scene c = generate_scene(cfg, 43);
  const bool same = vehicles_equal(a.receiver, c.receiver) &&
                    a.obstacles.size() == c.obstacles.size();
  CHECK_FALSE(same);
}

TEST_CASE("1000 generated scenes have no overlapping vehicles") {
  SceneConfig cfg = desk_config();
  cfg.rng_seed = 7;
  for (uint64_t id = 0; id < 1000; ++id) {
    const Scene sc = generate_scene(cfg, id);
    CHECK_FALSE(any_overlap(sc));
    const auto in_road = [&](const VehicleInstance& v) {
      const Box box = v.bounding_box();
      return box.lo.x >= 0 && box.hi.x <= cfg.road_width() && box.lo.y >= 0 &&
             box.hi.y <= cfg.road_length_m;
    };
    CHECK(in_road(sc.receiver));
    for (const auto& o : sc.obstacles) CHECK(in_road(o));
  }
}

TEST_CASE("infeasible density is reported") {
  SceneConfig cfg = desk_config();
  cfg.road_length_m = 10.0;
  cfg.lane_count = 1;
  cfg.vehicle_count_range = {6, 6};
  CHECK_THROWS_AS(generate_scene(cfg, 0), SceneInfeasibleError);
}

TEST_CASE("line-of-sight classification") {
  Scene sc;
  sc.bs_position = {-3.0, 0.0, 4.0};
  sc.receiver.type = VehicleType::car;
  sc.receiver.dims = {1.8, 4.5, 1.5};
  sc.receiver.center = {5.0, 50.0, 0.75};
  CHECK(classify_los(sc));  // nothing can block

  // A large box centered on the segment midpoint.
  VehicleInstance blocker;
  blocker.type = VehicleType::truck;
  const Vec3 mid = (sc.bs_position + sc.receiver.roof_center()) * 0.5;
  blocker.dims = {4.0, 4.0, 8.0};
  blocker.center = {mid.x, mid.y, 4.0};
  sc.obstacles.push_back(blocker);
  CHECK_FALSE(classify_los(sc));
}

TEST_CASE("line-of-sight agrees with dense segment sampling") {
  SceneConfig cfg = desk_config();
  cfg.rng_seed = 11;
  cfg.traffic_density = 0.8;
  int blocked = 0;
  for (uint64_t id = 0; id < 1000; ++id) {
    const Scene sc = generate_scene(cfg, id);
    const bool los = classify_los(sc);
    blocked += !los;
    CHECK(los == los_by_sampling(sc));
  }
  CHECK(blocked > 0);  // the regime must exercise both branches
}

TEST_CASE("gps reading") {
  Scene sc;
  sc.bs_position = {-3.0, 0.0, 4.0};
  sc.receiver.dims = {1.8, 4.5, 1.5};
  sc.receiver.center = {5.25, 42.0, 0.75};

  Rng zero_noise(1);
  const GpsReading exact = read_gps(sc, 0.0, zero_noise);
  CHECK(exact.latitude_like == 5.25);
  CHECK(exact.longitude_like == 42.0);

  Rng a(5), b(5);
  const GpsReading ra = read_gps(sc, 1.0, a);
  const GpsReading rb = read_gps(sc, 1.0, b);
  CHECK(ra.latitude_like == rb.latitude_like);
  CHECK(ra.longitude_like == rb.longitude_like);

  // Monte Carlo spread check.
  Rng mc(17);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double dx = read_gps(sc, 1.0, mc).latitude_like - 5.25;
    sum += dx;
    sum_sq += dx * dx;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum_sq / n - mean * mean);
  CHECK(stddev == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("lidar sampling") {
  Scene sc;
  sc.bs_position = {-3.0, 500.0, 4.0};  // far beyond range
  sc.receiver.dims = {1.8, 4.5, 1.5};
  sc.receiver.center = {5.0, 50.0, 0.75};

  Rng rng(3);
  CHECK(sample_lidar(sc, 100.0, 10, rng).points.empty());

  VehicleInstance box;
  box.type = VehicleType::bus;
  box.dims = {2.5, 12.0, 3.2};
  box.center = {9.0, 80.0, 1.6};
  sc.obstacles.push_back(box);

  Rng rng2(4);
  const PointCloud cloud = sample_lidar(sc, 100.0, 25, rng2);
  CHECK(cloud.points.size() == 5 * 25);  // base station still out of range

  const Box hull = box.bounding_box();
  const Vec3 origin = sc.receiver.roof_center();
  for (const Vec3& p : cloud.points) {
    CHECK(distance(p, origin) <= 100.0);
    CHECK(hull.contains(p));
    // Point-to-surface distance: inside the hull yet on some face plane.
    const double face_gap =
        std::min({p.x - hull.lo.x, hull.hi.x - p.x, p.y - hull.lo.y,
                  hull.hi.y - p.y, hull.hi.z - p.z});
    CHECK(face_gap <= 1e-9);
  }

  // Range filter keeps only reachable surfaces.
  Rng rng3(5);
  const PointCloud close = sample_lidar(sc, 10.0, 25, rng3);
  CHECK(close.points.size() < cloud.points.size());
  for (const Vec3& p : close.points) {
    CHECK(distance(p, origin) <= 10.0);
  }
}

TEST_CASE("rendered image carries class labels with nearer-wins overlap") {
  CameraGeometry cam;
  cam.position = {-3.0, 0.0, 4.0};
  cam.x_min = 0.0;
  cam.x_max = 10.0;
  cam.y_min = 0.0;
  cam.y_max = 10.0;

  Scene empty;
  empty.bs_position = cam.position;
  empty.receiver.type = VehicleType::car;
  empty.receiver.dims = {0.6, 0.6, 1.5};
  empty.receiver.center = {0.25, 0.25, 0.75};
  const SceneImage img = render_image(empty, cam, 20, 20);
  int nonzero = 0;
  for (int v : img.labels) nonzero += v != 0;
  CHECK(nonzero == 1);  // only the tiny receiver footprint
  CHECK(img.at(0, 0) == 2);

  // One car filling the whole frame.
  Scene full;
  full.bs_position = cam.position;
  full.receiver.type = VehicleType::car;
  full.receiver.dims = {10.0, 10.0, 1.5};
  full.receiver.center = {5.0, 5.0, 0.75};
  const SceneImage all_car = render_image(full, cam, 16, 16);
  CHECK(std::all_of(all_car.labels.begin(), all_car.labels.end(),
                    [](int v) { return v == 2; }));

  // Overlapping footprints: the taller (nearer to the overhead camera) wins.
  Scene overlap = full;
  VehicleInstance bus;
  bus.type = VehicleType::bus;
  bus.dims = {4.0, 4.0, 3.2};
  bus.center = {5.0, 5.0, 1.6};
  overlap.obstacles.push_back(bus);
  const SceneImage two = render_image(overlap, cam, 40, 40);

  // Per-pixel depth-comparison oracle: the bus footprint is taller.
  int bus_pixels = 0, car_pixels = 0;
  for (int64_t r = 0; r < 40; ++r) {
    for (int64_t c = 0; c < 40; ++c) {
      const double x = cam.x_min + (r + 0.5) * (10.0 / 40);
      const double y = cam.y_min + (c + 0.5) * (10.0 / 40);
      const bool in_bus = std::abs(x - 5.0) <= 2.0 && std::abs(y - 5.0) <= 2.0;
      const int expected = in_bus ? 1 : 2;
      CHECK(two.at(r, c) == expected);
      bus_pixels += two.at(r, c) == 1;
      car_pixels += two.at(r, c) == 2;
    }
  }
  CHECK(bus_pixels > 0);
  CHECK(car_pixels > 0);
}
