#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "beamsim/common.hpp"
#include "beamsim/geometry.hpp"
#include "beamsim/rng.hpp"

namespace beamsim::scene {

enum class VehicleType : int { bus = 0, car = 1, truck = 2 };

/// Pixel label used for a vehicle type in rendered images (background is 0).
int image_label(VehicleType t);

const char* to_string(VehicleType t);
VehicleType vehicle_type_from_string(const std::string& name);

/// One vehicle as an axis-aligned box resting on the ground.
/// Convention: the road runs along +y, so dims = (width, length, height).
struct VehicleInstance {
  VehicleType type = VehicleType::car;
  Vec3 center;         // center.z == dims.z / 2
  double heading = 0;  // radians; lane-aligned traffic keeps this at 0
  Vec3 dims;

  Box bounding_box() const { return Box::from_center(center, dims); }

  /// Antenna mount point: center of the roof.
  Vec3 roof_center() const { return {center.x, center.y, dims.z}; }
};

struct SceneConfig {
  double road_length_m = 200.0;       // along y
  int lane_count = 4;                 // lanes stacked along x
  double lane_width_m = 3.5;
  Vec3 bs_position{-3.0, 100.0, 4.0};  // z must equal bs_height_m
  double bs_height_m = 4.0;
  std::array<int, 2> vehicle_count_range{1, 8};
  std::map<VehicleType, Vec3> vehicle_dims;  // (width, length, height)
  double traffic_density = 0.5;              // in [0, 1]
  uint64_t rng_seed = 1;

  SceneConfig();

  double road_width() const { return lane_count * lane_width_m; }

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct Scene {
  VehicleInstance receiver;
  std::vector<VehicleInstance> obstacles;
  Vec3 bs_position;
  uint64_t scene_id = 0;
};

/// Planar stand-in for a geodetic fix: receiver ground position plus noise.
struct GpsReading {
  double latitude_like = 0.0;   // x (across the road)
  double longitude_like = 0.0;  // y (along the road)
};

struct PointCloud {
  std::vector<Vec3> points;
};

/// Class-label image: 0 background, 1 bus, 2 car, 3 truck.
struct SceneImage {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<int> labels;  // row-major

  int at(int64_t r, int64_t c) const { return labels[r * cols + c]; }
};

/// Overhead orthographic camera mounted at the base station. The world
/// rectangle [x_min,x_max] x [y_min,y_max] maps onto the full frame, with
/// rows spanning x and columns spanning y.
struct CameraGeometry {
  Vec3 position;
  double x_min = 0, x_max = 0;
  double y_min = 0, y_max = 0;
};

/// Mast structure that gives the base station a LiDAR signature.
Box bs_structure_box(const Vec3& bs_position);

/// Places vehicles by rejection sampling and picks one receiver uniformly.
/// Deterministic in (cfg.rng_seed, scene_id). Throws SceneInfeasibleError
/// when the requested density cannot be placed within bounded retries.
Scene generate_scene(const SceneConfig& cfg, uint64_t scene_id);

/// True iff the segment from the base station to the receiver antenna
/// intersects no obstacle bounding box.
bool classify_los(const Scene& sc);

GpsReading read_gps(const Scene& sc, double noise_sigma_m, Rng& rng);

/// Uniform surface samples of obstacle and base-station boxes within
/// max_range_m of the receiver antenna. The receiver's own body is never
/// sampled; the ground-contact face of each box is skipped.
PointCloud sample_lidar(const Scene& sc, double max_range_m,
                        int points_per_face, Rng& rng);

/// Rasterizes all vehicles into a class-label image; where footprints
/// overlap, the vehicle closer to the overhead camera (taller) wins.
SceneImage render_image(const Scene& sc, const CameraGeometry& cam,
                        int64_t rows, int64_t cols);

}  // namespace beamsim::scene
