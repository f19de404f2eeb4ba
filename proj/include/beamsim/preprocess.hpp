#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "beamsim/common.hpp"
#include "beamsim/geometry.hpp"
#include "beamsim/scene.hpp"

namespace beamsim::preprocess {

/// Spatial zone and bin sizes of the LiDAR histogram. Each axis extent must
/// be an integer multiple of its bin size.
struct VoxelSpec {
  std::array<double, 2> x_bounds{0, 1};
  std::array<double, 2> y_bounds{0, 1};
  std::array<double, 2> z_bounds{0, 1};
  Vec3 bin_sizes{1, 1, 1};

  void validate() const;
  std::array<int64_t, 3> grid_shape() const;
};

/// Occupancy histogram with marked cells: -2 base station, -1 receiver,
/// 1 occupied, 0 empty. Markers take precedence over occupancy.
struct VoxelGrid {
  std::array<int64_t, 3> shape{};
  std::vector<int8_t> cells;  // row-major (x, y, z)

  int64_t cell_count() const { return shape[0] * shape[1] * shape[2]; }
  int64_t flat(int64_t ix, int64_t iy, int64_t iz) const {
    return (ix * shape[1] + iy) * shape[2] + iz;
  }
  int8_t at(int64_t ix, int64_t iy, int64_t iz) const {
    return cells[flat(ix, iy, iz)];
  }
};

/// Quantized sliding-window class map of a scene image.
struct BitMap {
  int64_t rows = 0;
  int64_t cols = 0;
  int window = 0;
  int stride = 0;
  std::vector<int> labels;  // row-major, values 0..3

  int at(int64_t r, int64_t c) const { return labels[r * cols + c]; }
};

/// Bit map after role assignment: 0 background, 1 receiver, 2 obstacle.
struct RefinedBitMap {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<int> labels;
};

/// Labels one window crop; receives the image, the crop's top-left corner
/// and the window size. Used to swap in a learned classifier.
using CropClassifier =
    std::function<int(const scene::SceneImage&, int64_t, int64_t, int)>;

/// Bins the cloud into the spec'd histogram (points outside the bounds are
/// dropped, bins are half-open with the last bin closed), then overwrites
/// the receiver cell with -1 and the base-station cell with -2.
/// Throws MarkerCollisionError when both markers land in one cell.
VoxelGrid voxelize(const scene::PointCloud& cloud, const VoxelSpec& spec,
                   const Vec3& bs_position, const Vec3& receiver_position);

/// Slides a window x window crop with the given stride over the image and
/// labels each crop. The default classifier returns the majority vehicle
/// label within the crop (ties to the smaller label, 0 when empty).
BitMap make_bitmap(const scene::SceneImage& img, int window, int stride,
                   const CropClassifier& classify = nullptr);

RefinedBitMap refine_bitmap(const BitMap& bm, scene::VehicleType receiver_type);

}  // namespace beamsim::preprocess
