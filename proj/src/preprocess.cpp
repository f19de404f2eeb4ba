#include "beamsim/preprocess.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace beamsim::preprocess {

namespace {

int64_t axis_bins(double lo, double hi, double bin, const char* axis) {
  if (hi <= lo) {
    throw std::invalid_argument(std::string("voxel spec: empty ") + axis +
                                " bounds");
  }
  if (bin <= 0) {
    throw std::invalid_argument(std::string("voxel spec: nonpositive ") +
                                axis + " bin");
  }
  const double quotient = (hi - lo) / bin;
  const double rounded = std::round(quotient);
  if (std::abs(quotient - rounded) > 1e-9 || rounded < 1) {
    throw std::invalid_argument(std::string("voxel spec: ") + axis +
                                " extent is not a multiple of the bin size");
  }
  return static_cast<int64_t>(rounded);
}

// Half-open bins [lo + i*b, lo + (i+1)*b); the last bin also includes the
// upper bound. Returns -1 for points outside the bounds.
int64_t bin_index(double v, double lo, double hi, double bin, int64_t bins) {
  if (v < lo || v > hi) return -1;
  int64_t idx = static_cast<int64_t>(std::floor((v - lo) / bin));
  if (idx >= bins) idx = bins - 1;
  return idx;
}

}  // namespace

void VoxelSpec::validate() const { (void)grid_shape(); }

std::array<int64_t, 3> VoxelSpec::grid_shape() const {
  return {axis_bins(x_bounds[0], x_bounds[1], bin_sizes.x, "x"),
          axis_bins(y_bounds[0], y_bounds[1], bin_sizes.y, "y"),
          axis_bins(z_bounds[0], z_bounds[1], bin_sizes.z, "z")};
}

VoxelGrid voxelize(const scene::PointCloud& cloud, const VoxelSpec& spec,
                   const Vec3& bs_position, const Vec3& receiver_position) {
  const auto shape = spec.grid_shape();
  VoxelGrid grid;
  grid.shape = shape;
  grid.cells.assign(grid.cell_count(), 0);

  auto cell_of = [&](const Vec3& p) -> int64_t {
    const int64_t ix =
        bin_index(p.x, spec.x_bounds[0], spec.x_bounds[1], spec.bin_sizes.x,
                  shape[0]);
    const int64_t iy =
        bin_index(p.y, spec.y_bounds[0], spec.y_bounds[1], spec.bin_sizes.y,
                  shape[1]);
    const int64_t iz =
        bin_index(p.z, spec.z_bounds[0], spec.z_bounds[1], spec.bin_sizes.z,
                  shape[2]);
    if (ix < 0 || iy < 0 || iz < 0) return -1;
    return grid.flat(ix, iy, iz);
  };

  const int64_t bs_cell = cell_of(bs_position);
  const int64_t rx_cell = cell_of(receiver_position);
  if (bs_cell < 0) {
    throw std::invalid_argument("voxelize: bs_position outside bounds");
  }
  if (rx_cell < 0) {
    throw std::invalid_argument("voxelize: receiver_position outside bounds");
  }
  if (bs_cell == rx_cell) {
    throw MarkerCollisionError(
        "voxelize: base station and receiver share cell " +
        std::to_string(bs_cell));
  }

  for (const Vec3& p : cloud.points) {
    const int64_t cell = cell_of(p);
    if (cell >= 0) grid.cells[cell] = 1;
  }
  grid.cells[rx_cell] = -1;
  grid.cells[bs_cell] = -2;
  return grid;
}

BitMap make_bitmap(const scene::SceneImage& img, int window, int stride,
                   const CropClassifier& classify) {
  if (window < 1 || stride < 1) {
    throw std::invalid_argument("make_bitmap: window and stride must be >= 1");
  }
  if (window > img.rows || window > img.cols) {
    throw std::invalid_argument("make_bitmap: window exceeds image size");
  }

  CropClassifier label_crop = classify;
  if (!label_crop) {
    label_crop = [](const scene::SceneImage& im, int64_t r0, int64_t c0,
                    int w) {
      int counts[4] = {0, 0, 0, 0};
      for (int64_t r = r0; r < r0 + w; ++r) {
        for (int64_t c = c0; c < c0 + w; ++c) {
          ++counts[im.at(r, c)];
        }
      }
      int best = 0;
      for (int label = 1; label <= 3; ++label) {
        if (counts[label] > (best == 0 ? 0 : counts[best])) best = label;
      }
      return best;
    };
  }

  BitMap bm;
  bm.window = window;
  bm.stride = stride;
  bm.rows = (img.rows - window) / stride + 1;
  bm.cols = (img.cols - window) / stride + 1;
  bm.labels.resize(bm.rows * bm.cols);
  for (int64_t i = 0; i < bm.rows; ++i) {
    for (int64_t j = 0; j < bm.cols; ++j) {
      bm.labels[i * bm.cols + j] =
          label_crop(img, i * stride, j * stride, window);
    }
  }
  return bm;
}

RefinedBitMap refine_bitmap(const BitMap& bm,
                            scene::VehicleType receiver_type) {
  const int receiver_label = scene::image_label(receiver_type);
  RefinedBitMap out;
  out.rows = bm.rows;
  out.cols = bm.cols;
  out.labels.resize(bm.labels.size());
  for (size_t i = 0; i < bm.labels.size(); ++i) {
    const int label = bm.labels[i];
    out.labels[i] = label == 0 ? 0 : (label == receiver_label ? 1 : 2);
  }
  return out;
}

}  // namespace beamsim::preprocess
