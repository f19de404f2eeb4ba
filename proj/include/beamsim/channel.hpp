#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "beamsim/common.hpp"
#include "beamsim/scene.hpp"

namespace beamsim::channel {

using cdouble = std::complex<double>;
using cvec = std::vector<cdouble>;

/// Set of unit-norm beamforming weight vectors.
struct Codebook {
  int64_t element_count = 0;
  std::vector<cvec> weights;  // weights[beam][element]
};

struct ChannelMatrix {
  int64_t m = 0;  // transmitter elements
  int64_t n = 0;  // receiver elements
  cvec entries;   // row-major, m x n

  cdouble& at(int64_t i, int64_t j) { return entries[i * n + j]; }
  const cdouble& at(int64_t i, int64_t j) const { return entries[i * n + j]; }
};

struct Path {
  cdouble gain;
  double aod = 0.0;  // departure angle from array broadside, radians
  double aoa = 0.0;  // arrival angle from array broadside, radians
  bool is_los = false;
};

struct PathSet {
  std::vector<Path> paths;
};

/// Normalized received power of every beam pair plus the optimal pair.
/// Ties resolved toward the smallest flattened index m * N + n.
struct PowerMatrix {
  int64_t m = 0;
  int64_t n = 0;
  std::vector<double> y;  // row-major, m x n
  std::array<int64_t, 2> best_pair{0, 0};

  int64_t best_index() const { return best_pair[0] * n + best_pair[1]; }
};

/// Vertical reflecting plane x = const beside the road (building facade).
struct Wall {
  double x = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double height = 0.0;
};

/// Orthonormal DFT beam set for a half-wavelength-spaced linear array.
Codebook dft_codebook(int64_t element_count);

/// Array response at `angle` from broadside: element k carries phase
/// pi * k * sin(angle), normalized to unit norm.
cvec steering_vector(int64_t element_count, double angle_rad);

/// Geometric line-of-sight plus single-bounce specular reflections off
/// obstacle side faces and the supplied walls. Amplitudes follow
/// d^(-pathloss_exponent/2) with `reflection_loss_db` per bounce; phase is a
/// fixed linear function of path length. Throws LinkOutageError when no path
/// survives.
PathSet trace_paths(const scene::Scene& sc, double reflection_loss_db,
                    double pathloss_exponent,
                    std::span<const Wall> walls = {});

/// H = sum_p gain_p * a_tx(aod_p) * a_rx(aoa_p)^H.
ChannelMatrix synth_channel(const PathSet& paths, int64_t m, int64_t n);

/// y[m][n] = |w_tx_m^H H w_rx_n|^2 with the argmax pair recorded.
PowerMatrix power_matrix(const ChannelMatrix& h, const Codebook& tx,
                         const Codebook& rx);

}  // namespace beamsim::channel
