#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace beamsim::latency {

/// 5G-NR synchronization-signal timing. Up to `blocks_per_burst` beam pairs
/// fit in one burst of duration `t_ssb_ms`; bursts repeat every `t_p_ms`.
struct NrTiming {
  double t_p_ms = 20.0;
  double t_ssb_ms = 5.0;
  int blocks_per_burst = 32;

  /// Time to probe a single beam pair within a burst.
  double t_b_ms() const { return t_ssb_ms / blocks_per_burst; }
};

/// Fixed per-link overheads of the fusion pipeline, in milliseconds.
struct PipelineTiming {
  double t_process_ms = 0.0;  // sensor preprocessing (image-bearing profiles)
  double t_data_ms = 0.0;     // vehicle -> MEC feature upload
  double t_control_ms = 0.0;  // inference + MEC -> vehicle subset download
  std::string profile;

  double fixed_ms() const { return t_process_ms + t_data_ms + t_control_ms; }
};

/// Sub-6 GHz backchannel rates for what-if transfer reports.
struct LinkBudget {
  double rate_bps_min = 3e6;
  double rate_bps_max = 27e6;
  int bytes_per_element = 8;
};

enum class PayloadKind { raw_lidar, voxel_grid, fused_features, selected_beams };

/// Byte-accounting inputs for one dataset profile.
struct PayloadProfile {
  int64_t beam_pair_count = 0;
  std::array<int64_t, 3> grid_shape{};
  int bytes_per_cell = 8;
  int bytes_per_element = 8;
  int64_t raw_lidar_bytes = 1'500'000;
};

/// Exhaustive sweep over `beam_pairs` directions under burst scheduling.
double t_nr(int64_t beam_pairs, const NrTiming& nt = {});

/// Sweep of only the first K beam pairs; partial bursts cost per-block time.
double t_sweep(int64_t k, const NrTiming& nt = {});

/// End-to-end fusion-pipeline selection latency for subset size K.
double t_df(int64_t k, const PipelineTiming& pt, const NrTiming& nt = {});

/// Linear 802.11ad sweep model.
double t_80211ad(int64_t beam_pairs, double per_pair_ms = 0.303);

int64_t payload_bytes(PayloadKind kind, const PayloadProfile& profile);

/// Milliseconds to push `bytes` through a link of `rate_bps` bits/second.
double transfer_time_ms(int64_t bytes, double rate_bps);

/// Time a vehicle at `speed_mps` stays inside the coverage cone of a base
/// station mounted at `bs_height_m` with total angle `coverage_angle_deg`.
double contact_time_ms(double bs_height_m, double coverage_angle_deg,
                       double speed_mps);

/// 3-dB beamwidth of a uniform linear array, in degrees.
double beamwidth_deg(int64_t elements);

PipelineTiming raymobtime_pipeline();
PipelineTiming neu_pipeline();

}  // namespace beamsim::latency
