#include "beamsim/latency.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace beamsim::latency {

double t_nr(int64_t beam_pairs, const NrTiming& nt) {
  if (beam_pairs < 1) throw std::invalid_argument("t_nr: beam_pairs < 1");
  const int64_t full_bursts = (beam_pairs - 1) / nt.blocks_per_burst;
  return nt.t_p_ms * static_cast<double>(full_bursts) + nt.t_ssb_ms;
}

double t_sweep(int64_t k, const NrTiming& nt) {
  if (k < 1) throw std::invalid_argument("t_sweep: k < 1");
  const int64_t full_bursts = (k - 1) / nt.blocks_per_burst;
  const int64_t tail_blocks = 1 + (k - 1) % nt.blocks_per_burst;
  return nt.t_p_ms * static_cast<double>(full_bursts) +
         nt.t_b_ms() * static_cast<double>(tail_blocks);
}

double t_df(int64_t k, const PipelineTiming& pt, const NrTiming& nt) {
  return pt.fixed_ms() + t_sweep(k, nt);
}

double t_80211ad(int64_t beam_pairs, double per_pair_ms) {
  if (beam_pairs < 1) throw std::invalid_argument("t_80211ad: beam_pairs < 1");
  return per_pair_ms * static_cast<double>(beam_pairs);
}

int64_t payload_bytes(PayloadKind kind, const PayloadProfile& profile) {
  switch (kind) {
    case PayloadKind::raw_lidar:
      return profile.raw_lidar_bytes;
    case PayloadKind::voxel_grid:
      return profile.grid_shape[0] * profile.grid_shape[1] *
             profile.grid_shape[2] * profile.bytes_per_cell;
    case PayloadKind::fused_features:
      // Latent features of the two vehicle-side modalities, d = |B| each.
      return 2 * profile.beam_pair_count * profile.bytes_per_element;
    case PayloadKind::selected_beams:
      // Worst case: the subset covers every beam pair, 8 bytes per index.
      return profile.beam_pair_count * 8;
  }
  throw std::invalid_argument("payload_bytes: unknown kind");
}

double transfer_time_ms(int64_t bytes, double rate_bps) {
  if (rate_bps <= 0) throw std::invalid_argument("transfer_time_ms: rate <= 0");
  return static_cast<double>(bytes) * 8.0 / rate_bps * 1e3;
}

double contact_time_ms(double bs_height_m, double coverage_angle_deg,
                       double speed_mps) {
  if (bs_height_m <= 0 || speed_mps <= 0 || coverage_angle_deg <= 0 ||
      coverage_angle_deg >= 180.0) {
    throw std::invalid_argument("contact_time_ms: bad arguments");
  }
  const double half_angle_rad =
      coverage_angle_deg * std::numbers::pi / 180.0 / 2.0;
  return 2.0 * bs_height_m * std::tan(half_angle_rad) / speed_mps * 1e3;
}

double beamwidth_deg(int64_t elements) {
  if (elements < 1) throw std::invalid_argument("beamwidth_deg: elements < 1");
  return 2.0 / static_cast<double>(elements) * 180.0 / std::numbers::pi;
}

PipelineTiming raymobtime_pipeline() {
  return {.t_process_ms = 1.30,
          .t_data_ms = 1.332,
          .t_control_ms = 1.03,
          .profile = "raymobtime-like"};
}

PipelineTiming neu_pipeline() {
  return {.t_process_ms = 0.0,
          .t_data_ms = 0.33,
          .t_control_ms = 0.53,
          .profile = "neu-like"};
}

}  // namespace beamsim::latency
