#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamsim/channel.hpp"
#include "beamsim/common.hpp"
#include "beamsim/latency.hpp"
#include "beamsim/neural.hpp"
#include "beamsim/preprocess.hpp"
#include "beamsim/scene.hpp"
#include "beamsim/topk.hpp"

namespace beamsim::harness {

/// Dataset profiles: codebook sizes, sensor set and latency constants.
enum class Profile { raymobtime_like, neu_like };

const char* to_string(Profile p);
Profile profile_from_string(const std::string& name);

/// Full experiment configuration with profile-dependent defaults.
struct RunConfig {
  Profile profile = Profile::neu_like;
  uint64_t seed = 7;
  int64_t samples = 2000;
  std::filesystem::path out_dir = "out";
  std::array<double, 3> split_fractions{0.73, 0.17, 0.10};
  int workers = 0;  // 0: hardware concurrency (overridable via BEAMSIM_WORKERS)

  // Codebooks.
  int64_t tx_elements = 8;
  int64_t rx_elements = 8;

  scene::SceneConfig scene_cfg;
  double test_density_shift = 0.2;  // extra traffic density on the test split
  double gps_noise_sigma_m = 1.0;
  double lidar_max_range_m = 100.0;
  int lidar_points_per_face = 16;
  bool store_point_cloud = false;

  // Camera (rows/cols 0 when the profile has no image modality).
  int64_t image_rows = 0;
  int64_t image_cols = 0;
  int bitmap_window = 40;
  int bitmap_stride = 5;
  scene::CameraGeometry camera;

  preprocess::VoxelSpec voxel;

  double reflection_loss_db = 6.0;
  double pathloss_exponent = 2.0;
  std::vector<channel::Wall> walls;

  neural::ModelSpec model;  // input_dims filled from the dataset at train time
  neural::TrainConfig train;
  topk::KSelectionConfig kselect;

  std::vector<int64_t> k_list{1, 2, 5, 10, 25, 50};
  std::vector<double> alpha_list{0.0, 0.5, 1.0, 2.0, 5.0};

  int64_t beam_pair_count() const { return tx_elements * rx_elements; }
  bool has_image() const { return image_rows > 0 && image_cols > 0; }
  std::vector<neural::Modality> all_modalities() const;
  latency::PayloadProfile payload_profile() const;

  void validate() const;
};

/// Profile defaults with no file overrides applied.
RunConfig default_config(Profile profile);

/// Reads a sectioned key-value config file over the profile defaults.
/// The [run] section's `profile` key selects the defaults; every other key
/// overrides one field. Unknown sections or keys are errors.
RunConfig load_config(const std::filesystem::path& path);

/// Resolved configuration echoed into run outputs for reproducibility.
nlohmann::ordered_json config_echo(const RunConfig& cfg);

}  // namespace beamsim::harness
