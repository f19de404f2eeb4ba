#include "beamsim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace beamsim::harness {

namespace {

using nlohmann::ordered_json;

int64_t to_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<int64_t> to_int_list(const std::string& v, const std::string& key) {
  std::vector<int64_t> out;
  for (const std::string& item : split_list(v)) out.push_back(to_int(item, key));
  return out;
}

std::vector<double> to_double_list(const std::string& v,
                                   const std::string& key) {
  std::vector<double> out;
  for (const std::string& item : split_list(v)) {
    out.push_back(to_double(item, key));
  }
  return out;
}

std::vector<neural::LayerDef> widths_to_layers(const std::vector<int64_t>& ws) {
  std::vector<neural::LayerDef> layers;
  for (int64_t w : ws) layers.push_back({w, 0.0});
  return layers;
}

// Values derived from other fields; recomputed after file overrides.
void finalize(RunConfig& cfg) {
  cfg.scene_cfg.bs_position.z = cfg.scene_cfg.bs_height_m;
  cfg.scene_cfg.rng_seed = cfg.seed;
  cfg.train.rng_seed = cfg.seed;

  cfg.camera.position = cfg.scene_cfg.bs_position;
  cfg.camera.x_min = cfg.voxel.x_bounds[0];
  cfg.camera.x_max = cfg.voxel.x_bounds[1];
  cfg.camera.y_min = cfg.voxel.y_bounds[0];
  cfg.camera.y_max = cfg.voxel.y_bounds[1];

  const double road_width = cfg.scene_cfg.road_width();
  cfg.walls = {{cfg.scene_cfg.bs_position.x - 2.0, -50.0,
                cfg.scene_cfg.road_length_m + 50.0, 10.0},
               {road_width + 2.0, -50.0, cfg.scene_cfg.road_length_m + 50.0,
                10.0}};

  cfg.kselect.nr = latency::NrTiming{};
  cfg.kselect.pipeline = cfg.profile == Profile::raymobtime_like
                             ? latency::raymobtime_pipeline()
                             : latency::neu_pipeline();

  cfg.model.class_count = cfg.beam_pair_count();
  cfg.model.modalities = cfg.all_modalities();
  const auto grid = cfg.voxel.grid_shape();
  cfg.model.input_dims[static_cast<int>(neural::Modality::gps)] = 2;
  cfg.model.input_dims[static_cast<int>(neural::Modality::lidar)] =
      grid[0] * grid[1] * grid[2];
  if (cfg.has_image()) {
    const int64_t bm_rows = (cfg.image_rows - cfg.bitmap_window) / cfg.bitmap_stride + 1;
    const int64_t bm_cols = (cfg.image_cols - cfg.bitmap_window) / cfg.bitmap_stride + 1;
    cfg.model.input_dims[static_cast<int>(neural::Modality::image)] =
        bm_rows * bm_cols;
  } else {
    cfg.model.input_dims[static_cast<int>(neural::Modality::image)] = 0;
  }
}

}  // namespace

const char* to_string(Profile p) {
  return p == Profile::raymobtime_like ? "raymobtime-like" : "neu-like";
}

Profile profile_from_string(const std::string& name) {
  if (name == "raymobtime-like") return Profile::raymobtime_like;
  if (name == "neu-like") return Profile::neu_like;
  throw ConfigError("unknown profile: " + name +
                    " (expected raymobtime-like or neu-like)");
}

std::vector<neural::Modality> RunConfig::all_modalities() const {
  std::vector<neural::Modality> mods{neural::Modality::gps,
                                     neural::Modality::lidar};
  if (has_image()) mods.push_back(neural::Modality::image);
  return mods;
}

latency::PayloadProfile RunConfig::payload_profile() const {
  latency::PayloadProfile p;
  p.beam_pair_count = beam_pair_count();
  p.grid_shape = voxel.grid_shape();
  return p;
}

void RunConfig::validate() const {
  if (samples < 1) throw ConfigError("run: samples must be >= 1");
  if (tx_elements < 1 || rx_elements < 1) {
    throw ConfigError("channel: codebook sizes must be >= 1");
  }
  const double total =
      split_fractions[0] + split_fractions[1] + split_fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("run: split fractions must sum to 1");
  }
  for (double f : split_fractions) {
    if (f < 0) throw ConfigError("run: negative split fraction");
  }
  if (gps_noise_sigma_m < 0) throw ConfigError("sensors: negative gps sigma");
  if (lidar_max_range_m <= 0) throw ConfigError("sensors: lidar range <= 0");
  if (lidar_points_per_face < 1) {
    throw ConfigError("sensors: lidar points_per_face < 1");
  }
  if (test_density_shift < 0) {
    throw ConfigError("scene: test_density_shift must be >= 0");
  }
  if (has_image() && (bitmap_window > image_rows || bitmap_window > image_cols)) {
    throw ConfigError("sensors: bitmap window exceeds the image");
  }
  scene_cfg.validate();
  voxel.validate();
  train.validate();
  if (kselect.alpha < 0) throw ConfigError("kselect: alpha must be >= 0");
  if (kselect.t_total_ms <= 0) throw ConfigError("kselect: t_total_ms <= 0");
  if (k_list.empty()) throw ConfigError("run: k_list is empty");
  for (int64_t k : k_list) {
    if (k < 1 || k > beam_pair_count()) {
      throw ConfigError("run: k_list entry out of range");
    }
  }
}

RunConfig default_config(Profile profile) {
  RunConfig cfg;
  cfg.profile = profile;

  // Road geometry keeps the receiver's angular spread wide: a short block
  // with the base station set back from the curb, so best beams do not all
  // collapse into the endfire direction.
  if (profile == Profile::raymobtime_like) {
    cfg.tx_elements = 32;
    cfg.rx_elements = 8;
    cfg.lidar_max_range_m = 100.0;
    cfg.image_rows = 540;
    cfg.image_cols = 960;
    cfg.scene_cfg.road_length_m = 140.0;
    cfg.scene_cfg.bs_position = {-5.0, 70.0, 4.0};
    cfg.voxel.x_bounds = {-6.5, 16.5};
    cfg.voxel.y_bounds = {-25.0, 225.0};
    cfg.voxel.z_bounds = {0.0, 10.0};
    cfg.voxel.bin_sizes = {1.15, 1.25, 1.0};
  } else {
    cfg.tx_elements = 8;
    cfg.rx_elements = 8;
    cfg.lidar_max_range_m = 80.0;
    cfg.image_rows = 0;
    cfg.image_cols = 0;
    cfg.scene_cfg.road_length_m = 100.0;
    cfg.scene_cfg.bs_position = {-10.0, 50.0, 4.0};
    cfg.voxel.x_bounds = {-12.0, 28.0};
    cfg.voxel.y_bounds = {0.0, 100.0};
    cfg.voxel.z_bounds = {0.0, 10.0};
    cfg.voxel.bin_sizes = {2.0, 5.0, 0.5};
  }
  cfg.scene_cfg.vehicle_count_range = {2, 10};
  cfg.scene_cfg.traffic_density = 0.6;

  cfg.model.latent_dim = 0;  // track the class count
  const int gps = static_cast<int>(neural::Modality::gps);
  const int lidar = static_cast<int>(neural::Modality::lidar);
  const int image = static_cast<int>(neural::Modality::image);
  cfg.model.extractor_hidden[gps] = {{16, 0.0}};
  cfg.model.extractor_hidden[lidar] = {{64, 0.0}};
  cfg.model.extractor_hidden[image] = {{64, 0.0}};
  cfg.model.fusion_hidden = {{cfg.beam_pair_count(), 0.0}};

  finalize(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());

  std::map<std::string, std::string> entries;  // "section.key" -> value
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      }
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto kb = key.find_first_not_of(" \t");
    const auto ke = key.find_last_not_of(" \t");
    key = key.substr(kb, ke - kb + 1);
    const auto vb = value.find_first_not_of(" \t");
    if (vb == std::string::npos) {
      value.clear();
    } else {
      const auto ve = value.find_last_not_of(" \t");
      value = value.substr(vb, ve - vb + 1);
    }
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key outside any section");
    }
    entries[section + "." + key] = value;
  }

  Profile profile = Profile::neu_like;
  if (auto it = entries.find("run.profile"); it != entries.end()) {
    profile = profile_from_string(it->second);
  }
  RunConfig cfg = default_config(profile);

  auto layer_widths = [](const std::string& v, const std::string& key) {
    return widths_to_layers(to_int_list(v, key));
  };

  double dropout = -1.0;
  for (const auto& [full_key, value] : entries) {
    const std::string& k = full_key;
    if (k == "run.profile") {
      // already applied
    } else if (k == "run.seed") {
      cfg.seed = static_cast<uint64_t>(to_int(value, k));
    } else if (k == "run.samples") {
      cfg.samples = to_int(value, k);
    } else if (k == "run.out_dir") {
      cfg.out_dir = value;
    } else if (k == "run.split_train") {
      cfg.split_fractions[0] = to_double(value, k);
    } else if (k == "run.split_val") {
      cfg.split_fractions[1] = to_double(value, k);
    } else if (k == "run.split_test") {
      cfg.split_fractions[2] = to_double(value, k);
    } else if (k == "run.workers") {
      cfg.workers = static_cast<int>(to_int(value, k));
    } else if (k == "run.k_list") {
      cfg.k_list = to_int_list(value, k);
    } else if (k == "run.alpha_list") {
      cfg.alpha_list = to_double_list(value, k);
    } else if (k == "scene.road_length_m") {
      cfg.scene_cfg.road_length_m = to_double(value, k);
    } else if (k == "scene.lane_count") {
      cfg.scene_cfg.lane_count = static_cast<int>(to_int(value, k));
    } else if (k == "scene.lane_width_m") {
      cfg.scene_cfg.lane_width_m = to_double(value, k);
    } else if (k == "scene.bs_x") {
      cfg.scene_cfg.bs_position.x = to_double(value, k);
    } else if (k == "scene.bs_y") {
      cfg.scene_cfg.bs_position.y = to_double(value, k);
    } else if (k == "scene.bs_height_m") {
      cfg.scene_cfg.bs_height_m = to_double(value, k);
    } else if (k == "scene.vehicle_count_min") {
      cfg.scene_cfg.vehicle_count_range[0] = static_cast<int>(to_int(value, k));
    } else if (k == "scene.vehicle_count_max") {
      cfg.scene_cfg.vehicle_count_range[1] = static_cast<int>(to_int(value, k));
    } else if (k == "scene.traffic_density") {
      cfg.scene_cfg.traffic_density = to_double(value, k);
    } else if (k == "scene.test_density_shift") {
      cfg.test_density_shift = to_double(value, k);
    } else if (k == "sensors.gps_noise_sigma_m") {
      cfg.gps_noise_sigma_m = to_double(value, k);
    } else if (k == "sensors.lidar_max_range_m") {
      cfg.lidar_max_range_m = to_double(value, k);
    } else if (k == "sensors.lidar_points_per_face") {
      cfg.lidar_points_per_face = static_cast<int>(to_int(value, k));
    } else if (k == "sensors.store_point_cloud") {
      cfg.store_point_cloud = to_bool(value, k);
    } else if (k == "sensors.image_rows") {
      cfg.image_rows = to_int(value, k);
    } else if (k == "sensors.image_cols") {
      cfg.image_cols = to_int(value, k);
    } else if (k == "sensors.bitmap_window") {
      cfg.bitmap_window = static_cast<int>(to_int(value, k));
    } else if (k == "sensors.bitmap_stride") {
      cfg.bitmap_stride = static_cast<int>(to_int(value, k));
    } else if (k == "voxel.x_min") {
      cfg.voxel.x_bounds[0] = to_double(value, k);
    } else if (k == "voxel.x_max") {
      cfg.voxel.x_bounds[1] = to_double(value, k);
    } else if (k == "voxel.y_min") {
      cfg.voxel.y_bounds[0] = to_double(value, k);
    } else if (k == "voxel.y_max") {
      cfg.voxel.y_bounds[1] = to_double(value, k);
    } else if (k == "voxel.z_min") {
      cfg.voxel.z_bounds[0] = to_double(value, k);
    } else if (k == "voxel.z_max") {
      cfg.voxel.z_bounds[1] = to_double(value, k);
    } else if (k == "voxel.bin_x") {
      cfg.voxel.bin_sizes.x = to_double(value, k);
    } else if (k == "voxel.bin_y") {
      cfg.voxel.bin_sizes.y = to_double(value, k);
    } else if (k == "voxel.bin_z") {
      cfg.voxel.bin_sizes.z = to_double(value, k);
    } else if (k == "channel.tx_elements") {
      cfg.tx_elements = to_int(value, k);
    } else if (k == "channel.rx_elements") {
      cfg.rx_elements = to_int(value, k);
    } else if (k == "channel.reflection_loss_db") {
      cfg.reflection_loss_db = to_double(value, k);
    } else if (k == "channel.pathloss_exponent") {
      cfg.pathloss_exponent = to_double(value, k);
    } else if (k == "model.latent_dim") {
      cfg.model.latent_dim = to_int(value, k);
    } else if (k == "model.gps_hidden") {
      cfg.model.extractor_hidden[0] = layer_widths(value, k);
    } else if (k == "model.lidar_hidden") {
      cfg.model.extractor_hidden[1] = layer_widths(value, k);
    } else if (k == "model.image_hidden") {
      cfg.model.extractor_hidden[2] = layer_widths(value, k);
    } else if (k == "model.fusion_hidden") {
      cfg.model.fusion_hidden = layer_widths(value, k);
    } else if (k == "model.dropout") {
      dropout = to_double(value, k);
    } else if (k == "train.learning_rate") {
      cfg.train.learning_rate = to_double(value, k);
    } else if (k == "train.batch_size") {
      cfg.train.batch_size = to_int(value, k);
    } else if (k == "train.max_epochs") {
      cfg.train.max_epochs = to_int(value, k);
    } else if (k == "train.patience") {
      cfg.train.early_stop_patience = to_int(value, k);
    } else if (k == "train.l1") {
      cfg.train.l1_dense = to_double(value, k);
    } else if (k == "train.l2") {
      cfg.train.l2_dense = to_double(value, k);
    } else if (k == "train.val_fraction") {
      cfg.train.val_fraction = to_double(value, k);
    } else if (k == "kselect.alpha") {
      cfg.kselect.alpha = to_double(value, k);
    } else if (k == "kselect.t_total_ms") {
      cfg.kselect.t_total_ms = to_double(value, k);
    } else {
      throw ConfigError("config: unknown key " + k);
    }
  }

  if (dropout >= 0.0) {
    for (auto& layers : cfg.model.extractor_hidden) {
      for (auto& layer : layers) layer.dropout = dropout;
    }
    for (auto& layer : cfg.model.fusion_hidden) layer.dropout = dropout;
  }

  finalize(cfg);
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json config_echo(const RunConfig& cfg) {
  ordered_json j;
  j["profile"] = to_string(cfg.profile);
  j["seed"] = cfg.seed;
  j["samples"] = cfg.samples;
  j["split_fractions"] = cfg.split_fractions;
  j["tx_elements"] = cfg.tx_elements;
  j["rx_elements"] = cfg.rx_elements;

  ordered_json sc;
  sc["road_length_m"] = cfg.scene_cfg.road_length_m;
  sc["lane_count"] = cfg.scene_cfg.lane_count;
  sc["lane_width_m"] = cfg.scene_cfg.lane_width_m;
  sc["bs_position"] = ordered_json::array({cfg.scene_cfg.bs_position.x,
                                           cfg.scene_cfg.bs_position.y,
                                           cfg.scene_cfg.bs_position.z});
  sc["vehicle_count_range"] = cfg.scene_cfg.vehicle_count_range;
  sc["traffic_density"] = cfg.scene_cfg.traffic_density;
  sc["test_density_shift"] = cfg.test_density_shift;
  j["scene"] = sc;

  ordered_json sensors;
  sensors["gps_noise_sigma_m"] = cfg.gps_noise_sigma_m;
  sensors["lidar_max_range_m"] = cfg.lidar_max_range_m;
  sensors["lidar_points_per_face"] = cfg.lidar_points_per_face;
  sensors["store_point_cloud"] = cfg.store_point_cloud;
  sensors["image_rows"] = cfg.image_rows;
  sensors["image_cols"] = cfg.image_cols;
  sensors["bitmap_window"] = cfg.bitmap_window;
  sensors["bitmap_stride"] = cfg.bitmap_stride;
  j["sensors"] = sensors;

  ordered_json voxel;
  voxel["x_bounds"] = cfg.voxel.x_bounds;
  voxel["y_bounds"] = cfg.voxel.y_bounds;
  voxel["z_bounds"] = cfg.voxel.z_bounds;
  voxel["bin_sizes"] = ordered_json::array(
      {cfg.voxel.bin_sizes.x, cfg.voxel.bin_sizes.y, cfg.voxel.bin_sizes.z});
  j["voxel"] = voxel;

  ordered_json chan;
  chan["reflection_loss_db"] = cfg.reflection_loss_db;
  chan["pathloss_exponent"] = cfg.pathloss_exponent;
  j["channel"] = chan;

  j["model"] = neural::spec_to_json(cfg.model);

  ordered_json train;
  train["learning_rate"] = cfg.train.learning_rate;
  train["batch_size"] = cfg.train.batch_size;
  train["max_epochs"] = cfg.train.max_epochs;
  train["patience"] = cfg.train.early_stop_patience;
  train["l1"] = cfg.train.l1_dense;
  train["l2"] = cfg.train.l2_dense;
  train["val_fraction"] = cfg.train.val_fraction;
  j["train"] = train;

  ordered_json kselect;
  kselect["alpha"] = cfg.kselect.alpha;
  kselect["t_total_ms"] = cfg.kselect.t_total_ms;
  j["kselect"] = kselect;

  j["k_list"] = cfg.k_list;
  j["alpha_list"] = cfg.alpha_list;
  return j;
}

}  // namespace beamsim::harness
