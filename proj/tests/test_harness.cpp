#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamsim/pipeline.hpp"

using namespace beamsim;
using namespace beamsim::harness;

namespace fs = std::filesystem;

namespace {

RunConfig small_neu_config(const fs::path& out) {
  RunConfig cfg = default_config(Profile::neu_like);
  cfg.samples = 40;
  cfg.seed = 123;
  cfg.out_dir = out;
  cfg.scene_cfg.rng_seed = cfg.seed;
  cfg.train.rng_seed = cfg.seed;
  cfg.train.max_epochs = 3;
  cfg.lidar_points_per_face = 6;
  cfg.k_list = {1, 2, 8};
  cfg.alpha_list = {0.0, 1.0};
  return cfg;
}

RunConfig small_raymobtime_config(const fs::path& out) {
  RunConfig cfg = default_config(Profile::raymobtime_like);
  cfg.samples = 12;
  cfg.seed = 77;
  cfg.out_dir = out;
  cfg.scene_cfg.rng_seed = cfg.seed;
  cfg.train.rng_seed = cfg.seed;
  cfg.train.max_epochs = 2;
  cfg.lidar_points_per_face = 4;
  // Desk-size camera so the image branch stays cheap.
  cfg.image_rows = 108;
  cfg.image_cols = 192;
  cfg.bitmap_window = 12;
  cfg.bitmap_stride = 6;
  cfg.model.extractor_hidden[2] = {{16, 0.0}};
  cfg.model.fusion_hidden = {{32, 0.0}};
  cfg.model.latent_dim = 16;
  cfg.k_list = {1, 4};
  // Re-derive camera frame and input dims for the overridden sizes.
  cfg.camera.x_min = cfg.voxel.x_bounds[0];
  cfg.camera.x_max = cfg.voxel.x_bounds[1];
  cfg.camera.y_min = cfg.voxel.y_bounds[0];
  cfg.camera.y_max = cfg.voxel.y_bounds[1];
  const int64_t bm_rows = (cfg.image_rows - cfg.bitmap_window) / cfg.bitmap_stride + 1;
  const int64_t bm_cols = (cfg.image_cols - cfg.bitmap_window) / cfg.bitmap_stride + 1;
  cfg.model.input_dims[2] = bm_rows * bm_cols;
  return cfg;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("dataset generation is reproducible and well formed") {
  TempDir tmp("beamsim_harness_gen");
  const RunConfig cfg = small_neu_config(tmp.path / "run");

  const Manifest a = cmd_generate(cfg, tmp.path / "a");
  const Manifest b = cmd_generate(cfg, tmp.path / "b");
  CHECK(a.train.checksum == b.train.checksum);
  CHECK(a.val.checksum == b.val.checksum);
  CHECK(a.test.checksum == b.test.checksum);
  CHECK(read_file(tmp.path / "a" / "samples.jsonl") ==
        read_file(tmp.path / "b" / "samples.jsonl"));

  const Dataset ds = load_dataset(tmp.path / "a");
  CHECK(ds.manifest.profile == "neu-like");
  CHECK(ds.records.size() == 40);
  CHECK(ds.train().size() + ds.val().size() + ds.test().size() == 40);

  for (const SampleRecord& rec : ds.records) {
    CHECK_FALSE(rec.bitmap.has_value());  // no camera in this profile
    CHECK(rec.power.best_index() < cfg.beam_pair_count());
    CHECK(rec.power.best_index() >= 0);
    CHECK(rec.voxel.shape == std::array<int64_t, 3>{20, 20, 20});
    // Exactly one of each marker.
    int bs = 0, rx = 0;
    for (int8_t cell : rec.voxel.cells) {
      bs += cell == -2;
      rx += cell == -1;
    }
    CHECK(bs == 1);
    CHECK(rx == 1);
  }
}

TEST_CASE("records round-trip through json") {
  TempDir tmp("beamsim_harness_roundtrip");
  RunConfig cfg = small_neu_config(tmp.path / "run");
  cfg.store_point_cloud = true;
  const SampleRecord rec = build_sample(cfg, 5, false);
  const SampleRecord back = record_from_json(record_to_json(rec));
  CHECK(back.scene_id == rec.scene_id);
  CHECK(back.los == rec.los);
  CHECK(back.gps.latitude_like == rec.gps.latitude_like);
  CHECK(back.voxel.cells == rec.voxel.cells);
  CHECK(back.power.y == rec.power.y);
  CHECK(back.power.best_pair == rec.power.best_pair);
  REQUIRE(back.cloud.has_value());
  CHECK(back.cloud->points.size() == rec.cloud->points.size());
  CHECK(back.world.obstacles.size() == rec.world.obstacles.size());
}

TEST_CASE("image profile produces bitmaps sized by the window formula") {
  TempDir tmp("beamsim_harness_img");
  const RunConfig cfg = small_raymobtime_config(tmp.path / "run");
  const SampleRecord rec = build_sample(cfg, 3, false);
  REQUIRE(rec.bitmap.has_value());
  CHECK(rec.bitmap->rows == (108 - 12) / 6 + 1);
  CHECK(rec.bitmap->cols == (192 - 12) / 6 + 1);
  CHECK(rec.power.m == 32);
  CHECK(rec.power.n == 8);
}

TEST_CASE("train, evaluate and select-k round trip") {
  TempDir tmp("beamsim_harness_train");
  const RunConfig cfg = small_neu_config(tmp.path / "run");
  const fs::path data_dir = tmp.path / "data";
  cmd_generate(cfg, data_dir);

  const fs::path ckpt = tmp.path / "fusion.json";
  const fs::path log = tmp.path / "train_log.csv";
  const TrainOutput out = cmd_train(cfg, data_dir, {}, ckpt, log);
  CHECK(fs::exists(ckpt));

  // Log rows equal completed epochs.
  std::ifstream log_in(log);
  std::string line;
  int rows = -1;  // header
  while (std::getline(log_in, line)) ++rows;
  CHECK(rows == static_cast<int>(out.result.log.size()));

  // Unimodal gps training works without the other sensors.
  const fs::path gps_ckpt = tmp.path / "gps.json";
  const TrainOutput gps_out =
      cmd_train(cfg, data_dir, {neural::Modality::gps}, gps_ckpt,
                tmp.path / "gps_log.csv");
  CHECK(gps_out.spec.modalities == std::vector{neural::Modality::gps});

  const fs::path eval_csv = tmp.path / "evaluate.csv";
  const fs::path dump = tmp.path / "eval_dump.jsonl";
  const EvaluateSummary summary =
      cmd_evaluate(cfg, data_dir, ckpt, cfg.k_list, eval_csv, dump);
  CHECK(summary.distributed_checked);
  CHECK(summary.dist_max_abs_diff < 1e-12);
  CHECK(summary.roundtrip_max_abs_diff < 1e-9);

  // Accuracy column is nondecreasing across the K rows.
  std::ifstream csv_in(eval_csv);
  std::getline(csv_in, line);  // header
  double prev_acc = -1.0;
  int k_rows = 0;
  while (std::getline(csv_in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // mode
    std::getline(ss, field, ',');  // k
    std::getline(ss, field, ',');  // acc
    const double acc = std::stod(field);
    CHECK(acc >= prev_acc);
    prev_acc = acc;
    ++k_rows;
  }
  CHECK(k_rows == static_cast<int>(cfg.k_list.size()));

  // The dump is enough to recompute the reported accuracy.
  std::ifstream dump_in(dump);
  std::vector<metrics::EvalRecord> records;
  while (std::getline(dump_in, line)) {
    const auto j = nlohmann::json::parse(line);
    metrics::EvalRecord rec;
    rec.true_index = j.at("true_index").get<int64_t>();
    rec.score = j.at("score").get<std::vector<double>>();
    rec.power_row = j.at("power").get<std::vector<double>>();
    records.push_back(std::move(rec));
  }
  CHECK(records.size() == static_cast<size_t>(
                              load_dataset(data_dir).test().size()));
  CHECK(metrics::acc_at_k(records, cfg.k_list.back()) ==
        doctest::Approx(prev_acc).epsilon(1e-12));

  // Subset-size selection report.
  const fs::path sel_csv = tmp.path / "select_k.csv";
  const fs::path tables_json = tmp.path / "tables.json";
  cmd_select_k(cfg, data_dir, ckpt, cfg.alpha_list, cfg.kselect.t_total_ms,
               sel_csv, tables_json, tmp.path / "select_samples.csv");

  std::ifstream sel_in(sel_csv);
  std::getline(sel_in, line);  // header
  double prev_mean_k = 1e300;
  while (std::getline(sel_in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // alpha
    std::getline(ss, field, ',');  // mean_selected_k
    const double mean_k = std::stod(field);
    CHECK(mean_k <= prev_mean_k);
    prev_mean_k = mean_k;
  }

  // Tables were built from the train split only.
  const auto tables_doc = nlohmann::json::parse(read_file(tables_json));
  CHECK(tables_doc.at("train_checksum").get<std::string>() ==
        load_dataset(data_dir).manifest.train.checksum);
  const topk::EmpiricalTables tables = tables_from_json(tables_doc);
  CHECK(tables.class_count == cfg.beam_pair_count());
  CHECK(tables.sample_count ==
        static_cast<int64_t>(load_dataset(data_dir).train().size()));
}

TEST_CASE("training resume reproduces the uninterrupted run") {
  TempDir tmp("beamsim_harness_resume");
  RunConfig cfg = small_neu_config(tmp.path / "run");
  const fs::path data_dir = tmp.path / "data";
  cmd_generate(cfg, data_dir);

  RunConfig full_cfg = cfg;
  full_cfg.train.max_epochs = 4;
  const TrainOutput full =
      cmd_train(full_cfg, data_dir, {}, tmp.path / "full.json",
                tmp.path / "full_log.csv");

  RunConfig half_cfg = cfg;
  half_cfg.train.max_epochs = 2;
  cmd_train(half_cfg, data_dir, {}, tmp.path / "half.json",
            tmp.path / "half_log.csv");
  const TrainOutput resumed =
      cmd_train(full_cfg, data_dir, {}, tmp.path / "resumed.json",
                tmp.path / "resumed_log.csv", tmp.path / "half.json");

  REQUIRE(resumed.result.log.size() == full.result.log.size());
  for (size_t i = 0; i < full.result.log.size(); ++i) {
    CHECK(resumed.result.log[i].train_loss == full.result.log[i].train_loss);
    CHECK(resumed.result.log[i].val_top1 == full.result.log[i].val_top1);
  }
  CHECK(resumed.result.params.values == full.result.params.values);
}

TEST_CASE("config files override profile defaults") {
  TempDir tmp("beamsim_harness_cfg");
  const fs::path cfg_path = tmp.path / "run.ini";
  std::ofstream out(cfg_path);
  out << "[run]\n"
         "profile = raymobtime-like\n"
         "seed = 5\n"
         "samples = 9\n"
         "k_list = 1, 3, 7\n"
         "[scene]\n"
         "traffic_density = 0.25\n"
         "[train]\n"
         "max_epochs = 2\n";
  out.close();

  const RunConfig cfg = load_config(cfg_path);
  CHECK(cfg.profile == Profile::raymobtime_like);
  CHECK(cfg.seed == 5);
  CHECK(cfg.samples == 9);
  CHECK(cfg.scene_cfg.traffic_density == 0.25);
  CHECK(cfg.train.max_epochs == 2);
  CHECK(cfg.k_list == std::vector<int64_t>{1, 3, 7});
  CHECK(cfg.tx_elements == 32);  // profile default kept
  CHECK(cfg.scene_cfg.rng_seed == 5);

  std::ofstream bad(cfg_path, std::ios::app);
  bad << "[scene]\nnot_a_key = 1\n";
  bad.close();
  CHECK_THROWS_AS(load_config(cfg_path), ConfigError);
}

TEST_CASE("latency report covers the full beam range") {
  TempDir tmp("beamsim_harness_latency");
  const RunConfig cfg = small_neu_config(tmp.path / "run");
  const fs::path csv = tmp.path / "latency.csv";
  cmd_latency(cfg, csv);

  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,t_sweep_ms,t_df_ms,t_nr_ms,efficiency,reduction");
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
    ++rows;
  }
  CHECK(rows == cfg.beam_pair_count());  // the degenerate full sweep row exists
  CHECK(last.substr(0, 3) == "64,");

  std::stringstream ss(last);
  std::string field;
  std::getline(ss, field, ',');
  std::getline(ss, field, ',');
  std::getline(ss, field, ',');
  std::getline(ss, field, ',');
  CHECK(std::stod(field) == doctest::Approx(25.0));  // t_nr for 64 pairs
}
