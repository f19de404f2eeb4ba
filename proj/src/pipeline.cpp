#include "beamsim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace beamsim::harness {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr uint64_t kGpsTag = 21;
constexpr uint64_t kLidarTag = 22;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw DataError("failed writing " + path.string());
}

void parallel_for(int64_t n, int workers,
                  const std::function<void(int64_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      const int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int thread_count = std::min<int64_t>(workers, n);
  pool.reserve(thread_count);
  for (int w = 0; w < thread_count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct SplitCounts {
  int64_t train = 0;
  int64_t val = 0;
  int64_t test = 0;
};

SplitCounts split_counts(const RunConfig& cfg) {
  SplitCounts c;
  c.train = std::llround(cfg.split_fractions[0] *
                         static_cast<double>(cfg.samples));
  c.val =
      std::llround(cfg.split_fractions[1] * static_cast<double>(cfg.samples));
  c.test = cfg.samples - c.train - c.val;
  if (c.train < 0 || c.val < 0 || c.test < 0) {
    throw ConfigError("run: split fractions produce a negative split");
  }
  return c;
}

std::string modality_signature(const std::vector<neural::Modality>& mods) {
  std::string out;
  for (size_t i = 0; i < mods.size(); ++i) {
    if (i > 0) out += "+";
    out += neural::to_string(mods[i]);
  }
  return out;
}

neural::Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  json j;
  in >> j;
  return neural::checkpoint_from_json(j);
}

double record_throughput_term(const metrics::EvalRecord& rec,
                              const topk::BeamSubset& subset, bool& valid) {
  const double best_power = rec.power_row[rec.true_index];
  if (best_power <= 0.0) {
    valid = false;
    return 0.0;
  }
  double inside_best = 0.0;
  for (int64_t idx : subset.indices) {
    inside_best = std::max(inside_best, rec.power_row[idx]);
  }
  valid = true;
  return std::log2(1.0 + inside_best) / std::log2(1.0 + best_power);
}

}  // namespace

int resolve_workers(const RunConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  if (const char* env = std::getenv("BEAMSIM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

SampleRecord build_sample(const RunConfig& cfg, uint64_t scene_id,
                          bool shifted_density) {
  scene::SceneConfig scfg = cfg.scene_cfg;
  if (shifted_density) {
    scfg.traffic_density =
        std::min(1.0, scfg.traffic_density + cfg.test_density_shift);
  }

  SampleRecord rec;
  rec.scene_id = scene_id;
  rec.world = scene::generate_scene(scfg, scene_id);
  rec.los = scene::classify_los(rec.world);

  Rng gps_rng = Rng::stream(cfg.seed, scene_id, kGpsTag);
  rec.gps = scene::read_gps(rec.world, cfg.gps_noise_sigma_m, gps_rng);

  Rng lidar_rng = Rng::stream(cfg.seed, scene_id, kLidarTag);
  const scene::PointCloud cloud = scene::sample_lidar(
      rec.world, cfg.lidar_max_range_m, cfg.lidar_points_per_face, lidar_rng);

  // The receiver cell comes from the (noisy) GPS fix, clamped to the zone.
  const Vec3 marker{
      std::clamp(rec.gps.latitude_like, cfg.voxel.x_bounds[0],
                 cfg.voxel.x_bounds[1]),
      std::clamp(rec.gps.longitude_like, cfg.voxel.y_bounds[0],
                 cfg.voxel.y_bounds[1]),
      std::clamp(rec.world.receiver.center.z, cfg.voxel.z_bounds[0],
                 cfg.voxel.z_bounds[1])};
  rec.voxel = preprocess::voxelize(cloud, cfg.voxel, cfg.scene_cfg.bs_position,
                                   marker);
  if (cfg.store_point_cloud) rec.cloud = cloud;

  if (cfg.has_image()) {
    const scene::SceneImage img =
        scene::render_image(rec.world, cfg.camera, cfg.image_rows,
                            cfg.image_cols);
    rec.bitmap =
        preprocess::make_bitmap(img, cfg.bitmap_window, cfg.bitmap_stride);
  }

  const channel::PathSet paths = channel::trace_paths(
      rec.world, cfg.reflection_loss_db, cfg.pathloss_exponent, cfg.walls);
  const channel::ChannelMatrix h =
      channel::synth_channel(paths, cfg.tx_elements, cfg.rx_elements);
  rec.power = channel::power_matrix(h, channel::dft_codebook(cfg.tx_elements),
                                    channel::dft_codebook(cfg.rx_elements));
  return rec;
}

Manifest cmd_generate(const RunConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  const SplitCounts counts = split_counts(cfg);

  // A scene can occasionally have no usable channel (fully blocked link);
  // each output slot then deterministically retries a displaced scene id so
  // the result is independent of worker count.
  constexpr int kRetriesPerSlot = 8;
  std::vector<SampleRecord> records(cfg.samples);
  std::vector<std::vector<uint64_t>> skipped(cfg.samples);
  std::vector<std::string> failures(cfg.samples);
  parallel_for(cfg.samples, resolve_workers(cfg), [&](int64_t i) {
    const bool in_test = i >= counts.train + counts.val;
    for (int attempt = 0; attempt < kRetriesPerSlot; ++attempt) {
      const uint64_t scene_id =
          static_cast<uint64_t>(i) +
          static_cast<uint64_t>(attempt) * static_cast<uint64_t>(cfg.samples);
      try {
        records[i] = build_sample(cfg, scene_id, in_test);
        return;
      } catch (const DataError& e) {
        skipped[i].push_back(scene_id);
        failures[i] = e.what();
      }
    }
    failures[i] = "slot " + std::to_string(i) +
                  " exhausted retries; last error: " + failures[i];
    throw DataError(failures[i]);
  });

  Manifest manifest;
  manifest.profile = to_string(cfg.profile);
  manifest.seed = cfg.seed;
  manifest.sample_count = cfg.samples;
  manifest.split_fractions = cfg.split_fractions;
  manifest.train = {0, counts.train, ""};
  manifest.val = {counts.train, counts.train + counts.val, ""};
  manifest.test = {counts.train + counts.val, cfg.samples, ""};
  for (const auto& ids : skipped) {
    manifest.skipped_scenes.insert(manifest.skipped_scenes.end(), ids.begin(),
                                   ids.end());
  }
  manifest.config_echo = config_echo(cfg);

  write_dataset(dir, records, manifest);
  return manifest;
}

neural::Sample record_to_sample(const RunConfig& cfg, const SampleRecord& rec,
                                const std::vector<neural::Modality>& mods) {
  neural::Sample sample;
  sample.label = rec.power.best_index();

  for (neural::Modality m : mods) {
    const int mi = static_cast<int>(m);
    switch (m) {
      case neural::Modality::gps: {
        // Center and scale the planar fix by the road extents.
        const double half_w = cfg.scene_cfg.road_width() / 2.0;
        const double half_l = cfg.scene_cfg.road_length_m / 2.0;
        sample.inputs[mi] = neural::Tensor(
            {2}, {(rec.gps.latitude_like - half_w) / half_w,
                  (rec.gps.longitude_like - half_l) / half_l});
        break;
      }
      case neural::Modality::lidar: {
        std::vector<double> cells(rec.voxel.cells.begin(),
                                  rec.voxel.cells.end());
        sample.inputs[mi] = neural::Tensor(
            {rec.voxel.shape[0], rec.voxel.shape[1], rec.voxel.shape[2]},
            std::move(cells));
        break;
      }
      case neural::Modality::image: {
        if (!rec.bitmap.has_value()) {
          throw DataError("record " + std::to_string(rec.scene_id) +
                          " has no bitmap but the model wants one");
        }
        const preprocess::RefinedBitMap refined =
            preprocess::refine_bitmap(*rec.bitmap, rec.world.receiver.type);
        std::vector<double> labels(refined.labels.begin(),
                                   refined.labels.end());
        sample.inputs[mi] = neural::Tensor({refined.rows, refined.cols},
                                           std::move(labels));
        break;
      }
    }
    if (sample.inputs[mi].size() != cfg.model.input_dims[mi]) {
      throw DataError(std::string("record input size for ") +
                      neural::to_string(m) +
                      " does not match the configured model");
    }
  }
  return sample;
}

std::vector<neural::Sample> build_samples(
    const RunConfig& cfg, std::span<const SampleRecord> records,
    const std::vector<neural::Modality>& mods) {
  std::vector<neural::Sample> samples(records.size());
  parallel_for(static_cast<int64_t>(records.size()), resolve_workers(cfg),
               [&](int64_t i) {
                 samples[i] = record_to_sample(cfg, records[i], mods);
               });
  return samples;
}

TrainOutput cmd_train(const RunConfig& cfg,
                      const std::filesystem::path& dataset_dir,
                      std::vector<neural::Modality> modalities,
                      const std::filesystem::path& checkpoint_path,
                      const std::filesystem::path& log_path,
                      const std::optional<std::filesystem::path>& resume_from) {
  const Dataset ds = load_dataset(dataset_dir);
  if (ds.manifest.profile != to_string(cfg.profile)) {
    throw DataError("dataset profile '" + ds.manifest.profile +
                    "' does not match configured profile '" +
                    to_string(cfg.profile) + "'");
  }

  if (modalities.empty()) modalities = cfg.all_modalities();
  std::sort(modalities.begin(), modalities.end());
  for (neural::Modality m : modalities) {
    if (cfg.model.input_dims[static_cast<int>(m)] < 1) {
      throw DataError(std::string("profile has no ") + neural::to_string(m) +
                      " modality");
    }
  }

  neural::ModelSpec spec = cfg.model;
  spec.modalities = modalities;
  spec.validate();

  const std::vector<neural::Sample> train_samples =
      build_samples(cfg, ds.train(), modalities);
  const std::vector<neural::Sample> val_samples =
      build_samples(cfg, ds.val(), modalities);

  neural::Trainer trainer(spec, cfg.train);
  if (resume_from.has_value()) {
    const neural::Checkpoint prev = load_checkpoint(*resume_from);
    if (neural::spec_to_json(prev.spec) != neural::spec_to_json(spec)) {
      throw DataError("resume checkpoint was trained with a different model");
    }
    if (prev.trainer_state.is_null()) {
      throw DataError("resume checkpoint carries no trainer state");
    }
    trainer.restore(prev.trainer_state);
  }

  TrainOutput out;
  out.spec = spec;
  out.result = trainer.run(train_samples, val_samples);

  neural::Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.seed = cfg.seed;
  ckpt.params = out.result.params;
  ckpt.trainer_state = trainer.state();
  write_text(checkpoint_path, neural::checkpoint_to_json(ckpt).dump() + "\n");

  std::string log = "epoch,train_loss,val_top1\n";
  for (const neural::EpochRow& row : out.result.log) {
    log += std::to_string(row.epoch) + "," + fmt_double(row.train_loss) + "," +
           fmt_double(row.val_top1) + "\n";
  }
  write_text(log_path, log);
  return out;
}

std::vector<metrics::EvalRecord> score_records(
    const RunConfig& cfg, const neural::Checkpoint& ckpt,
    std::span<const SampleRecord> records) {
  std::vector<metrics::EvalRecord> out(records.size());
  parallel_for(
      static_cast<int64_t>(records.size()), resolve_workers(cfg),
      [&](int64_t i) {
        const neural::Sample sample =
            record_to_sample(cfg, records[i], ckpt.spec.modalities);
        out[i].score = neural::predict(ckpt.params, ckpt.spec, sample);
        out[i].true_index = records[i].power.best_index();
        out[i].power_row = records[i].power.y;
      });
  return out;
}

EvaluateSummary cmd_evaluate(
    const RunConfig& cfg, const std::filesystem::path& dataset_dir,
    const std::filesystem::path& checkpoint_path,
    const std::vector<int64_t>& k_list, const std::filesystem::path& out_csv,
    const std::optional<std::filesystem::path>& dump_path) {
  const Dataset ds = load_dataset(dataset_dir);
  const neural::Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.spec.class_count != cfg.beam_pair_count()) {
    throw DataError("checkpoint class count does not match the profile");
  }
  const auto test = ds.test();
  if (test.empty()) throw DataError("dataset has no test split");

  const std::vector<metrics::EvalRecord> records =
      score_records(cfg, ckpt, test);

  // Distributed-inference consistency: vehicle-side latents, optionally the
  // serialized payload, then the MEC-side completion.
  EvaluateSummary summary;
  const bool splittable = ckpt.spec.has(neural::Modality::gps) &&
                          ckpt.spec.has(neural::Modality::lidar);
  if (splittable) {
    summary.distributed_checked = true;
    for (size_t i = 0; i < test.size(); ++i) {
      const neural::Sample sample =
          record_to_sample(cfg, test[i], ckpt.spec.modalities);
      const int gps_i = static_cast<int>(neural::Modality::gps);
      const int lidar_i = static_cast<int>(neural::Modality::lidar);
      const int image_i = static_cast<int>(neural::Modality::image);
      const neural::Tensor z_vehicle = neural::vehicle_side_features(
          ckpt.params, ckpt.spec, sample.inputs[gps_i],
          sample.inputs[lidar_i]);
      const neural::Tensor* image_input =
          ckpt.spec.has(neural::Modality::image) ? &sample.inputs[image_i]
                                                 : nullptr;

      const ScoreVector distributed = neural::mec_side_predict(
          ckpt.params, ckpt.spec, z_vehicle, image_input);
      const neural::Tensor decoded =
          neural::decode_latents(neural::encode_latents(z_vehicle));
      const ScoreVector roundtrip = neural::mec_side_predict(
          ckpt.params, ckpt.spec, decoded, image_input);

      for (size_t b = 0; b < records[i].score.size(); ++b) {
        summary.dist_max_abs_diff =
            std::max(summary.dist_max_abs_diff,
                     std::abs(distributed[b] - records[i].score[b]));
        summary.roundtrip_max_abs_diff =
            std::max(summary.roundtrip_max_abs_diff,
                     std::abs(roundtrip[b] - records[i].score[b]));
      }
    }
  }

  const std::string mode = modality_signature(ckpt.spec.modalities);
  std::string csv =
      "mode,k,acc_at_k,weighted_precision,weighted_recall,weighted_f1,"
      "kl_mean,kl_label_dist,throughput_ratio,throughput_skipped,"
      "dist_max_abs_diff,roundtrip_max_abs_diff\n";
  const metrics::Prf prf = metrics::weighted_prf(records);
  const double kl_mean = metrics::mean_kl_vs_onehot(records);
  const double kl_label = metrics::label_distribution_kl(records);
  for (int64_t k : k_list) {
    const double acc = metrics::acc_at_k(records, k);
    const metrics::ThroughputRatio ratio = metrics::throughput_ratio(records, k);
    csv += mode + "," + std::to_string(k) + "," + fmt_double(acc) + "," +
           fmt_double(prf.precision) + "," + fmt_double(prf.recall) + "," +
           fmt_double(prf.f1) + "," + fmt_double(kl_mean) + "," +
           fmt_double(kl_label) + "," + fmt_double(ratio.value) + "," +
           std::to_string(ratio.skipped) + "," +
           fmt_double(summary.dist_max_abs_diff) + "," +
           fmt_double(summary.roundtrip_max_abs_diff) + "\n";
  }
  write_text(out_csv, csv);

  if (dump_path.has_value()) {
    std::string dump;
    for (size_t i = 0; i < records.size(); ++i) {
      ordered_json j;
      j["index"] = i;
      j["true_index"] = records[i].true_index;
      j["score"] = records[i].score;
      j["power"] = records[i].power_row;
      dump += j.dump() + "\n";
    }
    write_text(*dump_path, dump);
  }
  return summary;
}

void cmd_select_k(const RunConfig& cfg, const std::filesystem::path& dataset_dir,
                  const std::filesystem::path& checkpoint_path,
                  const std::vector<double>& alpha_list, double t_total_ms,
                  const std::filesystem::path& out_csv,
                  const std::optional<std::filesystem::path>& tables_out,
                  const std::optional<std::filesystem::path>& samples_out) {
  const Dataset ds = load_dataset(dataset_dir);
  const neural::Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ds.train().empty()) throw DataError("dataset has no train split");
  if (ds.test().empty()) throw DataError("dataset has no test split");

  // Tables come from the training split only.
  const std::vector<metrics::EvalRecord> train_scored =
      score_records(cfg, ckpt, ds.train());
  std::vector<ScoreVector> train_scores;
  std::vector<int64_t> train_labels;
  train_scores.reserve(train_scored.size());
  for (const metrics::EvalRecord& rec : train_scored) {
    train_scores.push_back(rec.score);
    train_labels.push_back(rec.true_index);
  }
  const topk::EmpiricalTables tables =
      topk::build_tables(train_scores, train_labels);

  if (tables_out.has_value()) {
    ordered_json j = tables_to_json(tables);
    j["train_checksum"] = ds.manifest.train.checksum;
    write_text(*tables_out, j.dump() + "\n");
  }

  const std::vector<metrics::EvalRecord> test_scored =
      score_records(cfg, ckpt, ds.test());

  topk::KSelectionConfig kcfg = cfg.kselect;
  kcfg.t_total_ms = t_total_ms;

  std::string csv =
      "alpha,mean_selected_k,acc_at_selected,throughput_ratio,"
      "throughput_skipped,mean_t_df_ms,infeasible_count,fallback_count\n";
  std::string per_sample = "alpha,index,selected_k,objective,included,"
                           "t_df_ms,fallback\n";

  for (const double alpha : alpha_list) {
    kcfg.alpha = alpha;
    int64_t k_sum = 0;
    int64_t included = 0;
    int64_t infeasible = 0;
    int64_t fallbacks = 0;
    int64_t ratio_skipped = 0;
    double ratio_sum = 0.0;
    int64_t ratio_count = 0;
    double t_df_sum = 0.0;
    int64_t selected = 0;

    for (size_t i = 0; i < test_scored.size(); ++i) {
      const metrics::EvalRecord& rec = test_scored[i];
      topk::KSelection sel;
      try {
        sel = topk::select_k(tables, rec.score, kcfg);
      } catch (const ContactTimeError&) {
        ++infeasible;
        continue;
      }
      ++selected;
      k_sum += sel.k;
      if (sel.fallback) ++fallbacks;
      const bool in_subset =
          std::find(sel.subset.indices.begin(), sel.subset.indices.end(),
                    rec.true_index) != sel.subset.indices.end();
      if (in_subset) ++included;
      const double t = latency::t_df(sel.k, kcfg.pipeline, kcfg.nr);
      t_df_sum += t;
      bool valid = false;
      const double term = record_throughput_term(rec, sel.subset, valid);
      if (valid) {
        ratio_sum += term;
        ++ratio_count;
      } else {
        ++ratio_skipped;
      }
      if (samples_out.has_value()) {
        per_sample += fmt_double(alpha) + "," + std::to_string(i) + "," +
                      std::to_string(sel.k) + "," + fmt_double(sel.objective) +
                      "," + (in_subset ? "1" : "0") + "," + fmt_double(t) +
                      "," + (sel.fallback ? "1" : "0") + "\n";
      }
    }

    const double denom = selected > 0 ? static_cast<double>(selected) : 1.0;
    csv += fmt_double(alpha) + "," +
           fmt_double(static_cast<double>(k_sum) / denom) + "," +
           fmt_double(static_cast<double>(included) / denom) + "," +
           fmt_double(ratio_count > 0
                          ? ratio_sum / static_cast<double>(ratio_count)
                          : 0.0) +
           "," + std::to_string(ratio_skipped) + "," +
           fmt_double(t_df_sum / denom) + "," + std::to_string(infeasible) +
           "," + std::to_string(fallbacks) + "\n";
  }
  write_text(out_csv, csv);
  if (samples_out.has_value()) write_text(*samples_out, per_sample);
}

void cmd_latency(const RunConfig& cfg, const std::filesystem::path& out_csv) {
  const int64_t beam_pairs = cfg.beam_pair_count();
  const latency::PipelineTiming& pt = cfg.kselect.pipeline;
  const latency::NrTiming& nt = cfg.kselect.nr;
  const double exhaustive = latency::t_nr(beam_pairs, nt);

  std::string csv = "k,t_sweep_ms,t_df_ms,t_nr_ms,efficiency,reduction\n";
  for (int64_t k = 1; k <= beam_pairs; ++k) {
    const double sweep = latency::t_sweep(k, nt);
    const double df = latency::t_df(k, pt, nt);
    const double efficiency =
        (cfg.kselect.t_total_ms - df) / cfg.kselect.t_total_ms;
    const double reduction = 1.0 - df / exhaustive;
    csv += std::to_string(k) + "," + fmt_double(sweep) + "," + fmt_double(df) +
           "," + fmt_double(exhaustive) + "," + fmt_double(efficiency) + "," +
           fmt_double(reduction) + "\n";
  }
  write_text(out_csv, csv);
}

void cmd_report(const RunConfig& cfg) {
  const std::filesystem::path out = cfg.out_dir;
  std::filesystem::create_directories(out);
  write_text(out / "config_echo.json", config_echo(cfg).dump(2) + "\n");

  const auto dataset_dir = out / "dataset";
  cmd_generate(cfg, dataset_dir);

  const auto ckpt_dir = out / "checkpoints";
  const auto reports = out / "reports";

  // Fusion model plus one model per modality.
  std::vector<std::pair<std::string, std::vector<neural::Modality>>> modes;
  modes.emplace_back("fusion", cfg.all_modalities());
  for (neural::Modality m : cfg.all_modalities()) {
    modes.emplace_back(neural::to_string(m),
                       std::vector<neural::Modality>{m});
  }

  for (const auto& [name, mods] : modes) {
    cmd_train(cfg, dataset_dir, mods, ckpt_dir / (name + ".json"),
              ckpt_dir / ("train_log_" + name + ".csv"));
    cmd_evaluate(cfg, dataset_dir, ckpt_dir / (name + ".json"), cfg.k_list,
                 reports / ("evaluate_" + name + ".csv"),
                 reports / ("eval_samples_" + name + ".jsonl"));
  }

  cmd_select_k(cfg, dataset_dir, ckpt_dir / "fusion.json", cfg.alpha_list,
               cfg.kselect.t_total_ms, reports / "select_k.csv",
               out / "tables" / "tables.json",
               reports / "select_k_samples.csv");
  cmd_latency(cfg, reports / "latency.csv");
}

ordered_json tables_to_json(const topk::EmpiricalTables& tables) {
  ordered_json j;
  j["format_version"] = 1;
  j["class_count"] = tables.class_count;
  j["sample_count"] = tables.sample_count;
  ordered_json per_k = ordered_json::array();
  for (int64_t k = 1; k <= tables.class_count; ++k) {
    const topk::KTable& t = tables.table(k);
    ordered_json entry;
    entry["k"] = k;
    entry["p"] = t.p;
    entry["all_c"] = t.all_c;
    entry["inc_c"] = t.inc_c;
    per_k.push_back(std::move(entry));
  }
  j["per_k"] = per_k;
  return j;
}

topk::EmpiricalTables tables_from_json(const json& j) {
  topk::EmpiricalTables tables;
  tables.class_count = j.at("class_count").get<int64_t>();
  tables.sample_count = j.at("sample_count").get<int64_t>();
  tables.per_k.resize(tables.class_count);
  for (const auto& entry : j.at("per_k")) {
    const int64_t k = entry.at("k").get<int64_t>();
    if (k < 1 || k > tables.class_count) {
      throw DataError("tables: k out of range");
    }
    topk::KTable& t = tables.per_k[k - 1];
    t.p = entry.at("p").get<double>();
    t.all_c = entry.at("all_c").get<std::vector<double>>();
    t.inc_c = entry.at("inc_c").get<std::vector<double>>();
  }
  return tables;
}

}  // namespace beamsim::harness
