#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "beamsim/config.hpp"
#include "beamsim/dataset.hpp"
#include "beamsim/metrics.hpp"
#include "beamsim/neural.hpp"
#include "beamsim/topk.hpp"

namespace beamsim::harness {

/// Builds one sample end to end: scene, sensors, preprocessing, labels.
SampleRecord build_sample(const RunConfig& cfg, uint64_t scene_id,
                          bool shifted_density);

/// Generates `cfg.samples` records in parallel and writes the dataset
/// (samples.jsonl + manifest.json) under dir. The test split is generated
/// with `traffic_density + test_density_shift` to mimic a harder regime.
Manifest cmd_generate(const RunConfig& cfg, const std::filesystem::path& dir);

/// Turns a stored record into model inputs for the given modality set.
neural::Sample record_to_sample(const RunConfig& cfg, const SampleRecord& rec,
                                const std::vector<neural::Modality>& mods);

std::vector<neural::Sample> build_samples(
    const RunConfig& cfg, std::span<const SampleRecord> records,
    const std::vector<neural::Modality>& mods);

struct TrainOutput {
  neural::TrainResult result;
  neural::ModelSpec spec;
};

/// Trains on the train+val splits of the dataset and writes the checkpoint
/// plus a per-epoch CSV log. `modalities` empty means "all in the profile";
/// `resume_from` continues a previous run from its embedded trainer state.
TrainOutput cmd_train(const RunConfig& cfg,
                      const std::filesystem::path& dataset_dir,
                      std::vector<neural::Modality> modalities,
                      const std::filesystem::path& checkpoint_path,
                      const std::filesystem::path& log_path,
                      const std::optional<std::filesystem::path>& resume_from =
                          std::nullopt);

/// Scores every record with the checkpointed model.
std::vector<metrics::EvalRecord> score_records(
    const RunConfig& cfg, const neural::Checkpoint& ckpt,
    std::span<const SampleRecord> records);

struct EvaluateSummary {
  double dist_max_abs_diff = 0.0;       // distributed vs centralized scores
  double roundtrip_max_abs_diff = 0.0;  // after payload encode/decode
  bool distributed_checked = false;
};

/// Metric report over the test split: one CSV row per K plus the
/// distributed-inference consistency check. Optionally dumps per-sample
/// scores as JSONL for independent recomputation.
EvaluateSummary cmd_evaluate(
    const RunConfig& cfg, const std::filesystem::path& dataset_dir,
    const std::filesystem::path& checkpoint_path,
    const std::vector<int64_t>& k_list, const std::filesystem::path& out_csv,
    const std::optional<std::filesystem::path>& dump_path = std::nullopt);

/// Builds empirical tables on the train split, then selects K per test
/// sample for every alpha. Writes one CSV row per alpha and optionally a
/// per-sample dump and the tables document.
void cmd_select_k(
    const RunConfig& cfg, const std::filesystem::path& dataset_dir,
    const std::filesystem::path& checkpoint_path,
    const std::vector<double>& alpha_list, double t_total_ms,
    const std::filesystem::path& out_csv,
    const std::optional<std::filesystem::path>& tables_out = std::nullopt,
    const std::optional<std::filesystem::path>& samples_out = std::nullopt);

/// Latency table for the profile: K, sweep, end-to-end, exhaustive baseline,
/// efficiency and relative reduction.
void cmd_latency(const RunConfig& cfg, const std::filesystem::path& out_csv);

/// Full pipeline: generate, train (fusion + per-modality), evaluate,
/// select-k, latency. Every artifact lands under cfg.out_dir.
void cmd_report(const RunConfig& cfg);

/// Serialization for empirical tables (kept with the pipeline so the topk
/// module stays free of file formats).
nlohmann::ordered_json tables_to_json(const topk::EmpiricalTables& tables);
topk::EmpiricalTables tables_from_json(const nlohmann::json& j);

/// Worker count: explicit config value, else BEAMSIM_WORKERS, else hardware.
int resolve_workers(const RunConfig& cfg);

}  // namespace beamsim::harness
