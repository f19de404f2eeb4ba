#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamsim/common.hpp"
#include "beamsim/rng.hpp"

namespace beamsim::neural {

enum class Modality : int { gps = 0, lidar = 1, image = 2 };

const char* to_string(Modality m);
Modality modality_from_string(const std::string& name);

/// Dense row-major tensor.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> shape_, std::vector<double> data_)
      : shape(std::move(shape_)), data(std::move(data_)) {}

  static Tensor zeros(std::vector<int64_t> shape);
  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty(); }
};

struct LayerDef {
  int64_t width = 0;
  double dropout = 0.0;  // applied after the hidden activation while training
};

/// Architecture description: per-modality extractors ending in a tanh latent
/// layer of width d, then a fusion head over the stacked latents.
struct ModelSpec {
  int64_t class_count = 0;
  int64_t latent_dim = 0;  // 0 means "use class_count"
  std::vector<Modality> modalities;
  std::array<int64_t, 3> input_dims{};  // flattened input size per modality
  std::array<std::vector<LayerDef>, 3> extractor_hidden;
  std::vector<LayerDef> fusion_hidden;

  int64_t d() const { return latent_dim > 0 ? latent_dim : class_count; }
  bool has(Modality m) const;
  void validate() const;
};

nlohmann::ordered_json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// All weights and biases as one flat vector, addressed through the layout.
struct Parameters {
  std::vector<double> values;
};

/// One dense layer's location inside the flat parameter vector. Weights are
/// stored input-major ([in][out]) so all-zero input rows can be skipped.
struct DenseSlice {
  int64_t in = 0;
  int64_t out = 0;
  size_t w_off = 0;
  size_t b_off = 0;
};

struct Layout {
  std::array<std::vector<DenseSlice>, 3> extractor;
  std::vector<DenseSlice> fusion;
  size_t param_count = 0;
};

Layout build_layout(const ModelSpec& spec);

/// Uniform(-a, a) init with a = sqrt(6 / (fan_in + fan_out)), zero biases.
Parameters init_parameters(const ModelSpec& spec, uint64_t seed);

struct LatentEmbedding {
  Modality modality = Modality::gps;
  std::vector<double> z;  // length d, every element in [-1, 1]
};

/// Model-facing training sample: flattened inputs per modality (inactive
/// modalities stay empty) plus the flattened true beam-pair index.
struct Sample {
  std::array<Tensor, 3> inputs;
  int64_t label = 0;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::array<double, 2> adam_betas{0.9, 0.999};
  double adam_epsilon = 1e-8;
  int64_t batch_size = 32;
  int64_t max_epochs = 100;
  int64_t early_stop_patience = 10;
  double l1_dense = 1e-5;
  double l2_dense = 1e-4;
  double val_fraction = 0.17;
  uint64_t rng_seed = 1;

  void validate() const;
};

/// Runs one modality's extractor: dense stack, ReLU hiddens, tanh output.
LatentEmbedding extract_features(const Parameters& params,
                                 const ModelSpec& spec, const Tensor& input,
                                 Modality modality);

/// Stacks latents row-wise into a (count, d) matrix; order must follow the
/// fixed modality order.
Tensor stack_latents(std::span<const LatentEmbedding> latents);

/// Three-modality stack in fixed (gps, lidar, image) order.
Tensor fuse(const LatentEmbedding& z_gps, const LatentEmbedding& z_lidar,
            const LatentEmbedding& z_image);

/// Appends one latent row to an existing (k, d) stack.
Tensor append_latent(const Tensor& stacked, const LatentEmbedding& latent);

/// Fusion head over the stacked latents; softmax output.
/// Throws NumericError naming the layer if an intermediate is non-finite.
ScoreVector fusion_forward(const Parameters& params, const ModelSpec& spec,
                           const Tensor& stacked);

/// Full pipeline for one sample: extract per modality, stack, fuse.
ScoreVector predict(const Parameters& params, const ModelSpec& spec,
                    const Sample& sample);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean cross-entropy over the batch plus L1/L2 penalties on dense weights,
/// with the full analytic gradient. `dropout_rng` enables dropout masks;
/// evaluation without it is deterministic.
LossGrad loss_and_grad(const Parameters& params, const ModelSpec& spec,
                       std::span<const Sample> batch, const TrainConfig& cfg,
                       Rng* dropout_rng = nullptr);

struct EpochRow {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
};

struct TrainResult {
  Parameters params;  // best-validation parameters
  std::vector<EpochRow> log;
  int64_t best_epoch = 0;
  double best_val_top1 = 0.0;
};

/// Adam trainer with early stopping on validation top-1. All state needed to
/// resume bit-exactly can be serialized and restored.
class Trainer {
 public:
  Trainer(ModelSpec spec, TrainConfig cfg);

  nlohmann::json state() const;
  void restore(const nlohmann::json& state);

  /// Runs epochs until max_epochs or early stop; returns the accumulated log
  /// and the best-validation parameters (last parameters when `val` is
  /// empty, in which case the logged top-1 is measured on `train`).
  TrainResult run(std::span<const Sample> train, std::span<const Sample> val);

  const ModelSpec& spec() const { return spec_; }

 private:
  void adam_step(std::span<const double> grad);

  ModelSpec spec_;
  TrainConfig cfg_;
  Layout layout_;
  Parameters params_;
  std::vector<double> adam_m_;
  std::vector<double> adam_v_;
  int64_t adam_t_ = 0;
  int64_t next_epoch_ = 1;
  Parameters best_params_;
  double best_metric_ = -1.0;
  int64_t best_epoch_ = 0;
  int64_t epochs_since_improve_ = 0;
  std::vector<EpochRow> log_;
};

/// Splits off the trailing `val_fraction` of `dataset` as validation and
/// trains a fresh model. Deterministic in cfg.rng_seed.
TrainResult train(std::span<const Sample> dataset, const ModelSpec& spec,
                  const TrainConfig& cfg);

/// Latents computed on the vehicle: (2, d) stack of the GPS and LiDAR
/// embeddings, ready for serialization toward the MEC.
Tensor vehicle_side_features(const Parameters& params, const ModelSpec& spec,
                             const Tensor& gps, const Tensor& voxels);

/// MEC-side completion: appends the locally computed image latent (when the
/// model has an image branch) and runs the fusion head.
ScoreVector mec_side_predict(const Parameters& params, const ModelSpec& spec,
                             const Tensor& partial_stack,
                             const Tensor* image_input);

/// Wire format for latent stacks: u32 d, u32 modality count, u64 element
/// count, then little-endian 64-bit floats.
std::vector<uint8_t> encode_latents(const Tensor& stacked);
Tensor decode_latents(std::span<const uint8_t> bytes);

/// Checkpoint document: spec echo, seed, per-layer weight arrays and the
/// optional serialized trainer state for resuming.
struct Checkpoint {
  ModelSpec spec;
  uint64_t seed = 0;
  Parameters params;
  nlohmann::json trainer_state;
};

nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace beamsim::neural
