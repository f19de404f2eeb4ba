#include "beamsim/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace beamsim::neural {

namespace {

constexpr uint64_t kInitTag = 11;
constexpr uint64_t kShuffleTag = 12;
constexpr uint64_t kDropoutTag = 13;

constexpr std::array<Modality, 3> kModalityOrder{
    Modality::gps, Modality::lidar, Modality::image};

int idx(Modality m) { return static_cast<int>(m); }

// y = W^T x + b with W stored input-major; all-zero input rows are skipped.
void dense_forward(const double* w, const double* b, const double* x,
                   double* y, int64_t in, int64_t out) {
  std::copy(b, b + out, y);
  for (int64_t i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = w + i * out;
    for (int64_t o = 0; o < out; ++o) y[o] += xi * row[o];
  }
}

// Accumulates dW/db and (optionally) writes the input gradient.
void dense_backward(const double* w, const double* x, const double* dy,
                    double* dw, double* db, double* dx, int64_t in,
                    int64_t out) {
  for (int64_t o = 0; o < out; ++o) db[o] += dy[o];
  for (int64_t i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi != 0.0) {
      double* dwrow = dw + i * out;
      for (int64_t o = 0; o < out; ++o) dwrow[o] += xi * dy[o];
    }
    if (dx != nullptr) {
      const double* wrow = w + i * out;
      double acc = 0.0;
      for (int64_t o = 0; o < out; ++o) acc += wrow[o] * dy[o];
      dx[i] = acc;
    }
  }
}

void softmax_inplace(std::vector<double>& v) {
  const double peak = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - peak);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// Activations kept per layer; dropout is folded into the stored activation
// (zeroed units carry zero, surviving units are pre-scaled by 1/(1-p)).
struct Workspace {
  std::array<std::vector<std::vector<double>>, 3> ext_acts;
  std::vector<double> concat;
  std::vector<std::vector<double>> fus_acts;
  std::vector<double> probs;
  std::vector<double> dbuf_a;
  std::vector<double> dbuf_b;
};

Workspace make_workspace(const ModelSpec& spec, const Layout& layout) {
  Workspace ws;
  size_t max_width = 1;
  for (Modality m : spec.modalities) {
    auto& acts = ws.ext_acts[idx(m)];
    for (const DenseSlice& slice : layout.extractor[idx(m)]) {
      acts.emplace_back(slice.out);
      max_width = std::max(max_width, static_cast<size_t>(slice.out));
      max_width = std::max(max_width, static_cast<size_t>(slice.in));
    }
  }
  ws.concat.resize(spec.modalities.size() * spec.d());
  for (const DenseSlice& slice : layout.fusion) {
    ws.fus_acts.emplace_back(slice.out);
    max_width = std::max(max_width, static_cast<size_t>(slice.out));
    max_width = std::max(max_width, static_cast<size_t>(slice.in));
  }
  ws.probs.resize(spec.class_count);
  ws.dbuf_a.resize(max_width);
  ws.dbuf_b.resize(max_width);
  return ws;
}

double dropout_rate(const ModelSpec& spec, Modality m, size_t layer) {
  return spec.extractor_hidden[idx(m)][layer].dropout;
}

// Hidden activation: ReLU, then (while training) inverted dropout.
void apply_hidden(std::vector<double>& a, double rate, Rng* rng) {
  for (double& x : a) x = x > 0.0 ? x : 0.0;
  if (rng != nullptr && rate > 0.0) {
    const double scale = 1.0 / (1.0 - rate);
    for (double& x : a) {
      if (rng->uniform() < rate) {
        x = 0.0;
      } else {
        x *= scale;
      }
    }
  }
}

// Forward one sample through every active extractor and the fusion head.
void forward_sample(const Parameters& params, const ModelSpec& spec,
                    const Layout& layout, const Sample& sample, Workspace& ws,
                    Rng* dropout_rng) {
  for (Modality m : spec.modalities) {
    const Tensor& input = sample.inputs[idx(m)];
    if (input.size() != spec.input_dims[idx(m)]) {
      throw std::invalid_argument(std::string("forward: bad input size for ") +
                                  to_string(m));
    }
    const auto& slices = layout.extractor[idx(m)];
    auto& acts = ws.ext_acts[idx(m)];
    const double* x = input.data.data();
    for (size_t j = 0; j < slices.size(); ++j) {
      const DenseSlice& sl = slices[j];
      dense_forward(params.values.data() + sl.w_off,
                    params.values.data() + sl.b_off, x, acts[j].data(), sl.in,
                    sl.out);
      if (j + 1 < slices.size()) {
        apply_hidden(acts[j], dropout_rate(spec, m, j), dropout_rng);
      } else {
        for (double& v : acts[j]) v = std::tanh(v);
      }
      x = acts[j].data();
    }
  }

  double* concat = ws.concat.data();
  for (Modality m : spec.modalities) {
    const auto& latent = ws.ext_acts[idx(m)].back();
    concat = std::copy(latent.begin(), latent.end(), concat);
  }

  const double* x = ws.concat.data();
  for (size_t j = 0; j < layout.fusion.size(); ++j) {
    const DenseSlice& sl = layout.fusion[j];
    dense_forward(params.values.data() + sl.w_off,
                  params.values.data() + sl.b_off, x, ws.fus_acts[j].data(),
                  sl.in, sl.out);
    if (j + 1 < layout.fusion.size()) {
      apply_hidden(ws.fus_acts[j], spec.fusion_hidden[j].dropout, dropout_rng);
    }
    x = ws.fus_acts[j].data();
  }
  ws.probs = ws.fus_acts.back();
  softmax_inplace(ws.probs);
}

// Backward for the sample most recently run through forward_sample with the
// same workspace. Accumulates raw (unscaled) gradients.
void backward_sample(const Parameters& params, const ModelSpec& spec,
                     const Layout& layout, const Sample& sample, Workspace& ws,
                     std::vector<double>& grad) {
  // d(loss)/d(logits) for cross-entropy with softmax.
  std::vector<double>& dy = ws.dbuf_a;
  std::vector<double>& dx = ws.dbuf_b;
  std::copy(ws.probs.begin(), ws.probs.end(), dy.begin());
  dy[sample.label] -= 1.0;

  for (size_t j = layout.fusion.size(); j-- > 0;) {
    const DenseSlice& sl = layout.fusion[j];
    const double* x =
        j == 0 ? ws.concat.data() : ws.fus_acts[j - 1].data();
    dense_backward(params.values.data() + sl.w_off, x, dy.data(),
                   grad.data() + sl.w_off, grad.data() + sl.b_off, dx.data(),
                   sl.in, sl.out);
    if (j > 0) {
      const double rate = spec.fusion_hidden[j - 1].dropout;
      const double scale = rate > 0.0 ? 1.0 / (1.0 - rate) : 1.0;
      const std::vector<double>& a = ws.fus_acts[j - 1];
      for (int64_t i = 0; i < sl.in; ++i) {
        dx[i] = a[i] > 0.0 ? dx[i] * scale : 0.0;
      }
    }
    std::swap(dy, dx);
  }

  // Split the concat gradient back into the per-modality latents.
  const int64_t d = spec.d();
  std::vector<double> dconcat(dy.begin(),
                              dy.begin() + spec.modalities.size() * d);
  for (size_t mi = spec.modalities.size(); mi-- > 0;) {
    const Modality m = spec.modalities[mi];
    const auto& slices = layout.extractor[idx(m)];
    const auto& acts = ws.ext_acts[idx(m)];

    std::copy(dconcat.begin() + mi * d, dconcat.begin() + (mi + 1) * d,
              dy.begin());
    // Through the tanh latent layer.
    const std::vector<double>& latent = acts.back();
    for (int64_t i = 0; i < d; ++i) dy[i] *= 1.0 - latent[i] * latent[i];

    for (size_t j = slices.size(); j-- > 0;) {
      const DenseSlice& sl = slices[j];
      const double* x = j == 0 ? sample.inputs[idx(m)].data.data()
                               : acts[j - 1].data();
      dense_backward(params.values.data() + sl.w_off, x, dy.data(),
                     grad.data() + sl.w_off, grad.data() + sl.b_off,
                     j == 0 ? nullptr : dx.data(), sl.in, sl.out);
      if (j > 0) {
        const double rate = dropout_rate(spec, m, j - 1);
        const double scale = rate > 0.0 ? 1.0 / (1.0 - rate) : 1.0;
        const std::vector<double>& a = acts[j - 1];
        for (int64_t i = 0; i < sl.in; ++i) {
          dx[i] = a[i] > 0.0 ? dx[i] * scale : 0.0;
        }
        std::swap(dy, dx);
      }
    }
  }
}

void check_sample(const ModelSpec& spec, const Sample& sample) {
  if (sample.label < 0 || sample.label >= spec.class_count) {
    throw std::invalid_argument("sample label out of range");
  }
}

// Shared core of loss_and_grad and the training loop; `grad` is zeroed here.
double batch_loss_and_grad(const Parameters& params, const ModelSpec& spec,
                           const Layout& layout,
                           std::span<const Sample* const> batch,
                           const TrainConfig& cfg, Rng* dropout_rng,
                           Workspace& ws, std::vector<double>& grad) {
  grad.assign(layout.param_count, 0.0);
  double ce_sum = 0.0;
  for (const Sample* sample : batch) {
    check_sample(spec, *sample);
    forward_sample(params, spec, layout, *sample, ws, dropout_rng);
    ce_sum += -std::log(std::max(ws.probs[sample->label], 1e-300));
    backward_sample(params, spec, layout, *sample, ws, grad);
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv_n;
  double loss = ce_sum * inv_n;

  // L1/L2 penalties on every dense weight matrix (biases excluded).
  auto regularize = [&](const DenseSlice& sl) {
    for (int64_t i = 0; i < sl.in * sl.out; ++i) {
      const double w = params.values[sl.w_off + i];
      loss += cfg.l1_dense * std::abs(w) + cfg.l2_dense * w * w;
      const double sign = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
      grad[sl.w_off + i] += cfg.l1_dense * sign + 2.0 * cfg.l2_dense * w;
    }
  };
  for (Modality m : spec.modalities) {
    for (const DenseSlice& sl : layout.extractor[idx(m)]) regularize(sl);
  }
  for (const DenseSlice& sl : layout.fusion) regularize(sl);
  return loss;
}

double top1_accuracy(const Parameters& params, const ModelSpec& spec,
                     const Layout& layout, std::span<const Sample> samples,
                     Workspace& ws) {
  int64_t hits = 0;
  for (const Sample& sample : samples) {
    forward_sample(params, spec, layout, sample, ws, nullptr);
    const int64_t pred =
        std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin();
    if (pred == sample.label) ++hits;
  }
  return samples.empty()
             ? 0.0
             : static_cast<double>(hits) / static_cast<double>(samples.size());
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(std::span<const uint8_t> b, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[off + i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::span<const uint8_t> b, size_t off) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[off + i]) << (8 * i);
  return v;
}

nlohmann::ordered_json layers_to_json(const LayerDef& layer) {
  return {{"width", layer.width}, {"dropout", layer.dropout}};
}

LayerDef layer_from_json(const nlohmann::json& j) {
  return {j.at("width").get<int64_t>(), j.at("dropout").get<double>()};
}

}  // namespace

const char* to_string(Modality m) {
  switch (m) {
    case Modality::gps:
      return "gps";
    case Modality::lidar:
      return "lidar";
    case Modality::image:
      return "image";
  }
  return "?";
}

Modality modality_from_string(const std::string& name) {
  if (name == "gps") return Modality::gps;
  if (name == "lidar") return Modality::lidar;
  if (name == "image") return Modality::image;
  throw DataError("unknown modality: " + name);
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  int64_t n = 1;
  for (int64_t s : shape) n *= s;
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

bool ModelSpec::has(Modality m) const {
  return std::find(modalities.begin(), modalities.end(), m) !=
         modalities.end();
}

void ModelSpec::validate() const {
  if (class_count < 1) throw ConfigError("model: class_count must be >= 1");
  if (latent_dim < 0) throw ConfigError("model: latent_dim must be >= 0");
  if (modalities.empty()) throw ConfigError("model: no modalities");
  if (!std::is_sorted(modalities.begin(), modalities.end()) ||
      std::adjacent_find(modalities.begin(), modalities.end()) !=
          modalities.end()) {
    throw ConfigError("model: modalities must be unique and ordered");
  }
  for (Modality m : modalities) {
    if (input_dims[idx(m)] < 1) {
      throw ConfigError(std::string("model: missing input size for ") +
                        to_string(m));
    }
    for (const LayerDef& layer : extractor_hidden[idx(m)]) {
      if (layer.width < 1) throw ConfigError("model: hidden width < 1");
      if (layer.dropout < 0 || layer.dropout >= 1) {
        throw ConfigError("model: dropout must be in [0, 1)");
      }
    }
  }
  for (const LayerDef& layer : fusion_hidden) {
    if (layer.width < 1) throw ConfigError("model: hidden width < 1");
    if (layer.dropout < 0 || layer.dropout >= 1) {
      throw ConfigError("model: dropout must be in [0, 1)");
    }
  }
}

nlohmann::ordered_json spec_to_json(const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["class_count"] = spec.class_count;
  j["latent_dim"] = spec.latent_dim;
  nlohmann::ordered_json mods = nlohmann::ordered_json::array();
  for (Modality m : spec.modalities) mods.push_back(to_string(m));
  j["modalities"] = mods;
  j["input_dims"] = spec.input_dims;
  nlohmann::ordered_json hidden;
  for (Modality m : kModalityOrder) {
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const LayerDef& layer : spec.extractor_hidden[idx(m)]) {
      layers.push_back(layers_to_json(layer));
    }
    hidden[to_string(m)] = layers;
  }
  j["extractor_hidden"] = hidden;
  nlohmann::ordered_json fusion = nlohmann::ordered_json::array();
  for (const LayerDef& layer : spec.fusion_hidden) {
    fusion.push_back(layers_to_json(layer));
  }
  j["fusion_hidden"] = fusion;
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.class_count = j.at("class_count").get<int64_t>();
  spec.latent_dim = j.at("latent_dim").get<int64_t>();
  for (const auto& name : j.at("modalities")) {
    spec.modalities.push_back(modality_from_string(name.get<std::string>()));
  }
  const auto dims = j.at("input_dims");
  for (int i = 0; i < 3; ++i) spec.input_dims[i] = dims.at(i).get<int64_t>();
  for (Modality m : kModalityOrder) {
    for (const auto& layer : j.at("extractor_hidden").at(to_string(m))) {
      spec.extractor_hidden[idx(m)].push_back(layer_from_json(layer));
    }
  }
  for (const auto& layer : j.at("fusion_hidden")) {
    spec.fusion_hidden.push_back(layer_from_json(layer));
  }
  spec.validate();
  return spec;
}

Layout build_layout(const ModelSpec& spec) {
  spec.validate();
  Layout layout;
  size_t offset = 0;
  auto add_slice = [&](std::vector<DenseSlice>& dst, int64_t in, int64_t out) {
    DenseSlice sl;
    sl.in = in;
    sl.out = out;
    sl.w_off = offset;
    offset += static_cast<size_t>(in * out);
    sl.b_off = offset;
    offset += static_cast<size_t>(out);
    dst.push_back(sl);
  };

  for (Modality m : spec.modalities) {
    int64_t in = spec.input_dims[idx(m)];
    for (const LayerDef& layer : spec.extractor_hidden[idx(m)]) {
      add_slice(layout.extractor[idx(m)], in, layer.width);
      in = layer.width;
    }
    add_slice(layout.extractor[idx(m)], in, spec.d());
  }

  int64_t in = static_cast<int64_t>(spec.modalities.size()) * spec.d();
  for (const LayerDef& layer : spec.fusion_hidden) {
    add_slice(layout.fusion, in, layer.width);
    in = layer.width;
  }
  add_slice(layout.fusion, in, spec.class_count);

  layout.param_count = offset;
  return layout;
}

Parameters init_parameters(const ModelSpec& spec, uint64_t seed) {
  const Layout layout = build_layout(spec);
  Parameters params;
  params.values.assign(layout.param_count, 0.0);
  Rng rng = Rng::stream(seed, 0, kInitTag);

  auto fill = [&](const DenseSlice& sl) {
    const double a =
        std::sqrt(6.0 / static_cast<double>(sl.in + sl.out));
    for (int64_t i = 0; i < sl.in * sl.out; ++i) {
      params.values[sl.w_off + i] = rng.uniform(-a, a);
    }
  };
  for (Modality m : spec.modalities) {
    for (const DenseSlice& sl : layout.extractor[idx(m)]) fill(sl);
  }
  for (const DenseSlice& sl : layout.fusion) fill(sl);
  return params;
}

LatentEmbedding extract_features(const Parameters& params,
                                 const ModelSpec& spec, const Tensor& input,
                                 Modality modality) {
  if (!spec.has(modality)) {
    throw std::invalid_argument(std::string("extract_features: model has no ") +
                                to_string(modality) + " branch");
  }
  if (input.size() != spec.input_dims[idx(modality)]) {
    throw std::invalid_argument("extract_features: input size mismatch");
  }
  const Layout layout = build_layout(spec);
  if (params.values.size() != layout.param_count) {
    throw std::invalid_argument("extract_features: parameter size mismatch");
  }

  const auto& slices = layout.extractor[idx(modality)];
  std::vector<double> x = input.data;
  std::vector<double> y;
  for (size_t j = 0; j < slices.size(); ++j) {
    const DenseSlice& sl = slices[j];
    y.assign(sl.out, 0.0);
    dense_forward(params.values.data() + sl.w_off,
                  params.values.data() + sl.b_off, x.data(), y.data(), sl.in,
                  sl.out);
    if (j + 1 < slices.size()) {
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    } else {
      for (double& v : y) v = std::tanh(v);
    }
    x = y;
  }
  return {modality, std::move(x)};
}

Tensor stack_latents(std::span<const LatentEmbedding> latents) {
  if (latents.empty()) throw std::invalid_argument("stack_latents: empty");
  const int64_t d = static_cast<int64_t>(latents.front().z.size());
  Tensor out;
  out.shape = {static_cast<int64_t>(latents.size()), d};
  out.data.reserve(latents.size() * d);
  for (size_t i = 0; i < latents.size(); ++i) {
    if (static_cast<int64_t>(latents[i].z.size()) != d) {
      throw std::invalid_argument("stack_latents: latent length mismatch");
    }
    if (i > 0 && latents[i].modality <= latents[i - 1].modality) {
      throw std::invalid_argument("stack_latents: modality order violated");
    }
    out.data.insert(out.data.end(), latents[i].z.begin(), latents[i].z.end());
  }
  return out;
}

Tensor fuse(const LatentEmbedding& z_gps, const LatentEmbedding& z_lidar,
            const LatentEmbedding& z_image) {
  const LatentEmbedding latents[3] = {z_gps, z_lidar, z_image};
  return stack_latents(latents);
}

Tensor append_latent(const Tensor& stacked, const LatentEmbedding& latent) {
  if (stacked.shape.size() != 2 ||
      stacked.shape[1] != static_cast<int64_t>(latent.z.size())) {
    throw std::invalid_argument("append_latent: shape mismatch");
  }
  Tensor out = stacked;
  out.shape[0] += 1;
  out.data.insert(out.data.end(), latent.z.begin(), latent.z.end());
  return out;
}

ScoreVector fusion_forward(const Parameters& params, const ModelSpec& spec,
                           const Tensor& stacked) {
  const Layout layout = build_layout(spec);
  if (params.values.size() != layout.param_count) {
    throw std::invalid_argument("fusion_forward: parameter size mismatch");
  }
  if (stacked.shape.size() != 2 ||
      stacked.shape[0] != static_cast<int64_t>(spec.modalities.size()) ||
      stacked.shape[1] != spec.d()) {
    throw std::invalid_argument("fusion_forward: stacked latents must be " +
                                std::to_string(spec.modalities.size()) + " x " +
                                std::to_string(spec.d()));
  }

  std::vector<double> x = stacked.data;
  std::vector<double> y;
  for (size_t j = 0; j < layout.fusion.size(); ++j) {
    const DenseSlice& sl = layout.fusion[j];
    y.assign(sl.out, 0.0);
    dense_forward(params.values.data() + sl.w_off,
                  params.values.data() + sl.b_off, x.data(), y.data(), sl.in,
                  sl.out);
    if (!all_finite(y)) {
      throw NumericError("fusion layer " + std::to_string(j) +
                         " produced a non-finite value");
    }
    if (j + 1 < layout.fusion.size()) {
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    }
    x = y;
  }
  softmax_inplace(x);
  return x;
}

ScoreVector predict(const Parameters& params, const ModelSpec& spec,
                    const Sample& sample) {
  std::vector<LatentEmbedding> latents;
  latents.reserve(spec.modalities.size());
  for (Modality m : spec.modalities) {
    latents.push_back(
        extract_features(params, spec, sample.inputs[idx(m)], m));
  }
  return fusion_forward(params, spec, stack_latents(latents));
}

void TrainConfig::validate() const {
  if (learning_rate < 0) throw ConfigError("train: learning_rate < 0");
  if (batch_size < 1) throw ConfigError("train: batch_size < 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs < 1");
  if (early_stop_patience < 1) throw ConfigError("train: patience < 1");
  if (l1_dense < 0 || l2_dense < 0) throw ConfigError("train: negative reg");
  if (val_fraction < 0 || val_fraction >= 1) {
    throw ConfigError("train: val_fraction must be in [0, 1)");
  }
}

LossGrad loss_and_grad(const Parameters& params, const ModelSpec& spec,
                       std::span<const Sample> batch, const TrainConfig& cfg,
                       Rng* dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const Layout layout = build_layout(spec);
  if (params.values.size() != layout.param_count) {
    throw std::invalid_argument("loss_and_grad: parameter size mismatch");
  }

  Workspace ws = make_workspace(spec, layout);
  std::vector<const Sample*> ptrs;
  ptrs.reserve(batch.size());
  for (const Sample& sample : batch) ptrs.push_back(&sample);

  LossGrad out;
  out.loss = batch_loss_and_grad(params, spec, layout, ptrs, cfg, dropout_rng,
                                 ws, out.grad);
  return out;
}

Trainer::Trainer(ModelSpec spec, TrainConfig cfg)
    : spec_(std::move(spec)), cfg_(cfg), layout_(build_layout(spec_)) {
  cfg_.validate();
  params_ = init_parameters(spec_, cfg_.rng_seed);
  adam_m_.assign(layout_.param_count, 0.0);
  adam_v_.assign(layout_.param_count, 0.0);
}

nlohmann::json Trainer::state() const {
  nlohmann::json j;
  j["params"] = params_.values;
  j["adam_m"] = adam_m_;
  j["adam_v"] = adam_v_;
  j["adam_t"] = adam_t_;
  j["next_epoch"] = next_epoch_;
  j["best_params"] = best_params_.values;
  j["best_metric"] = best_metric_;
  j["best_epoch"] = best_epoch_;
  j["epochs_since_improve"] = epochs_since_improve_;
  nlohmann::json log = nlohmann::json::array();
  for (const EpochRow& row : log_) {
    log.push_back({{"epoch", row.epoch},
                   {"train_loss", row.train_loss},
                   {"val_top1", row.val_top1}});
  }
  j["log"] = log;
  return j;
}

void Trainer::restore(const nlohmann::json& state) {
  const auto vec = [&](const char* key) {
    return state.at(key).get<std::vector<double>>();
  };
  params_.values = vec("params");
  adam_m_ = vec("adam_m");
  adam_v_ = vec("adam_v");
  if (params_.values.size() != layout_.param_count ||
      adam_m_.size() != layout_.param_count ||
      adam_v_.size() != layout_.param_count) {
    throw DataError("trainer state does not match the model layout");
  }
  adam_t_ = state.at("adam_t").get<int64_t>();
  next_epoch_ = state.at("next_epoch").get<int64_t>();
  best_params_.values = vec("best_params");
  best_metric_ = state.at("best_metric").get<double>();
  best_epoch_ = state.at("best_epoch").get<int64_t>();
  epochs_since_improve_ = state.at("epochs_since_improve").get<int64_t>();
  log_.clear();
  for (const auto& row : state.at("log")) {
    log_.push_back({row.at("epoch").get<int64_t>(),
                    row.at("train_loss").get<double>(),
                    row.at("val_top1").get<double>()});
  }
}

void Trainer::adam_step(std::span<const double> grad) {
  ++adam_t_;
  const double b1 = cfg_.adam_betas[0];
  const double b2 = cfg_.adam_betas[1];
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
  for (size_t i = 0; i < grad.size(); ++i) {
    adam_m_[i] = b1 * adam_m_[i] + (1.0 - b1) * grad[i];
    adam_v_[i] = b2 * adam_v_[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = adam_m_[i] / corr1;
    const double v_hat = adam_v_[i] / corr2;
    params_.values[i] -=
        cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.adam_epsilon);
  }
}

TrainResult Trainer::run(std::span<const Sample> train,
                         std::span<const Sample> val) {
  if (train.empty()) throw std::invalid_argument("train: empty training split");

  Workspace ws = make_workspace(spec_, layout_);
  std::vector<size_t> order(train.size());

  const bool use_dropout = [&] {
    for (Modality m : spec_.modalities) {
      for (const LayerDef& l : spec_.extractor_hidden[idx(m)]) {
        if (l.dropout > 0) return true;
      }
    }
    for (const LayerDef& l : spec_.fusion_hidden) {
      if (l.dropout > 0) return true;
    }
    return false;
  }();

  for (; next_epoch_ <= cfg_.max_epochs; ++next_epoch_) {
    const int64_t epoch = next_epoch_;
    Rng shuffle_rng = Rng::stream(cfg_.rng_seed, epoch, kShuffleTag);
    Rng dropout_rng = Rng::stream(cfg_.rng_seed, epoch, kDropoutTag);

    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    }

    double loss_sum = 0.0;
    std::vector<const Sample*> batch;
    std::vector<double> grad;
    for (size_t begin = 0; begin < order.size();
         begin += cfg_.batch_size) {
      const size_t end =
          std::min(begin + static_cast<size_t>(cfg_.batch_size), order.size());
      batch.clear();
      for (size_t i = begin; i < end; ++i) batch.push_back(&train[order[i]]);
      const double loss =
          batch_loss_and_grad(params_, spec_, layout_, batch, cfg_,
                              use_dropout ? &dropout_rng : nullptr, ws, grad);
      loss_sum += loss * static_cast<double>(batch.size());
      adam_step(grad);
    }

    const double train_loss = loss_sum / static_cast<double>(train.size());
    const double metric = val.empty()
                              ? top1_accuracy(params_, spec_, layout_, train, ws)
                              : top1_accuracy(params_, spec_, layout_, val, ws);
    log_.push_back({epoch, train_loss, metric});

    if (metric > best_metric_) {
      best_metric_ = metric;
      best_epoch_ = epoch;
      best_params_ = params_;
      epochs_since_improve_ = 0;
    } else {
      ++epochs_since_improve_;
    }
    if (!val.empty() && epochs_since_improve_ >= cfg_.early_stop_patience) {
      ++next_epoch_;
      break;
    }
  }

  TrainResult result;
  result.params = val.empty() ? params_ : best_params_;
  if (result.params.values.empty()) result.params = params_;
  result.log = log_;
  result.best_epoch = best_epoch_;
  result.best_val_top1 = best_metric_;
  return result;
}

TrainResult train(std::span<const Sample> dataset, const ModelSpec& spec,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const auto n = static_cast<int64_t>(dataset.size());
  const auto n_val = static_cast<int64_t>(
      std::llround(cfg.val_fraction * static_cast<double>(n)));
  if (n - n_val < 1) throw std::invalid_argument("train: empty training split");

  Trainer trainer(spec, cfg);
  return trainer.run(dataset.subspan(0, n - n_val), dataset.subspan(n - n_val));
}

Tensor vehicle_side_features(const Parameters& params, const ModelSpec& spec,
                             const Tensor& gps, const Tensor& voxels) {
  const LatentEmbedding latents[2] = {
      extract_features(params, spec, gps, Modality::gps),
      extract_features(params, spec, voxels, Modality::lidar)};
  return stack_latents(latents);
}

ScoreVector mec_side_predict(const Parameters& params, const ModelSpec& spec,
                             const Tensor& partial_stack,
                             const Tensor* image_input) {
  if (spec.has(Modality::image)) {
    if (image_input == nullptr) {
      throw std::invalid_argument("mec_side_predict: image input required");
    }
    const LatentEmbedding z_image =
        extract_features(params, spec, *image_input, Modality::image);
    return fusion_forward(params, spec, append_latent(partial_stack, z_image));
  }
  return fusion_forward(params, spec, partial_stack);
}

std::vector<uint8_t> encode_latents(const Tensor& stacked) {
  if (stacked.shape.size() != 2) {
    throw std::invalid_argument("encode_latents: expected a 2-D stack");
  }
  std::vector<uint8_t> buf;
  buf.reserve(16 + stacked.data.size() * 8);
  put_u32(buf, static_cast<uint32_t>(stacked.shape[1]));  // d
  put_u32(buf, static_cast<uint32_t>(stacked.shape[0]));  // modality count
  put_u64(buf, static_cast<uint64_t>(stacked.data.size()));
  for (double v : stacked.data) put_u64(buf, std::bit_cast<uint64_t>(v));
  return buf;
}

Tensor decode_latents(std::span<const uint8_t> bytes) {
  if (bytes.size() < 16) throw DataError("latent payload truncated");
  const uint32_t d = get_u32(bytes, 0);
  const uint32_t count = get_u32(bytes, 4);
  const uint64_t elements = get_u64(bytes, 8);
  if (elements != static_cast<uint64_t>(d) * count ||
      bytes.size() != 16 + elements * 8) {
    throw DataError("latent payload has inconsistent sizes");
  }
  Tensor out;
  out.shape = {static_cast<int64_t>(count), static_cast<int64_t>(d)};
  out.data.resize(elements);
  for (uint64_t i = 0; i < elements; ++i) {
    out.data[i] = std::bit_cast<double>(get_u64(bytes, 16 + i * 8));
  }
  return out;
}

nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt) {
  const Layout layout = build_layout(ckpt.spec);
  if (ckpt.params.values.size() != layout.param_count) {
    throw std::invalid_argument("checkpoint: parameter size mismatch");
  }

  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["seed"] = ckpt.seed;
  j["spec"] = spec_to_json(ckpt.spec);

  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  auto dump_slice = [&](const std::string& name, const DenseSlice& sl) {
    nlohmann::ordered_json layer;
    layer["name"] = name;
    layer["in"] = sl.in;
    layer["out"] = sl.out;
    layer["w"] = std::vector<double>(
        ckpt.params.values.begin() + sl.w_off,
        ckpt.params.values.begin() + sl.w_off + sl.in * sl.out);
    layer["b"] = std::vector<double>(
        ckpt.params.values.begin() + sl.b_off,
        ckpt.params.values.begin() + sl.b_off + sl.out);
    layers.push_back(std::move(layer));
  };
  for (Modality m : ckpt.spec.modalities) {
    const auto& slices = layout.extractor[idx(m)];
    for (size_t i = 0; i < slices.size(); ++i) {
      dump_slice(std::string(to_string(m)) + "." + std::to_string(i),
                 slices[i]);
    }
  }
  for (size_t i = 0; i < layout.fusion.size(); ++i) {
    dump_slice("fusion." + std::to_string(i), layout.fusion[i]);
  }
  j["layers"] = layers;
  if (!ckpt.trainer_state.is_null()) j["trainer_state"] = ckpt.trainer_state;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint ckpt;
  ckpt.seed = j.at("seed").get<uint64_t>();
  ckpt.spec = spec_from_json(j.at("spec"));
  const Layout layout = build_layout(ckpt.spec);
  ckpt.params.values.assign(layout.param_count, 0.0);

  std::vector<const DenseSlice*> order;
  for (Modality m : ckpt.spec.modalities) {
    for (const DenseSlice& sl : layout.extractor[idx(m)]) order.push_back(&sl);
  }
  for (const DenseSlice& sl : layout.fusion) order.push_back(&sl);

  const auto& layers = j.at("layers");
  if (layers.size() != order.size()) {
    throw DataError("checkpoint layer count does not match the spec");
  }
  for (size_t i = 0; i < order.size(); ++i) {
    const DenseSlice& sl = *order[i];
    const auto w = layers[i].at("w").get<std::vector<double>>();
    const auto b = layers[i].at("b").get<std::vector<double>>();
    if (static_cast<int64_t>(w.size()) != sl.in * sl.out ||
        static_cast<int64_t>(b.size()) != sl.out) {
      throw DataError("checkpoint layer shape does not match the spec");
    }
    std::copy(w.begin(), w.end(), ckpt.params.values.begin() + sl.w_off);
    std::copy(b.begin(), b.end(), ckpt.params.values.begin() + sl.b_off);
  }
  if (j.contains("trainer_state")) ckpt.trainer_state = j.at("trainer_state");
  return ckpt;
}

}  // namespace beamsim::neural
