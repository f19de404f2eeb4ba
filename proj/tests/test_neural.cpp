#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>

#include "beamsim/neural.hpp"
#include "beamsim/rng.hpp"

using namespace beamsim;
using namespace beamsim::neural;

namespace {

// Tiny two-modality model: gps(2) -> {3} -> d, lidar(6) -> {5} -> d,
// fusion {4} -> classes.
ModelSpec tiny_spec(int64_t d = 4, int64_t classes = 4) {
  ModelSpec spec;
  spec.class_count = classes;
  spec.latent_dim = d;
  spec.modalities = {Modality::gps, Modality::lidar};
  spec.input_dims = {2, 6, 0};
  spec.extractor_hidden[0] = {{3, 0.0}};
  spec.extractor_hidden[1] = {{5, 0.0}};
  spec.fusion_hidden = {{4, 0.0}};
  return spec;
}

Sample random_sample(Rng& rng, const ModelSpec& spec) {
  Sample s;
  for (Modality m : spec.modalities) {
    const int mi = static_cast<int>(m);
    std::vector<double> data(spec.input_dims[mi]);
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    s.inputs[mi] = Tensor({spec.input_dims[mi]}, std::move(data));
  }
  s.label = rng.uniform_int(spec.class_count);
  return s;
}

}  // namespace

TEST_CASE("feature extraction") {
  const ModelSpec spec = tiny_spec();
  Parameters zero;
  zero.values.assign(build_layout(spec).param_count, 0.0);

  const Tensor input({2}, {0.4, -0.7});
  const LatentEmbedding z = extract_features(zero, spec, input, Modality::gps);
  CHECK(z.z.size() == 4);
  for (double v : z.z) CHECK(v == 0.0);  // tanh(0)

  // Range bound for arbitrary parameters.
  Rng rng(31);
  const Parameters params = init_parameters(spec, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const Sample s = random_sample(rng, spec);
    for (Modality m : spec.modalities) {
      const auto latent =
          extract_features(params, spec, s.inputs[static_cast<int>(m)], m);
      for (double v : latent.z) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
    }
  }

  CHECK_THROWS_AS(extract_features(params, spec, Tensor({3}, {1, 2, 3}),
                                   Modality::gps),
                  std::invalid_argument);
}

TEST_CASE("single dense layer matches a hand-computed forward pass") {
  ModelSpec spec;
  spec.class_count = 4;
  spec.latent_dim = 4;
  spec.modalities = {Modality::gps};
  spec.input_dims = {2, 0, 0};
  // No hidden layers: input(2) -> tanh latent(4).
  const Layout layout = build_layout(spec);
  REQUIRE(layout.extractor[0].size() == 1);

  Parameters params;
  params.values.assign(layout.param_count, 0.0);
  // W is stored input-major: w[i][o].
  const double w[2][4] = {{0.1, -0.2, 0.3, -0.4}, {0.5, 0.6, -0.7, 0.8}};
  const double b[4] = {0.01, -0.02, 0.03, -0.04};
  const DenseSlice& sl = layout.extractor[0][0];
  for (int i = 0; i < 2; ++i) {
    for (int o = 0; o < 4; ++o) params.values[sl.w_off + i * 4 + o] = w[i][o];
  }
  for (int o = 0; o < 4; ++o) params.values[sl.b_off + o] = b[o];

  const double x0 = 0.9, x1 = -1.3;
  const LatentEmbedding z =
      extract_features(params, spec, Tensor({2}, {x0, x1}), Modality::gps);
  for (int o = 0; o < 4; ++o) {
    const double expect = std::tanh(x0 * w[0][o] + x1 * w[1][o] + b[o]);
    CHECK(z.z[o] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("latent stacking") {
  const LatentEmbedding zc{Modality::gps, {1, 2}};
  const LatentEmbedding zl{Modality::lidar, {3, 4}};
  const LatentEmbedding zi{Modality::image, {5, 6}};

  const Tensor stacked = fuse(zc, zl, zi);
  CHECK(stacked.shape == std::vector<int64_t>{3, 2});
  CHECK(stacked.data == std::vector<double>{1, 2, 3, 4, 5, 6});

  // Incremental concatenation reaches the same stack.
  const LatentEmbedding partial[2] = {zc, zl};
  const Tensor incremental = append_latent(stack_latents(partial), zi);
  CHECK(incremental.shape == stacked.shape);
  CHECK(incremental.data == stacked.data);

  const LatentEmbedding bad{Modality::lidar, {9}};
  CHECK_THROWS_AS(fuse(zc, bad, zi), std::invalid_argument);
}

TEST_CASE("fusion head softmax") {
  const ModelSpec spec = tiny_spec();
  const Layout layout = build_layout(spec);
  Parameters zero;
  zero.values.assign(layout.param_count, 0.0);

  const Tensor stacked({2, 4}, std::vector<double>(8, 0.3));
  const ScoreVector uniform = fusion_forward(zero, spec, stacked);
  for (double v : uniform) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  // Shift invariance: adding a constant to every output bias only.
  Parameters params = init_parameters(spec, 77);
  Parameters shifted = params;
  const DenseSlice& out_layer = layout.fusion.back();
  for (int64_t o = 0; o < out_layer.out; ++o) {
    shifted.values[out_layer.b_off + o] += 3.7;
  }
  const ScoreVector a = fusion_forward(params, spec, stacked);
  const ScoreVector b = fusion_forward(shifted, spec, stacked);
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) < 1e-12);
    sum += a[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(fusion_forward(params, spec, Tensor({3, 4}, std::vector<double>(12, 0.0))),
                  std::invalid_argument);

  // Non-finite intermediates are reported with the layer identity.
  Parameters broken = params;
  broken.values[layout.fusion[0].w_off] =
      std::numeric_limits<double>::infinity();
  Tensor nonzero({2, 4}, std::vector<double>(8, 1.0));
  CHECK_THROWS_AS(fusion_forward(broken, spec, nonzero), NumericError);
}

TEST_CASE("hand-set logits match a scalar softmax oracle") {
  // Single-modality model with no hidden layers anywhere; identity-ish
  // weights push chosen logits through the fusion layer.
  ModelSpec spec;
  spec.class_count = 4;
  spec.latent_dim = 4;
  spec.modalities = {Modality::gps};
  spec.input_dims = {2, 0, 0};
  const Layout layout = build_layout(spec);

  Parameters params;
  params.values.assign(layout.param_count, 0.0);
  const DenseSlice& out_layer = layout.fusion.back();
  const double logits[4] = {1.0, 2.0, 3.0, 4.0};
  for (int o = 0; o < 4; ++o) params.values[out_layer.b_off + o] = logits[o];

  Sample s;
  s.inputs[0] = Tensor({2}, {0.0, 0.0});
  s.label = 0;
  const ScoreVector scores = predict(params, spec, s);

  double denom = 0.0;
  for (double logit : logits) denom += std::exp(logit);
  for (int o = 0; o < 4; ++o) {
    CHECK(scores[o] == doctest::Approx(std::exp(logits[o]) / denom)
                           .epsilon(1e-12));
  }
}

TEST_CASE("loss value oracles") {
  const ModelSpec spec = tiny_spec();
  TrainConfig cfg;
  cfg.l1_dense = 0.0;
  cfg.l2_dense = 0.0;

  // Zero parameters give the uniform prediction: loss = ln(classes).
  Parameters zero;
  zero.values.assign(build_layout(spec).param_count, 0.0);
  Rng rng(41);
  const Sample s = random_sample(rng, spec);
  const LossGrad lg = loss_and_grad(zero, spec, {&s, 1}, cfg);
  CHECK(lg.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // Saturated correct logit drives the cross-entropy toward zero.
  const Layout layout = build_layout(spec);
  Parameters confident = zero;
  const DenseSlice& out_layer = layout.fusion.back();
  confident.values[out_layer.b_off + s.label] = 60.0;
  const LossGrad lg2 = loss_and_grad(confident, spec, {&s, 1}, cfg);
  CHECK(lg2.loss == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("analytic gradient matches central finite differences") {
  const ModelSpec spec = tiny_spec();
  TrainConfig cfg;  // default L1/L2 stay on; the gradient must include them
  Rng rng(55);

  std::vector<Sample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_sample(rng, spec));

  const double h = 1e-6;
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    Parameters params = init_parameters(spec, 1000 + point);
    const LossGrad lg = loss_and_grad(params, spec, batch, cfg);
    for (size_t i = 0; i < params.values.size(); ++i) {
      Parameters plus = params, minus = params;
      plus.values[i] += h;
      minus.values[i] -= h;
      const double fd = (loss_and_grad(plus, spec, batch, cfg).loss -
                         loss_and_grad(minus, spec, batch, cfg).loss) /
                        (2 * h);
      const double rel = std::abs(lg.grad[i] - fd) /
                         std::max(std::abs(lg.grad[i]) + std::abs(fd), 1e-3);
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training memorizes a tiny dataset") {
  const ModelSpec spec = tiny_spec(8, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 500;
  cfg.val_fraction = 0.0;  // top-1 in the log is measured on the train set
  cfg.rng_seed = 3;

  Rng rng(60);
  std::vector<Sample> data;
  for (int i = 0; i < 8; ++i) {
    Sample s = random_sample(rng, spec);
    s.label = i % 4;
    data.push_back(s);
  }
  const TrainResult result = train(data, spec, cfg);
  CHECK(result.log.back().val_top1 == 1.0);
  CHECK(result.log.size() <= 500);
}

TEST_CASE("training is deterministic and lr=0 freezes parameters") {
  const ModelSpec spec = tiny_spec();
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.val_fraction = 0.25;
  cfg.rng_seed = 9;

  Rng rng(61);
  std::vector<Sample> data;
  for (int i = 0; i < 16; ++i) data.push_back(random_sample(rng, spec));

  const TrainResult a = train(data, spec, cfg);
  const TrainResult b = train(data, spec, cfg);
  CHECK(a.params.values == b.params.values);  // bitwise
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
  }

  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  frozen.val_fraction = 0.0;
  const TrainResult c = train(data, spec, frozen);
  CHECK(c.params.values == init_parameters(spec, frozen.rng_seed).values);
}

TEST_CASE("early stopping uses the patience budget") {
  const ModelSpec spec = tiny_spec();
  TrainConfig cfg;
  cfg.learning_rate = 0.0;  // the metric can never improve after epoch 1
  cfg.max_epochs = 100;
  cfg.early_stop_patience = 4;
  cfg.val_fraction = 0.25;

  Rng rng(62);
  std::vector<Sample> data;
  for (int i = 0; i < 16; ++i) data.push_back(random_sample(rng, spec));
  const TrainResult result = train(data, spec, cfg);
  CHECK(result.log.size() == 5);  // first epoch improves, then patience runs out
}

TEST_CASE("vehicle-side features and MEC-side completion") {
  ModelSpec spec = tiny_spec(6, 4);
  const Parameters params = init_parameters(spec, 21);
  Rng rng(63);

  for (int trial = 0; trial < 100; ++trial) {
    const Sample s = random_sample(rng, spec);
    const Tensor z_cl =
        vehicle_side_features(params, spec, s.inputs[0], s.inputs[1]);
    CHECK(z_cl.shape == std::vector<int64_t>{2, 6});
    CHECK(z_cl.size() == 12);

    // Row 0 is exactly the GPS latent.
    const LatentEmbedding zc =
        extract_features(params, spec, s.inputs[0], Modality::gps);
    for (int i = 0; i < 6; ++i) CHECK(z_cl.data[i] == zc.z[i]);

    const ScoreVector centralized = predict(params, spec, s);
    const ScoreVector distributed =
        mec_side_predict(params, spec, z_cl, nullptr);
    REQUIRE(centralized.size() == distributed.size());
    for (size_t i = 0; i < centralized.size(); ++i) {
      CHECK(std::abs(centralized[i] - distributed[i]) < 1e-12);
    }
    CHECK((std::max_element(centralized.begin(), centralized.end()) -
           centralized.begin()) ==
          (std::max_element(distributed.begin(), distributed.end()) -
           distributed.begin()));

    // Serialization round trip.
    const Tensor decoded = decode_latents(encode_latents(z_cl));
    CHECK(decoded.shape == z_cl.shape);
    const ScoreVector roundtrip =
        mec_side_predict(params, spec, decoded, nullptr);
    for (size_t i = 0; i < centralized.size(); ++i) {
      CHECK(std::abs(centralized[i] - roundtrip[i]) < 1e-9);
    }
  }

  // Payload sizes follow 2 x d.
  ModelSpec wide = tiny_spec(256, 4);
  wide.input_dims = {2, 6, 0};
  const Parameters wide_params = init_parameters(wide, 4);
  const Sample s = random_sample(rng, wide);
  const Tensor z_cl =
      vehicle_side_features(wide_params, wide, s.inputs[0], s.inputs[1]);
  CHECK(z_cl.size() == 512);
  CHECK(encode_latents(z_cl).size() == 16 + 512 * 8);

  ModelSpec narrow = tiny_spec(64, 4);
  const Parameters narrow_params = init_parameters(narrow, 4);
  const Sample s2 = random_sample(rng, narrow);
  CHECK(vehicle_side_features(narrow_params, narrow, s2.inputs[0], s2.inputs[1])
            .size() == 128);
}

TEST_CASE("latent payload encoding is self-describing") {
  Tensor stacked({2, 3}, {1.5, -2.25, 0.0, 1e-17, 4.0, -0.5});
  const std::vector<uint8_t> bytes = encode_latents(stacked);
  const Tensor decoded = decode_latents(bytes);
  CHECK(decoded.shape == stacked.shape);
  CHECK(decoded.data == stacked.data);  // bit-exact

  std::vector<uint8_t> truncated(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS(decode_latents(truncated), DataError);
}

TEST_CASE("checkpoint round trip preserves parameters and spec") {
  const ModelSpec spec = tiny_spec();
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.seed = 99;
  ckpt.params = init_parameters(spec, 99);

  const nlohmann::ordered_json j = checkpoint_to_json(ckpt);
  const Checkpoint back = checkpoint_from_json(j);
  CHECK(back.seed == 99);
  CHECK(back.params.values == ckpt.params.values);
  CHECK(spec_to_json(back.spec) == spec_to_json(spec));
}

TEST_CASE("trainer state restores for bit-exact resume") {
  const ModelSpec spec = tiny_spec();
  TrainConfig cfg;
  cfg.learning_rate = 0.005;
  cfg.val_fraction = 0.0;
  cfg.rng_seed = 17;

  Rng rng(64);
  std::vector<Sample> data;
  for (int i = 0; i < 12; ++i) data.push_back(random_sample(rng, spec));

  // Uninterrupted: 8 epochs.
  TrainConfig full_cfg = cfg;
  full_cfg.max_epochs = 8;
  Trainer full(spec, full_cfg);
  const TrainResult full_result = full.run(data, {});

  // Interrupted at 5, resumed to 8.
  TrainConfig first_cfg = cfg;
  first_cfg.max_epochs = 5;
  Trainer first(spec, first_cfg);
  first.run(data, {});
  Trainer second(spec, full_cfg);
  second.restore(first.state());
  const TrainResult resumed = second.run(data, {});

  REQUIRE(resumed.log.size() == full_result.log.size());
  for (size_t i = 0; i < resumed.log.size(); ++i) {
    CHECK(resumed.log[i].train_loss == full_result.log[i].train_loss);
  }
  CHECK(resumed.params.values == full_result.params.values);
}
