#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "beamsim/metrics.hpp"
#include "beamsim/rng.hpp"

using namespace beamsim;
using namespace beamsim::metrics;

namespace {

EvalRecord make_record(ScoreVector score, int64_t true_index,
                       std::vector<double> power = {}) {
  EvalRecord rec;
  if (power.empty()) power.assign(score.size(), 0.1);
  rec.power_row = std::move(power);
  rec.score = std::move(score);
  rec.true_index = true_index;
  return rec;
}

}  // namespace

TEST_CASE("top-K accuracy") {
  std::vector<EvalRecord> records;
  records.push_back(make_record({0.7, 0.2, 0.1}, 0));
  records.push_back(make_record({0.5, 0.3, 0.2}, 1));
  records.push_back(make_record({0.2, 0.3, 0.5}, 0));

  CHECK(acc_at_k(records, 1) == doctest::Approx(1.0 / 3));
  CHECK(acc_at_k(records, 2) == doctest::Approx(2.0 / 3));
  CHECK(acc_at_k(records, 3) == doctest::Approx(1.0));

  double prev = 0.0;
  for (int64_t k = 1; k <= 3; ++k) {
    const double acc = acc_at_k(records, k);
    CHECK(acc >= prev);
    prev = acc;
  }
  CHECK_THROWS_AS(acc_at_k({}, 1), std::invalid_argument);
}

TEST_CASE("weighted precision, recall, f1") {
  // Perfect predictions.
  std::vector<EvalRecord> perfect;
  perfect.push_back(make_record({0.9, 0.1}, 0));
  perfect.push_back(make_record({0.2, 0.8}, 1));
  const Prf p = weighted_prf(perfect);
  CHECK(p.precision == doctest::Approx(1.0));
  CHECK(p.recall == doctest::Approx(1.0));
  CHECK(p.f1 == doctest::Approx(1.0));

  // Everything predicted as class 0 over two balanced true classes.
  std::vector<EvalRecord> collapsed;
  collapsed.push_back(make_record({0.9, 0.1}, 0));
  collapsed.push_back(make_record({0.8, 0.2}, 0));
  collapsed.push_back(make_record({0.7, 0.3}, 1));
  collapsed.push_back(make_record({0.6, 0.4}, 1));
  const Prf c = weighted_prf(collapsed);
  CHECK(c.recall == doctest::Approx(0.5));
  // Class 0: precision 1/2, recall 1. Class 1: precision 0, recall 0.
  CHECK(c.precision == doctest::Approx(0.25));
  const double f1_class0 = 2.0 * 0.5 * 1.0 / (0.5 + 1.0);
  CHECK(c.f1 == doctest::Approx(0.5 * f1_class0));
}

TEST_CASE("kl divergence") {
  const ScoreVector onehot_like{1.0 - 1e-12, 1e-12};
  const std::vector<double> truth{1.0, 0.0};
  CHECK(kl_divergence(onehot_like, truth) ==
        doctest::Approx(0.0).epsilon(1e-9));

  const ScoreVector uniform{0.5, 0.5};
  const double eps = 1e-12;
  const double expected = 0.5 * std::log(0.5) + 0.5 * std::log(0.5 / eps);
  CHECK(kl_divergence(uniform, truth, eps) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(kl_divergence(uniform, truth, eps) >= -1e-9);

  // Nonnegative against any proper distribution.
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    ScoreVector a(8), b(8);
    double sa = 0, sb = 0;
    for (int i = 0; i < 8; ++i) {
      a[i] = rng.uniform(0.01, 1.0);
      b[i] = rng.uniform(0.01, 1.0);
      sa += a[i];
      sb += b[i];
    }
    for (int i = 0; i < 8; ++i) {
      a[i] /= sa;
      b[i] /= sb;
    }
    CHECK(kl_divergence(a, b) >= -1e-12);
  }
}

TEST_CASE("throughput ratio") {
  // True best always inside the subset.
  std::vector<EvalRecord> aligned;
  aligned.push_back(make_record({0.9, 0.1}, 0, {4.0, 1.0}));
  CHECK(throughput_ratio(aligned, 1).value == doctest::Approx(1.0));

  // Subset picks the weaker pair.
  std::vector<EvalRecord> miss;
  miss.push_back(make_record({0.1, 0.9}, 0, {4.0, 1.0}));
  const double expected = std::log2(2.0) / std::log2(5.0);
  CHECK(throughput_ratio(miss, 1).value ==
        doctest::Approx(expected).epsilon(1e-9));
  CHECK(throughput_ratio(miss, 2).value == doctest::Approx(1.0));

  // Zero-power truth is skipped and reported.
  std::vector<EvalRecord> degenerate;
  degenerate.push_back(make_record({0.9, 0.1}, 0, {0.0, 0.0}));
  degenerate.push_back(make_record({0.9, 0.1}, 0, {2.0, 1.0}));
  const ThroughputRatio tr = throughput_ratio(degenerate, 1);
  CHECK(tr.skipped == 1);
  CHECK(tr.value == doctest::Approx(1.0));

  // Nondecreasing in K per record set.
  Rng rng(22);
  std::vector<EvalRecord> records;
  for (int i = 0; i < 30; ++i) {
    ScoreVector s(10);
    std::vector<double> power(10);
    double total = 0;
    for (int j = 0; j < 10; ++j) {
      s[j] = rng.uniform(0.0, 1.0);
      total += s[j];
      power[j] = rng.uniform(0.0, 2.0);
    }
    for (double& v : s) v /= total;
    int64_t best = 0;
    for (int j = 1; j < 10; ++j) {
      if (power[j] > power[best]) best = j;
    }
    records.push_back(make_record(s, best, power));
  }
  double prev = 0.0;
  for (int64_t k = 1; k <= 10; ++k) {
    const double v = throughput_ratio(records, k).value;
    CHECK(v >= prev - 1e-12);
    CHECK(v >= acc_at_k(records, k) - 1e-12);
    prev = v;
  }
}

TEST_CASE("label distribution kl") {
  std::vector<EvalRecord> records;
  records.push_back(make_record({0.9, 0.1}, 0));
  records.push_back(make_record({0.8, 0.2}, 0));
  CHECK(label_distribution_kl(records) == doctest::Approx(0.0).epsilon(1e-9));

  records.push_back(make_record({0.7, 0.3}, 1));  // predicted 0, true 1
  CHECK(label_distribution_kl(records) > 0.1);
}
