#include "beamsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "beamsim/topk.hpp"

namespace beamsim::metrics {

namespace {

int64_t argmax(const ScoreVector& s) {
  return std::max_element(s.begin(), s.end()) - s.begin();
}

}  // namespace

double acc_at_k(std::span<const EvalRecord> records, int64_t k) {
  if (records.empty()) throw std::invalid_argument("acc_at_k: no records");
  int64_t hits = 0;
  for (const EvalRecord& rec : records) {
    const topk::BeamSubset subset = topk::top_k_set(rec.score, k);
    if (std::find(subset.indices.begin(), subset.indices.end(),
                  rec.true_index) != subset.indices.end()) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

Prf weighted_prf(std::span<const EvalRecord> records) {
  if (records.empty()) throw std::invalid_argument("weighted_prf: no records");
  const int64_t classes = static_cast<int64_t>(records.front().score.size());

  std::vector<int64_t> tp(classes, 0), fp(classes, 0), fn(classes, 0),
      support(classes, 0);
  for (const EvalRecord& rec : records) {
    const int64_t pred = argmax(rec.score);
    ++support[rec.true_index];
    if (pred == rec.true_index) {
      ++tp[pred];
    } else {
      ++fp[pred];
      ++fn[rec.true_index];
    }
  }

  Prf out;
  const double n = static_cast<double>(records.size());
  for (int64_t c = 0; c < classes; ++c) {
    if (support[c] == 0) continue;
    const double weight = static_cast<double>(support[c]) / n;
    const double predicted = static_cast<double>(tp[c] + fp[c]);
    const double precision =
        predicted > 0 ? static_cast<double>(tp[c]) / predicted : 0.0;
    const double recall =
        static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]);
    const double f1 = (precision + recall) > 0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    out.precision += weight * precision;
    out.recall += weight * recall;
    out.f1 += weight * f1;
  }
  return out;
}

double kl_divergence(const ScoreVector& pred, std::span<const double> true_dist,
                     double epsilon) {
  if (pred.size() != true_dist.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch");
  }
  double kl = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] <= 0.0) continue;  // 0 * ln(0) := 0
    kl += pred[i] * std::log(pred[i] / std::max(true_dist[i], epsilon));
  }
  return kl;
}

double mean_kl_vs_onehot(std::span<const EvalRecord> records, double epsilon) {
  if (records.empty()) {
    throw std::invalid_argument("mean_kl_vs_onehot: no records");
  }
  double total = 0.0;
  std::vector<double> onehot;
  for (const EvalRecord& rec : records) {
    onehot.assign(rec.score.size(), 0.0);
    onehot[rec.true_index] = 1.0;
    total += kl_divergence(rec.score, onehot, epsilon);
  }
  return total / static_cast<double>(records.size());
}

double label_distribution_kl(std::span<const EvalRecord> records,
                             double epsilon) {
  if (records.empty()) {
    throw std::invalid_argument("label_distribution_kl: no records");
  }
  const size_t classes = records.front().score.size();
  std::vector<double> pred_hist(classes, 0.0), true_hist(classes, 0.0);
  const double w = 1.0 / static_cast<double>(records.size());
  for (const EvalRecord& rec : records) {
    pred_hist[argmax(rec.score)] += w;
    true_hist[rec.true_index] += w;
  }
  return kl_divergence(pred_hist, true_hist, epsilon);
}

ThroughputRatio throughput_ratio(std::span<const EvalRecord> records,
                                 int64_t k) {
  if (records.empty()) {
    throw std::invalid_argument("throughput_ratio: no records");
  }
  ThroughputRatio out;
  double total = 0.0;
  int64_t counted = 0;
  for (const EvalRecord& rec : records) {
    if (rec.power_row.empty()) {
      throw std::invalid_argument("throughput_ratio: missing power row");
    }
    const double best_power = rec.power_row[rec.true_index];
    if (best_power <= 0.0) {
      ++out.skipped;
      continue;
    }
    const topk::BeamSubset subset = topk::top_k_set(rec.score, k);
    double inside_best = 0.0;
    for (int64_t idx : subset.indices) {
      inside_best = std::max(inside_best, rec.power_row[idx]);
    }
    total += std::log2(1.0 + inside_best) / std::log2(1.0 + best_power);
    ++counted;
  }
  out.value = counted > 0 ? total / static_cast<double>(counted) : 0.0;
  return out;
}

}  // namespace beamsim::metrics
