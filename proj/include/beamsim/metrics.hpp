#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "beamsim/common.hpp"

namespace beamsim::metrics {

/// One evaluation sample: model scores, the true beam-pair index and the
/// sample's normalized power over all beam pairs.
struct EvalRecord {
  ScoreVector score;
  int64_t true_index = 0;
  std::vector<double> power_row;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ThroughputRatio {
  double value = 0.0;
  int64_t skipped = 0;  // records with zero true-best power
};

/// Fraction of records whose true index lies in the top-K score set.
double acc_at_k(std::span<const EvalRecord> records, int64_t k);

/// Precision/recall/F1 per class from argmax predictions, averaged with
/// weights proportional to true-class support.
Prf weighted_prf(std::span<const EvalRecord> records);

/// KL(pred || true_dist) with the true distribution floored at epsilon and
/// the 0 * ln(0) terms dropped.
double kl_divergence(const ScoreVector& pred, std::span<const double> true_dist,
                     double epsilon = 1e-12);

/// Mean per-record KL against the one-hot truth.
double mean_kl_vs_onehot(std::span<const EvalRecord> records,
                         double epsilon = 1e-12);

/// KL between the argmax-prediction histogram and the true-label histogram.
double label_distribution_kl(std::span<const EvalRecord> records,
                             double epsilon = 1e-12);

/// Mean log-capacity of the best pair inside the top-K set relative to the
/// exhaustive-search optimum.
ThroughputRatio throughput_ratio(std::span<const EvalRecord> records,
                                 int64_t k);

}  // namespace beamsim::metrics
