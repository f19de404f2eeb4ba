#pragma once

#include <cstdint>
#include <vector>

#include "beamsim/common.hpp"
#include "beamsim/latency.hpp"

namespace beamsim::topk {

/// Beam-pair indices ordered by descending score, ties by ascending index.
struct BeamSubset {
  std::vector<int64_t> indices;
};

/// Per-K empirical material from the training set: score-mass samples
/// overall and conditioned on the optimum being inside the top-K set.
struct KTable {
  double p = 0.0;              // empirical inclusion rate
  std::vector<double> all_c;   // sorted c_K over all training samples
  std::vector<double> inc_c;   // sorted c_K over included samples
};

struct EmpiricalTables {
  int64_t class_count = 0;
  int64_t sample_count = 0;
  std::vector<KTable> per_k;  // per_k[K-1]

  const KTable& table(int64_t k) const { return per_k[k - 1]; }
};

struct InclusionEstimate {
  double value = 0.0;
  bool fallback = false;  // set when the score CDF had no mass at or below c
};

struct KSelectionConfig {
  double alpha = 1.0;
  double t_total_ms = 807.0;
  latency::PipelineTiming pipeline;
  latency::NrTiming nr;
};

struct KSelection {
  int64_t k = 0;
  BeamSubset subset;
  double objective = 0.0;
  bool fallback = false;  // inclusion estimate of the chosen K used fallback
};

/// Indices sorted by (score descending, index ascending).
std::vector<int64_t> score_order(const ScoreVector& s);

/// Sum of the K largest scores, accumulated in descending order.
double c_k(const ScoreVector& s, int64_t k);

BeamSubset top_k_set(const ScoreVector& s, int64_t k);

/// Builds the per-K score-mass distributions and inclusion rates from
/// aligned training scores and true beam indices.
EmpiricalTables build_tables(const std::vector<ScoreVector>& scores,
                             const std::vector<int64_t>& labels);

/// Empirical-Bayes estimate of P(optimum in top-K | c_K(sample) <= c_K(s)).
/// Evaluated from integer counts so it matches direct conditional counting
/// exactly; falls back to the unconditional rate when the denominator is 0.
InclusionEstimate inclusion_prob(const EmpiricalTables& tables, int64_t k,
                                 const ScoreVector& s);

/// Fraction of the coherence window left after subset selection overhead.
double channel_efficiency(int64_t k, const KSelectionConfig& cfg);

/// Maximizes inclusion probability plus alpha-weighted channel efficiency
/// over all feasible K (selection latency strictly under t_total_ms), ties
/// to the smallest K. Throws ContactTimeError when no K is feasible.
KSelection select_k(const EmpiricalTables& tables, const ScoreVector& s,
                    const KSelectionConfig& cfg);

}  // namespace beamsim::topk
