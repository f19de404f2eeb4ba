#include "beamsim/topk.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace beamsim::topk {

std::vector<int64_t> score_order(const ScoreVector& s) {
  std::vector<int64_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return s[a] > s[b]; });
  return order;
}

double c_k(const ScoreVector& s, int64_t k) {
  if (k < 1 || k > static_cast<int64_t>(s.size())) {
    throw std::invalid_argument("c_k: k out of range");
  }
  const auto order = score_order(s);
  double sum = 0.0;
  for (int64_t i = 0; i < k; ++i) sum += s[order[i]];
  return sum;
}

BeamSubset top_k_set(const ScoreVector& s, int64_t k) {
  if (k < 1 || k > static_cast<int64_t>(s.size())) {
    throw std::invalid_argument("top_k_set: k out of range");
  }
  auto order = score_order(s);
  order.resize(k);
  return {std::move(order)};
}

EmpiricalTables build_tables(const std::vector<ScoreVector>& scores,
                             const std::vector<int64_t>& labels) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw std::invalid_argument("build_tables: empty or misaligned inputs");
  }
  const int64_t class_count = static_cast<int64_t>(scores.front().size());

  EmpiricalTables tables;
  tables.class_count = class_count;
  tables.sample_count = static_cast<int64_t>(scores.size());
  tables.per_k.resize(class_count);
  for (auto& t : tables.per_k) t.all_c.reserve(scores.size());

  for (size_t i = 0; i < scores.size(); ++i) {
    const ScoreVector& s = scores[i];
    if (static_cast<int64_t>(s.size()) != class_count) {
      throw std::invalid_argument("build_tables: ragged score vectors");
    }
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw std::invalid_argument("build_tables: label out of range");
    }
    const auto order = score_order(s);
    // Rank of the true index under the subset tie-break: the optimum is in
    // the top-K set exactly when rank < K.
    int64_t rank = 0;
    while (order[rank] != labels[i]) ++rank;

    double mass = 0.0;
    for (int64_t k = 1; k <= class_count; ++k) {
      mass += s[order[k - 1]];
      KTable& t = tables.per_k[k - 1];
      t.all_c.push_back(mass);
      if (rank < k) t.inc_c.push_back(mass);
    }
  }

  for (KTable& t : tables.per_k) {
    std::sort(t.all_c.begin(), t.all_c.end());
    std::sort(t.inc_c.begin(), t.inc_c.end());
    t.p = static_cast<double>(t.inc_c.size()) /
          static_cast<double>(tables.sample_count);
  }
  return tables;
}

InclusionEstimate inclusion_prob(const EmpiricalTables& tables, int64_t k,
                                 const ScoreVector& s) {
  if (static_cast<int64_t>(s.size()) != tables.class_count) {
    throw std::invalid_argument("inclusion_prob: score size mismatch");
  }
  if (k < 1 || k > tables.class_count) {
    throw std::invalid_argument("inclusion_prob: k out of range");
  }
  const double c = c_k(s, k);
  const KTable& t = tables.table(k);

  const auto count_leq = [c](const std::vector<double>& sorted) {
    return static_cast<int64_t>(
        std::upper_bound(sorted.begin(), sorted.end(), c) - sorted.begin());
  };
  const int64_t denom = count_leq(t.all_c);
  if (denom == 0) return {t.p, true};

  // Bayes on empirical measures collapses to a ratio of integer counts:
  // P(c_K <= c | inc) * P(inc) / P(c_K <= c) = #(inc and c_K <= c) / #(c_K <= c).
  const int64_t num = count_leq(t.inc_c);
  const double value = static_cast<double>(num) / static_cast<double>(denom);
  return {std::clamp(value, 0.0, 1.0), false};
}

double channel_efficiency(int64_t k, const KSelectionConfig& cfg) {
  if (cfg.t_total_ms <= 0) {
    throw std::invalid_argument("channel_efficiency: t_total_ms <= 0");
  }
  return (cfg.t_total_ms - latency::t_df(k, cfg.pipeline, cfg.nr)) /
         cfg.t_total_ms;
}

KSelection select_k(const EmpiricalTables& tables, const ScoreVector& s,
                    const KSelectionConfig& cfg) {
  if (cfg.alpha < 0) throw std::invalid_argument("select_k: alpha < 0");

  KSelection best;
  bool found = false;
  for (int64_t k = 1; k <= tables.class_count; ++k) {
    if (latency::t_df(k, cfg.pipeline, cfg.nr) >= cfg.t_total_ms) continue;
    const InclusionEstimate inc = inclusion_prob(tables, k, s);
    const double objective = inc.value + cfg.alpha * channel_efficiency(k, cfg);
    if (!found || objective > best.objective) {
      best.k = k;
      best.objective = objective;
      best.fallback = inc.fallback;
      found = true;
    }
  }
  if (!found) {
    throw ContactTimeError("select_k: no subset size fits in " +
                           std::to_string(cfg.t_total_ms) + " ms");
  }
  best.subset = top_k_set(s, best.k);
  return best;
}

}  // namespace beamsim::topk
