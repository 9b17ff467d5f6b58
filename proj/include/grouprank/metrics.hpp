#pragma once

// Ranking-quality metrics shared by the reward stack and the evaluator.
// Gain is 2^grade - 1 with a log2(i + 1) discount (trec_eval convention).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grouprank/core.hpp"

namespace grouprank::metrics {

struct MetricValue {
    std::string name;
    double value = 0.0;
    std::optional<std::size_t> cutoff;
};

/// Sum over the first min(k, n) grades of (2^g - 1) / log2(i + 1).
double dcg_at_k(std::span<const double> grades_in_rank_order, std::size_t k);

/// DCG of the ranking over the ideal DCG of every judged doc for the query.
/// Returns 0 when the ideal DCG is 0.
MetricValue ndcg_at_k(std::span<const std::string> ranked_doc_ids, const Qrels& qrels,
                      const std::string& query_id, std::size_t k);

/// NDCG when the grades are given directly: `grades_in_rank_order` for the
/// ranking and `all_grades` for the ideal ordering (any order).
double ndcg_from_grades(std::span<const double> grades_in_rank_order,
                        std::span<const double> all_grades, std::size_t k);

/// Fraction of the query's relevant (grade > 0) docs found in the top k.
MetricValue recall_at_k(std::span<const std::string> ranked_doc_ids, const Qrels& qrels,
                        const std::string& query_id, std::size_t k);

inline constexpr double kDefaultRboPersistence = 0.9;

/// Extrapolated rank-biased overlap; identical lists score exactly 1.
/// Throws std::invalid_argument on an empty list or p outside (0,1).
double rbo(std::span<const std::string> list_a, std::span<const std::string> list_b,
           double persistence = kDefaultRboPersistence);

/// Same, over integer item ids (in-group positions).
double rbo(std::span<const int> list_a, std::span<const int> list_b,
           double persistence = kDefaultRboPersistence);

}  // namespace grouprank::metrics
