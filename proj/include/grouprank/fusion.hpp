#pragma once

// Score normalization and the weighted fusions: hybrid retrieval, teacher
// label fusion, reranker/retriever run fusion, and score-to-distribution.

#include <span>
#include <vector>

#include "grouprank/core.hpp"

namespace grouprank::fusion {

using ScoreVector = std::vector<double>;
using ProbabilityVector = std::vector<double>;

/// Maps values affinely onto [0,1]. A constant vector maps to all 0.5.
/// Throws std::invalid_argument on empty or non-finite input.
ScoreVector minmax_normalize(std::span<const double> values);

/// w_sparse * minmax(bm25) + w_dense * minmax(dense), elementwise.
ScoreVector hybrid_score(std::span<const double> bm25, std::span<const double> dense,
                         double w_sparse = 0.5, double w_dense = 0.5);

/// -ln(rank); rank must be >= 1.
double listwise_rank_to_score(int rank);

/// alpha * minmax(pointwise) + (1 - alpha) * minmax(-ln(rank)).
/// `listwise_ranks` must be a permutation of 1..n.
ScoreVector fuse_labels(std::span<const double> pointwise, std::span<const int> listwise_ranks,
                        double alpha = 0.5);

/// Per-doc w_rerank * minmax(reranker) + w_retrieve * minmax(retriever); a doc
/// missing from one run contributes 0 from it. Ties break by doc id.
RunList fuse_runs(const RunList& reranker, const RunList& retriever, double w_rerank = 0.6,
                  double w_retrieve = 0.4);

inline constexpr double kDefaultSmoothing = 1e-6;

/// p_i = (v_i + eps) / sum_j (v_j + eps). Values must be non-negative.
ProbabilityVector scores_to_distribution(std::span<const double> values,
                                         double epsilon = kDefaultSmoothing);

}  // namespace grouprank::fusion
