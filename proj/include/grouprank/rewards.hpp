#pragma once

// Heterogeneous RL reward for groupwise rerankers and GRPO group-relative
// advantages.
//
//   R_H = alpha * R_recall + beta * R_rank + gamma * R_dist
//   R   = R_H if both formats are good, 0 if only the output format is good,
//         -1 otherwise.
//
// Ground-truth scores are the fused teacher labels in [0,1], indexed by
// in-group position (index 0 = position 1).

#include <cstddef>
#include <span>
#include <vector>

#include "grouprank/core.hpp"
#include "grouprank/fusion.hpp"

namespace grouprank::rewards {

struct RewardWeights {
    double alpha = 0.2;        // recall
    double beta = 0.5;         // ranking
    double gamma = 0.1;        // distribution
    double ndcg_vs_rbo = 0.5;  // NDCG share inside R_rank
};

/// Knobs the reward formulas leave open.
struct RewardParams {
    RewardWeights weights;
    std::size_t ndcg_k = 10;
    std::size_t recall_k = 10;
    double rbo_persistence = 0.9;
    double relevance_threshold = 0.5;
    double epsilon = fusion::kDefaultSmoothing;
    bool clamp_heterogeneous_at_zero = false;
};

/// Throws std::invalid_argument on negative weights or out-of-range knobs.
void validate(const RewardParams& params);

struct FormatVerdict {
    bool output_format_ok = false;  // exactly one <reason> and one <answer> region
    bool answer_format_ok = false;  // answer body is the complete score map
};

struct RewardBreakdown {
    FormatVerdict verdict;
    double r_recall = 0.0;
    double r_rank = 0.0;
    double r_dist = 0.0;
    double r_h = 0.0;
    double final = 0.0;
};

/// Positions 1..n ordered by predicted score descending; ties keep the
/// lower position first.
std::vector<int> order_by_scores(const GroupScoreMap& predicted);

/// Positions 1..n ordered by ground truth descending, ties by position.
std::vector<int> order_by_scores(std::span<const double> gt_scores);

/// Recall@k over in-group items whose gt score reaches `relevance_threshold`.
/// 0 when nothing is relevant. Throws unless predicted_order is a permutation.
double recall_reward(std::span<const int> predicted_order, std::span<const double> gt_scores,
                     std::size_t k, double relevance_threshold = 0.5);

/// ndcg_vs_rbo * NDCG@k(predicted order, gt grades)
///   + (1 - ndcg_vs_rbo) * RBO(predicted order, gt order).
double ranking_reward(const GroupScoreMap& predicted, std::span<const double> gt_scores,
                      const RewardParams& params = {});

/// 1 - KL(P_gt || P_pred) with both sides sum-normalized and smoothed; gt is
/// scaled by 10 first so it shares the predicted integer scale.
double distribution_reward(const GroupScoreMap& predicted, std::span<const double> gt_scores,
                           double epsilon = fusion::kDefaultSmoothing);

double heterogeneous_reward(double r_recall, double r_rank, double r_dist,
                            const RewardWeights& weights = {});

double final_reward(const FormatVerdict& verdict, double r_h);

/// Every component plus the gated final reward. `predicted` is ignored unless
/// the verdict says the answer format is good.
RewardBreakdown score_response(const FormatVerdict& verdict, const GroupScoreMap* predicted,
                               std::span<const double> gt_scores, const RewardParams& params = {});

/// (r_i - mean) / population std; all zeros when std < 1e-9.
std::vector<double> grpo_advantages(std::span<const double> rewards);

}  // namespace grouprank::rewards
