#include "grouprank/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "grouprank/metrics.hpp"

namespace grouprank::rewards {

namespace {

void check_complete(const GroupScoreMap& predicted, std::span<const double> gt) {
    if (predicted.size() != gt.size())
        throw std::invalid_argument("score map covers " + std::to_string(predicted.size()) +
                                    " positions, ground truth has " + std::to_string(gt.size()));
    if (gt.empty()) throw std::invalid_argument("empty group");
}

std::vector<int> stable_order(std::size_t n, const auto& score_of) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return score_of(a) > score_of(b); });
    return order;
}

}  // namespace

void validate(const RewardParams& p) {
    const auto& w = p.weights;
    if (!(w.alpha >= 0.0 && w.beta >= 0.0 && w.gamma >= 0.0))
        throw std::invalid_argument("reward weights must be >= 0");
    if (!(w.ndcg_vs_rbo >= 0.0 && w.ndcg_vs_rbo <= 1.0))
        throw std::invalid_argument("ndcg_vs_rbo must lie in [0,1]");
    if (p.ndcg_k == 0 || p.recall_k == 0) throw std::invalid_argument("cutoffs must be positive");
    if (!(p.rbo_persistence > 0.0 && p.rbo_persistence < 1.0))
        throw std::invalid_argument("rbo persistence must lie in (0,1)");
    if (!(p.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
}

std::vector<int> order_by_scores(const GroupScoreMap& predicted) {
    const auto& s = predicted.scores();
    return stable_order(s.size(), [&](int pos) { return s[pos - 1]; });
}

std::vector<int> order_by_scores(std::span<const double> gt) {
    return stable_order(gt.size(), [&](int pos) { return gt[pos - 1]; });
}

double recall_reward(std::span<const int> predicted_order, std::span<const double> gt,
                     std::size_t k, double threshold) {
    const std::size_t n = gt.size();
    if (predicted_order.size() != n)
        throw std::invalid_argument("recall_reward: order length differs from ground truth");
    if (k == 0) throw std::invalid_argument("recall_reward: k must be positive");
    std::vector<bool> seen(n + 1, false);
    for (int pos : predicted_order) {
        if (pos < 1 || static_cast<std::size_t>(pos) > n || seen[pos])
            throw std::invalid_argument("recall_reward: order is not a permutation of 1.." +
                                        std::to_string(n));
        seen[pos] = true;
    }
    std::size_t relevant = 0;
    for (double g : gt)
        if (g >= threshold) ++relevant;
    if (relevant == 0) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < std::min(k, n); ++i)
        if (gt[predicted_order[i] - 1] >= threshold) ++hit;
    return static_cast<double>(hit) / static_cast<double>(relevant);
}

double ranking_reward(const GroupScoreMap& predicted, std::span<const double> gt,
                      const RewardParams& params) {
    check_complete(predicted, gt);
    const auto pred_order = order_by_scores(predicted);
    const auto gt_order = order_by_scores(gt);

    std::vector<double> grades;
    grades.reserve(pred_order.size());
    for (int pos : pred_order) grades.push_back(gt[pos - 1]);
    const double ndcg = metrics::ndcg_from_grades(grades, gt, params.ndcg_k);
    const double overlap = metrics::rbo(std::span<const int>(pred_order),
                                        std::span<const int>(gt_order), params.rbo_persistence);
    const double mix = params.weights.ndcg_vs_rbo;
    return mix * ndcg + (1.0 - mix) * overlap;
}

double distribution_reward(const GroupScoreMap& predicted, std::span<const double> gt,
                           double epsilon) {
    check_complete(predicted, gt);
    std::vector<double> gt_scaled(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!(gt[i] >= 0.0)) throw std::invalid_argument("distribution_reward: negative gt score");
        gt_scaled[i] = gt[i] * 10.0;
    }
    std::vector<double> pred(predicted.scores().begin(), predicted.scores().end());
    const auto p_gt = fusion::scores_to_distribution(gt_scaled, epsilon);
    const auto p_pred = fusion::scores_to_distribution(pred, epsilon);
    double kl = 0.0;
    for (std::size_t i = 0; i < p_gt.size(); ++i) kl += p_gt[i] * std::log(p_gt[i] / p_pred[i]);
    return 1.0 - kl;
}

double heterogeneous_reward(double r_recall, double r_rank, double r_dist,
                            const RewardWeights& w) {
    // Neumaier-compensated sum. Unit components under default weights give
    // 0.8 here; plain left-to-right addition gives 0.7999999999999999.
    const double terms[] = {w.alpha * r_recall, w.beta * r_rank, w.gamma * r_dist};
    double sum = 0.0, carry = 0.0;
    for (double t : terms) {
        const double next = sum + t;
        carry += std::abs(sum) >= std::abs(t) ? (sum - next) + t : (t - next) + sum;
        sum = next;
    }
    return sum + carry;
}

double final_reward(const FormatVerdict& verdict, double r_h) {
    if (verdict.output_format_ok && verdict.answer_format_ok) return r_h;
    if (verdict.output_format_ok) return 0.0;
    return -1.0;
}

RewardBreakdown score_response(const FormatVerdict& verdict, const GroupScoreMap* predicted,
                               std::span<const double> gt, const RewardParams& params) {
    validate(params);
    RewardBreakdown out;
    out.verdict = verdict;
    if (verdict.output_format_ok && verdict.answer_format_ok) {
        if (!predicted)
            throw std::invalid_argument("score_response: well-formed answer without a score map");
        out.r_recall = recall_reward(order_by_scores(*predicted), gt, params.recall_k,
                                     params.relevance_threshold);
        out.r_rank = ranking_reward(*predicted, gt, params);
        out.r_dist = distribution_reward(*predicted, gt, params.epsilon);
        out.r_h = heterogeneous_reward(out.r_recall, out.r_rank, out.r_dist, params.weights);
        if (params.clamp_heterogeneous_at_zero) out.r_h = std::max(out.r_h, 0.0);
    }
    out.final = final_reward(verdict, out.r_h);
    return out;
}

std::vector<double> grpo_advantages(std::span<const double> rewards) {
    std::vector<double> out(rewards.size(), 0.0);
    if (rewards.empty()) return out;
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    if (sd < 1e-9) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

}  // namespace grouprank::rewards
