#include "grouprank/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace grouprank::fusion {

namespace {

void check_weights(double a, double b) {
    if (!(a >= 0.0) || !(b >= 0.0)) throw std::invalid_argument("fusion weights must be >= 0");
}

std::unordered_map<std::string, double> normalized_by_doc(const RunList& run) {
    std::unordered_map<std::string, double> out;
    if (run.empty()) return out;
    std::vector<double> scores;
    scores.reserve(run.size());
    for (const auto& e : run.entries) scores.push_back(e.score);
    auto norm = minmax_normalize(scores);
    for (std::size_t i = 0; i < run.size(); ++i) out.emplace(run.entries[i].doc_id, norm[i]);
    return out;
}

}  // namespace

ScoreVector minmax_normalize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("minmax_normalize: empty vector");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("minmax_normalize: non-finite value");
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    ScoreVector out(values.size(), 0.5);
    if (hi == lo) return out;
    const double span = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = std::clamp((values[i] - lo) / span, 0.0, 1.0);
    return out;
}

ScoreVector hybrid_score(std::span<const double> bm25, std::span<const double> dense,
                         double w_sparse, double w_dense) {
    if (bm25.size() != dense.size()) throw std::invalid_argument("hybrid_score: length mismatch");
    check_weights(w_sparse, w_dense);
    auto nb = minmax_normalize(bm25);
    auto nd = minmax_normalize(dense);
    ScoreVector out(nb.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w_sparse * nb[i] + w_dense * nd[i];
    return out;
}

double listwise_rank_to_score(int rank) {
    if (rank < 1) throw std::invalid_argument("listwise rank must be >= 1");
    return -std::log(static_cast<double>(rank));
}

ScoreVector fuse_labels(std::span<const double> pointwise, std::span<const int> ranks,
                        double alpha) {
    if (pointwise.size() != ranks.size())
        throw std::invalid_argument("fuse_labels: length mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("fuse_labels: alpha must lie in [0,1]");
    const std::size_t n = ranks.size();
    std::vector<bool> seen(n + 1, false);
    for (int r : ranks) {
        if (r < 1 || static_cast<std::size_t>(r) > n || seen[r])
            throw std::invalid_argument("fuse_labels: ranks are not a permutation of 1.." +
                                        std::to_string(n));
        seen[r] = true;
    }
    std::vector<double> listwise(n);
    for (std::size_t i = 0; i < n; ++i) listwise[i] = listwise_rank_to_score(ranks[i]);
    auto np = minmax_normalize(pointwise);
    auto nl = minmax_normalize(listwise);
    ScoreVector out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::clamp(alpha * np[i] + (1.0 - alpha) * nl[i], 0.0, 1.0);
    return out;
}

RunList fuse_runs(const RunList& reranker, const RunList& retriever, double w_rerank,
                  double w_retrieve) {
    if (reranker.query_id != retriever.query_id)
        throw std::invalid_argument("fuse_runs: query mismatch (" + reranker.query_id + " vs " +
                                    retriever.query_id + ")");
    check_weights(w_rerank, w_retrieve);
    auto nr = normalized_by_doc(reranker);
    auto nt = normalized_by_doc(retriever);

    std::vector<std::pair<std::string, double>> fused;
    fused.reserve(nr.size() + nt.size());
    auto lookup = [](const auto& m, const std::string& doc) {
        auto it = m.find(doc);
        return it == m.end() ? 0.0 : it->second;
    };
    for (const auto& e : reranker.entries)
        fused.emplace_back(e.doc_id, w_rerank * nr[e.doc_id] + w_retrieve * lookup(nt, e.doc_id));
    for (const auto& e : retriever.entries)
        if (!nr.count(e.doc_id)) fused.emplace_back(e.doc_id, w_retrieve * nt[e.doc_id]);
    return RunList::from_scores(reranker.query_id, std::move(fused),
                                reranker.tag.empty() ? "fused" : reranker.tag + "+fused");
}

ProbabilityVector scores_to_distribution(std::span<const double> values, double epsilon) {
    if (values.empty()) throw std::invalid_argument("scores_to_distribution: empty vector");
    if (!(epsilon > 0.0)) throw std::invalid_argument("scores_to_distribution: epsilon must be > 0");
    double total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("scores_to_distribution: negative or non-finite value");
        total += v + epsilon;
    }
    ProbabilityVector out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] + epsilon) / total;
    return out;
}

}  // namespace grouprank::fusion
