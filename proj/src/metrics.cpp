#include "grouprank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_set>

namespace grouprank::metrics {

namespace {

template <typename T>
double rbo_impl(std::span<const T> a, std::span<const T> b, double p) {
    if (a.empty() || b.empty()) throw std::invalid_argument("rbo: empty list");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("rbo: persistence must lie in (0,1)");

    const std::size_t n = std::min(a.size(), b.size());
    std::unordered_set<T> seen_a, seen_b;
    std::size_t overlap = 0;
    double weighted = 0.0;
    double p_d = 1.0;
    for (std::size_t d = 1; d <= n; ++d) {
        const T& x = a[d - 1];
        const T& y = b[d - 1];
        if (x == y) {
            ++overlap;
        } else {
            if (seen_b.count(x)) ++overlap;
            if (seen_a.count(y)) ++overlap;
        }
        seen_a.insert(x);
        seen_b.insert(y);
        p_d *= p;
        weighted += static_cast<double>(overlap) / static_cast<double>(d) * p_d;
    }
    double value = static_cast<double>(overlap) / static_cast<double>(n) * p_d +
                   (1.0 - p) / p * weighted;
    return std::clamp(value, 0.0, 1.0);
}

}  // namespace

double dcg_at_k(std::span<const double> grades, std::size_t k) {
    const std::size_t n = std::min(k, grades.size());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += (std::exp2(grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    return total;
}

double ndcg_from_grades(std::span<const double> grades, std::span<const double> all_grades,
                        std::size_t k) {
    std::vector<double> ideal(all_grades.begin(), all_grades.end());
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double ideal_dcg = dcg_at_k(ideal, k);
    if (ideal_dcg <= 0.0) return 0.0;
    return std::clamp(dcg_at_k(grades, k) / ideal_dcg, 0.0, 1.0);
}

MetricValue ndcg_at_k(std::span<const std::string> ranked, const Qrels& qrels,
                      const std::string& query_id, std::size_t k) {
    if (k == 0) throw std::invalid_argument("ndcg: k must be positive");
    std::vector<double> grades;
    grades.reserve(std::min(k, ranked.size()));
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        grades.push_back(qrels.grade(query_id, ranked[i]));
    std::vector<double> judged;
    for (const auto& [_, g] : qrels.judged(query_id)) judged.push_back(g);
    return {"ndcg", ndcg_from_grades(grades, judged, k), k};
}

MetricValue recall_at_k(std::span<const std::string> ranked, const Qrels& qrels,
                        const std::string& query_id, std::size_t k) {
    if (k == 0) throw std::invalid_argument("recall: k must be positive");
    std::size_t relevant = 0;
    for (const auto& [_, g] : qrels.judged(query_id))
        if (g > 0) ++relevant;
    if (relevant == 0) return {"recall", 0.0, k};
    std::unordered_set<std::string> counted;
    std::size_t found = 0;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        if (qrels.grade(query_id, ranked[i]) > 0 && counted.insert(ranked[i]).second) ++found;
    return {"recall", static_cast<double>(found) / static_cast<double>(relevant), k};
}

double rbo(std::span<const std::string> a, std::span<const std::string> b, double p) {
    return rbo_impl(a, b, p);
}

double rbo(std::span<const int> a, std::span<const int> b, double p) {
    return rbo_impl(a, b, p);
}

}  // namespace grouprank::metrics
