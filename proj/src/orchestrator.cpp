#include "grouprank/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <limits>
#include <numeric>
#include <random>

#include "grouprank/fusion.hpp"
#include "parallel.hpp"

namespace grouprank::orchestrator {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return a / b + (a % b != 0); }

/// Smallest e with base^e >= n.
std::uint64_t ceil_log(std::uint64_t base, std::uint64_t n) {
    std::uint64_t e = 0;
    std::uint64_t power = 1;
    while (power < n) {
        ++e;
        if (power > std::numeric_limits<std::uint64_t>::max() / base) break;
        power *= base;
    }
    return e;
}

/// Unbiased draw from [0, bound) by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

struct GroupOutcome {
    std::vector<int> scores;  // aligned with the group's members
    std::size_t calls = 0;
    bool fallback = false;
    std::string error;  // backend failure, empty otherwise
};

}  // namespace

std::string_view to_string(GroupingMode mode) {
    return mode == GroupingMode::Disjoint ? "disjoint" : "sliding";
}

GroupingMode parse_grouping_mode(std::string_view text) {
    if (text == "disjoint" || text == "disjoint-groups") return GroupingMode::Disjoint;
    if (text == "sliding" || text == "sliding-window") return GroupingMode::SlidingWindow;
    throw std::invalid_argument("unknown grouping mode '" + std::string(text) + "'");
}

void RerankConfig::validate() const {
    if (group_size == 0) throw std::invalid_argument("group_size must be positive");
    if (window == 0 || step == 0) throw std::invalid_argument("window and step must be positive");
    if (step > window) throw std::invalid_argument("step must not exceed window");
    if (mode == GroupingMode::SlidingWindow && group_size > window)
        throw std::invalid_argument("group_size must not exceed window in sliding mode");
    if (ensemble_n == 0) throw std::invalid_argument("ensemble_n must be >= 1");
    if (max_in_flight == 0) throw std::invalid_argument("max_in_flight must be >= 1");
    if (!(w_rerank >= 0.0 && w_retrieve >= 0.0))
        throw std::invalid_argument("fusion weights must be >= 0");
}

void RerankConfig::apply(const KeyValues& kv) {
    if (auto v = kv.get_uint("group_size")) group_size = *v;
    if (auto v = kv.get_uint("window")) window = *v;
    if (auto v = kv.get_uint("step")) step = *v;
    if (auto v = kv.get_uint("ensemble_n")) ensemble_n = *v;
    if (auto v = kv.get_uint("seed")) seed = *v;
    if (auto v = kv.get_uint("max_retries")) max_retries = *v;
    if (auto v = kv.get("mode")) mode = parse_grouping_mode(*v);
    if (auto v = kv.get_uint("max_in_flight")) max_in_flight = *v;
    if (auto v = kv.get_bool("prefer_rewritten_query")) prefer_rewritten_query = *v;
    if (auto v = kv.get_bool("clamp_out_of_range")) clamp_out_of_range = *v;
    if (auto v = kv.get_bool("fuse_with_retriever")) fuse_with_retriever = *v;
    if (auto v = kv.get_real("w_rerank")) w_rerank = *v;
    if (auto v = kv.get_real("w_retrieve")) w_retrieve = *v;
}

std::vector<IndexRange> partition_disjoint(std::size_t n, std::size_t c) {
    if (c == 0) throw std::invalid_argument("group size must be positive");
    std::vector<IndexRange> groups;
    for (std::size_t b = 0; b < n; b += c) groups.push_back({b, std::min(n, b + c)});
    return groups;
}

std::vector<IndexRange> partition_sliding(std::size_t n, std::size_t w, std::size_t s) {
    if (w == 0 || s == 0) throw std::invalid_argument("window and step must be positive");
    if (s > w) throw std::invalid_argument("step must not exceed window");
    std::vector<IndexRange> windows;
    if (n == 0) return windows;
    if (n <= w) return {{0, n}};
    std::size_t off = 0;
    for (; off + w <= n; off += s) windows.push_back({off, off + w});
    if (windows.back().end < n) windows.push_back({n - w, n});
    return windows;
}

double ScoreAccumulator::mean(std::size_t index) const {
    const auto c = count_.at(index);
    return c == 0 ? 0.0 : sum_[index] / static_cast<double>(c);
}

void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[bounded(rng, i)]);
}

std::vector<std::size_t> round_order(std::size_t n, std::uint64_t seed, std::size_t round,
                                     std::size_t ensemble_n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (ensemble_n > 1) seeded_shuffle(order, seed ^ static_cast<std::uint64_t>(round));
    return order;
}

RerankResult rerank(const Query& query, const RunList& candidates, const Corpus& corpus,
                    ScorerBackend& backend, const RerankConfig& config,
                    const protocol::PromptTemplate& tmpl, const WarningSink& warn) {
    config.validate();
    if (candidates.empty()) throw std::invalid_argument("no candidates to rerank for " + query.id);

    const std::size_t n = candidates.size();
    std::vector<const Document*> docs(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = corpus.find(candidates.entries[i].doc_id);
        if (it == corpus.end())
            throw std::invalid_argument("document '" + candidates.entries[i].doc_id +
                                        "' is not in the corpus");
        docs[i] = &it->second;
    }

    const bool sliding = config.mode == GroupingMode::SlidingWindow;
    const protocol::RenderOptions render_opts{std::max(config.group_size, config.window),
                                              config.prefer_rewritten_query};
    const protocol::ParseOptions parse_opts{config.clamp_out_of_range};
    const std::string tag = "grouprank_seed" + std::to_string(config.seed);

    ScoreAccumulator acc(n);
    RerankStats stats;

    auto emit = [&](bool partial) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (!partial || acc.count(i) > 0) idx.push_back(i);
        // stable sort keeps retrieval order among equal means
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return acc.mean(a) > acc.mean(b); });
        RunList run{candidates.query_id, {}, tag};
        for (auto i : idx) run.entries.push_back({candidates.entries[i].doc_id, 0, acc.mean(i)});
        run.renumber();
        return run;
    };

    for (std::size_t round = 1; round <= config.ensemble_n; ++round) {
        const auto order = round_order(n, config.seed, round, config.ensemble_n);
        const auto groups = sliding ? partition_sliding(n, config.window, config.step)
                                    : partition_disjoint(n, config.group_size);
        std::vector<GroupOutcome> outcomes(groups.size());
        std::atomic<bool> abort{false};

        detail::bounded_parallel_for(groups.size(), config.max_in_flight, [&](std::size_t g) {
            if (abort.load()) return;
            auto& out = outcomes[g];
            std::vector<Document> members;
            members.reserve(groups[g].size());
            for (auto i = groups[g].begin; i < groups[g].end; ++i) members.push_back(*docs[order[i]]);
            const auto prompt = protocol::render_group_prompt(tmpl, query, members, render_opts);

            for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
                std::string raw;
                try {
                    ++out.calls;
                    raw = backend.score_group(prompt);
                } catch (const std::exception& e) {
                    out.error = e.what();
                    abort.store(true);
                    return;
                }
                auto parsed = protocol::parse_response(raw, members.size(), parse_opts);
                if (parsed.score_map) {
                    out.scores = parsed.score_map->scores();
                    return;
                }
            }
            out.fallback = true;
            out.scores.assign(members.size(), 0);
        });

        // merge in group order; the sums do not depend on completion order
        std::string first_error;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            auto& out = outcomes[g];
            stats.backend_calls += out.calls;
            if (!out.error.empty()) {
                if (first_error.empty()) first_error = out.error;
                continue;
            }
            if (out.scores.empty()) continue;  // skipped after an abort
            ++stats.groups;
            if (out.fallback) {
                ++stats.failed_groups;
                if (warn)
                    warn("query " + query.id + ": group " + std::to_string(g + 1) + " of round " +
                         std::to_string(round) + " unparseable after " +
                         std::to_string(config.max_retries + 1) + " attempts; scored 0");
            }
            for (std::size_t j = 0; j < out.scores.size(); ++j)
                acc.add(order[groups[g].begin + j], out.scores[j]);
        }
        if (!first_error.empty())
            throw RerankAborted("query " + query.id + ": backend " + backend.identity() +
                                    " failed: " + first_error,
                                emit(true), stats);
    }

    RerankResult result{emit(false), stats};
    if (config.fuse_with_retriever)
        result.run = fusion::fuse_runs(result.run, candidates, config.w_rerank, config.w_retrieve);
    return result;
}

const std::vector<ParadigmInfo>& paradigms() {
    static const std::vector<ParadigmInfo> table = {
        {Paradigm::PointwiseQlm, "pointwise.qlm", false, true, "O(N)"},
        {Paradigm::PointwiseYesNo, "pointwise.yes_no", false, true, "O(N)"},
        {Paradigm::ListwiseGeneration, "listwise.generation", true, false, "O(r*(N/s))"},
        {Paradigm::ListwiseLikelihood, "listwise.likelihood", false, false, "O(r*(N/s))"},
        {Paradigm::PairwiseAllPair, "pairwise.allpair", true, true, "O(N^2-N)"},
        {Paradigm::PairwiseHeapsort, "pairwise.heapsort", true, false, "O(k*log2(N))"},
        {Paradigm::PairwiseBubblesort, "pairwise.bubblesort", true, false, "O(k*N)"},
        {Paradigm::SetwiseHeapsort, "setwise.heapsort", true, false, "O(k*log_c(N))"},
        {Paradigm::SetwiseBubblesort, "setwise.bubblesort", true, false, "O(k*(N/(c-1)))"},
        {Paradigm::Groupwise, "groupwise", true, true, "O(N/c)"},
    };
    return table;
}

const ParadigmInfo& info(Paradigm p) {
    for (const auto& row : paradigms())
        if (row.paradigm == p) return row;
    throw std::invalid_argument("unknown paradigm");
}

Paradigm parse_paradigm(std::string_view name) {
    for (const auto& row : paradigms())
        if (row.name == name) return row.paradigm;
    throw std::invalid_argument("unknown paradigm '" + std::string(name) + "'");
}

std::uint64_t estimate_llm_calls(Paradigm paradigm, const CostParams& p) {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    };
    need(p.n >= 1, "N must be >= 1");
    switch (paradigm) {
        case Paradigm::PointwiseQlm:
        case Paradigm::PointwiseYesNo:
            return p.n;
        case Paradigm::ListwiseGeneration:
        case Paradigm::ListwiseLikelihood:
            need(p.s >= 1 && p.r >= 1, "listwise needs s >= 1 and r >= 1");
            return p.r * ceil_div(p.n, p.s);
        case Paradigm::PairwiseAllPair:
            return p.n * p.n - p.n;
        case Paradigm::PairwiseHeapsort:
            need(p.k >= 1, "heapsort needs k >= 1");
            return p.k * ceil_log(2, p.n);
        case Paradigm::PairwiseBubblesort:
            need(p.k >= 1, "bubblesort needs k >= 1");
            return p.k * p.n;
        case Paradigm::SetwiseHeapsort:
            need(p.k >= 1 && p.c >= 2, "setwise heapsort needs k >= 1 and c >= 2");
            return p.k * ceil_log(p.c, p.n);
        case Paradigm::SetwiseBubblesort:
            need(p.k >= 1 && p.c >= 2, "setwise bubblesort needs k >= 1 and c >= 2");
            return p.k * ceil_div(p.n, p.c - 1);
        case Paradigm::Groupwise:
            need(p.c >= 1, "groupwise needs c >= 1");
            return ceil_div(p.n, p.c);
    }
    throw std::invalid_argument("unknown paradigm");
}

}  // namespace grouprank::orchestrator
