#pragma once

// Groupwise reranking of a retriever run: candidates are cut into groups
// (disjoint or sliding windows), each group is scored by one backend call,
// and per-document integer scores are averaged across windows and
// self-ensemble rounds.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grouprank/backend.hpp"
#include "grouprank/config.hpp"
#include "grouprank/core.hpp"
#include "grouprank/protocol.hpp"

namespace grouprank::orchestrator {

enum class GroupingMode { Disjoint, SlidingWindow };

std::string_view to_string(GroupingMode mode);
/// Accepts "disjoint"/"disjoint-groups" and "sliding"/"sliding-window".
GroupingMode parse_grouping_mode(std::string_view text);

struct RerankConfig {
    std::size_t group_size = 20;  // c, documents per request in disjoint mode
    std::size_t window = 20;      // w
    std::size_t step = 10;        // s
    std::size_t ensemble_n = 1;
    std::uint64_t seed = 0;
    std::size_t max_retries = 2;  // extra attempts after an unparseable response
    GroupingMode mode = GroupingMode::Disjoint;
    std::size_t max_in_flight = 8;
    bool prefer_rewritten_query = false;
    bool clamp_out_of_range = false;
    // Optional final fusion with the retriever run.
    bool fuse_with_retriever = false;
    double w_rerank = 0.6;
    double w_retrieve = 0.4;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;

    /// Overrides fields from keys named like the members above
    /// (group_size, window, step, ensemble_n, seed, max_retries, mode,
    /// max_in_flight, prefer_rewritten_query, clamp_out_of_range,
    /// fuse_with_retriever, w_rerank, w_retrieve).
    void apply(const KeyValues& kv);
};

/// Half-open index range [begin, end) into the candidate order.
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// ceil(n / c) contiguous groups; the last may be short.
std::vector<IndexRange> partition_disjoint(std::size_t n, std::size_t group_size);

/// Windows at offsets 0, s, 2s, ... while they fit, plus a tail-aligned
/// window ending at n when the last full window stops short. n <= w gives a
/// single window.
std::vector<IndexRange> partition_sliding(std::size_t n, std::size_t window, std::size_t step);

/// Per-document running sums; addition is commutative, so merge order does
/// not affect the result.
class ScoreAccumulator {
public:
    explicit ScoreAccumulator(std::size_t n) : sum_(n, 0.0), count_(n, 0) {}
    void add(std::size_t index, double score) {
        sum_.at(index) += score;
        ++count_.at(index);
    }
    std::size_t count(std::size_t index) const { return count_.at(index); }
    double mean(std::size_t index) const;
    std::size_t size() const noexcept { return sum_.size(); }

private:
    std::vector<double> sum_;
    std::vector<std::size_t> count_;
};

struct RerankStats {
    std::size_t backend_calls = 0;
    std::size_t groups = 0;
    std::size_t failed_groups = 0;  // fell back to all-zero scores
};

struct RerankResult {
    RunList run;
    RerankStats stats;
};

/// The backend failed outright. `partial` ranks every document that received
/// at least one score before the failure.
class RerankAborted : public std::runtime_error {
public:
    RerankAborted(const std::string& what, RunList partial, RerankStats stats)
        : std::runtime_error(what), partial(std::move(partial)), stats(stats) {}
    RunList partial;
    RerankStats stats;
};

/// Candidate order for one ensemble round: retrieval order when only one
/// round runs, otherwise a seeded shuffle (seed xor round).
std::vector<std::size_t> round_order(std::size_t n, std::uint64_t seed, std::size_t round,
                                     std::size_t ensemble_n);

/// Deterministic Fisher-Yates shuffle driven by mt19937_64; identical output
/// on every platform for the same seed.
void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed);

RerankResult rerank(const Query& query, const RunList& candidates, const Corpus& corpus,
                    ScorerBackend& backend, const RerankConfig& config,
                    const protocol::PromptTemplate& tmpl = protocol::PromptTemplate::default_groupwise(),
                    const WarningSink& warn = stderr_warnings());

enum class Paradigm {
    PointwiseQlm,
    PointwiseYesNo,
    ListwiseGeneration,
    ListwiseLikelihood,
    PairwiseAllPair,
    PairwiseHeapsort,
    PairwiseBubblesort,
    SetwiseHeapsort,
    SetwiseBubblesort,
    Groupwise,
};

struct ParadigmInfo {
    Paradigm paradigm;
    std::string_view name;
    bool generate;
    bool batching;
    std::string_view complexity;
};

/// Every row of the cost table, in table order.
const std::vector<ParadigmInfo>& paradigms();
const ParadigmInfo& info(Paradigm p);
Paradigm parse_paradigm(std::string_view name);

struct CostParams {
    std::uint64_t n = 100;  // documents to rerank
    std::uint64_t c = 20;   // documents compared per call
    std::uint64_t w = 20;   // window
    std::uint64_t s = 10;   // window step
    std::uint64_t k = 10;   // top documents wanted
    std::uint64_t r = 1;    // repeats
};

/// Worst-case LLM calls; divisions and logarithms round up. Throws
/// std::invalid_argument for parameters the formula cannot use.
std::uint64_t estimate_llm_calls(Paradigm paradigm, const CostParams& params);

}  // namespace grouprank::orchestrator
