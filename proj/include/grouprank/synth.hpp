#pragma once

// Training-data synthesis: hybrid BM25 + dense candidate lists, pointwise and
// listwise teacher annotation, and label fusion into TrainingRecords.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "grouprank/backend.hpp"
#include "grouprank/config.hpp"
#include "grouprank/core.hpp"
#include "grouprank/protocol.hpp"

namespace grouprank::synth {

struct SynthConfig {
    std::size_t top_k_in = 100;  // taken from each retriever run
    std::size_t top_k_out = 50;  // candidates kept per query
    double w_sparse = 0.5;
    double w_dense = 0.5;
    double alpha = 0.5;  // pointwise share of the fused label
    std::size_t max_retries = 2;
    std::size_t max_in_flight = 8;
    bool prefer_rewritten_query = false;

    void validate() const;
    /// Keys: top_k_in, top_k_out, w_sparse, w_dense, alpha, max_retries,
    /// max_in_flight, prefer_rewritten_query.
    void apply(const KeyValues& kv);
};

/// Union of the top `top_k_in` of each run, scored by the hybrid formula
/// (a run that lacks a doc contributes 0), best `top_k_out` returned in fused
/// order. Ties break by best retrieval rank, then doc id.
std::vector<Candidate> build_candidates(const RunList& bm25, const RunList& dense,
                                        std::size_t top_k_in = 100, std::size_t top_k_out = 50,
                                        double w_sparse = 0.5, double w_dense = 0.5);

/// 64-bit FNV-1a of the prompt, as 16 hex digits.
std::string prompt_hash(std::string_view prompt);

/// Append-only JSONL record of finished teacher calls, so an interrupted run
/// can resume without paying for them again. Safe to share across threads.
class Journal {
public:
    /// Loads existing entries (a torn final line is ignored with a warning)
    /// and opens the file for appending.
    explicit Journal(const std::string& path, const WarningSink& warn = stderr_warnings());
    /// In-memory journal, nothing persisted.
    Journal() = default;

    std::optional<int> pointwise(const std::string& query_id, const std::string& doc_id,
                                 const std::string& hash) const;
    std::optional<std::vector<int>> listwise(const std::string& query_id,
                                             const std::string& hash) const;

    void record_pointwise(const std::string& query_id, const std::string& doc_id,
                          const std::string& hash, int score);
    void record_listwise(const std::string& query_id, const std::string& hash,
                         const std::vector<int>& ranks);

    std::size_t size() const;

private:
    void append(const std::string& line);

    mutable std::mutex mu_;
    std::map<std::tuple<std::string, std::string, std::string>, int> pointwise_;
    std::map<std::pair<std::string, std::string>, std::vector<int>> listwise_;
    std::unique_ptr<std::ofstream> out_;
};

struct PointwiseAnnotation {
    std::vector<int> scores;          // 0..10, one per document
    std::vector<std::size_t> failed;  // indices that fell back to 0
    std::size_t backend_calls = 0;
    std::size_t reused = 0;  // answered from the journal
};

/// One pointwise call per document, concurrently. Unparseable answers are
/// retried, then scored 0 with a warning. BackendError propagates.
PointwiseAnnotation annotate_pointwise(const Query& query, std::span<const Document> docs,
                                       ScorerBackend& backend, const SynthConfig& config,
                                       Journal* journal = nullptr,
                                       const protocol::PromptTemplate& tmpl =
                                           protocol::PromptTemplate::default_pointwise(),
                                       const WarningSink& warn = stderr_warnings());

struct ListwiseAnnotation {
    std::optional<std::vector<int>> ranks;  // ranks[i] for document i; nullopt = skipped
    std::size_t backend_calls = 0;
    bool reused = false;
};

/// One listwise call over all documents, retried on an invalid permutation.
/// Persistent failure leaves `ranks` empty (the query is skipped).
ListwiseAnnotation annotate_listwise(const Query& query, std::span<const Document> docs,
                                     ScorerBackend& backend, const SynthConfig& config,
                                     Journal* journal = nullptr,
                                     const protocol::PromptTemplate& tmpl =
                                         protocol::PromptTemplate::default_listwise(),
                                     const WarningSink& warn = stderr_warnings());

/// Fuses teacher labels into a record and checks its invariants.
TrainingRecord make_training_record(const Query& query, std::span<const Document> docs,
                                    std::span<const int> pointwise, std::span<const int> ranks,
                                    double alpha = 0.5);

/// {query_id, query_text, candidates: [{doc_id, text, pointwise, listwise_rank, gt_score}]}
void write_training_record(std::ostream& out, const TrainingRecord& record);
std::vector<TrainingRecord> read_training_records(std::istream& in,
                                                  const std::string& source = "<stream>");

struct SynthesisSummary {
    std::size_t records = 0;
    std::vector<std::string> skipped;  // query ids
    std::size_t pointwise_calls = 0;
    std::size_t listwise_calls = 0;
    std::size_t reused = 0;
};

struct Teachers {
    ScorerBackend& pointwise;
    ScorerBackend& listwise;
};

/// Runs the whole pipeline for every query that has both runs, writing one
/// record per line to `out` in query order.
SynthesisSummary synthesize(const std::vector<Query>& queries,
                            const std::map<std::string, RunList>& bm25_runs,
                            const std::map<std::string, RunList>& dense_runs, const Corpus& corpus,
                            Teachers teachers, const SynthConfig& config, Journal& journal,
                            std::ostream& out, const WarningSink& warn = stderr_warnings());

}  // namespace grouprank::synth
