#pragma once

// Shared domain types and the on-disk formats: TREC runs and qrels, JSONL
// corpora and queries.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace grouprank {

/// Raised when an input file does not follow its format. Carries the 1-based
/// line number when the failure is tied to one line (0 otherwise).
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& source, std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Receives non-fatal diagnostics (duplicate judgments, skipped items, ...).
using WarningSink = std::function<void(const std::string&)>;

/// Writes to stderr with a "warning: " prefix.
WarningSink stderr_warnings();

struct Query {
    std::string id;
    std::string text;
    std::optional<std::string> rewritten_text;

    /// Text to show a reranker: the rewritten variant if asked for and present.
    const std::string& prompt_text(bool prefer_rewritten) const {
        return prefer_rewritten && rewritten_text ? *rewritten_text : text;
    }
};

struct Document {
    std::string id;
    std::string text;
};

using Corpus = std::unordered_map<std::string, Document>;

/// A document with its per-source retrieval scores for one query.
struct Candidate {
    std::string doc_id;
    std::map<std::string, double> source_scores;
    std::optional<double> fused_score;
};

struct RunEntry {
    std::string doc_id;
    int rank = 0;
    double score = 0.0;
};

/// An ordered scored document list for one query. Ranks are 1..n and scores
/// never increase down the list.
struct RunList {
    std::string query_id;
    std::vector<RunEntry> entries;
    std::string tag;

    /// Sorts (doc_id, score) pairs by score descending, ties by doc_id
    /// ascending, and assigns contiguous ranks.
    static RunList from_scores(std::string query_id,
                               std::vector<std::pair<std::string, double>> scored,
                               std::string tag);

    /// Assigns ranks 1..n to entries already in final order.
    void renumber();

    std::vector<std::string> doc_ids() const;
    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }
};

/// Throws std::invalid_argument if ranks are not contiguous from 1, scores
/// increase down the list, or a doc id repeats.
void check_run_invariants(const RunList& run);

/// Graded relevance judgments. Unjudged pairs have grade 0.
class Qrels {
public:
    /// Returns the previous grade if the pair was already judged.
    std::optional<int> set(const std::string& query_id, const std::string& doc_id, int grade);

    int grade(const std::string& query_id, const std::string& doc_id) const;
    bool has_query(const std::string& query_id) const;

    /// All judged (doc_id, grade) pairs for one query, doc_id ordered.
    const std::map<std::string, int>& judged(const std::string& query_id) const;

    std::vector<std::string> query_ids() const;
    bool empty() const noexcept { return judgments_.empty(); }
    std::size_t size() const;

private:
    std::map<std::string, std::map<std::string, int>> judgments_;
};

/// Per-position integer scores in [0,10] for one group. Position i (1-based)
/// is stored at index i-1.
class GroupScoreMap {
public:
    static constexpr int kMinScore = 0;
    static constexpr int kMaxScore = 10;

    GroupScoreMap() = default;
    /// Throws std::invalid_argument if empty or any score leaves [0,10].
    explicit GroupScoreMap(std::vector<int> scores, std::string reason = {});

    int at_position(std::size_t position) const { return scores_.at(position - 1); }
    const std::vector<int>& scores() const noexcept { return scores_; }
    const std::string& reason() const noexcept { return reason_; }
    std::size_t size() const noexcept { return scores_.size(); }

private:
    std::vector<int> scores_;
    std::string reason_;
};

struct TrainingCandidate {
    Document doc;
    double pointwise = 0.0;  // teacher score in [0,10]
    int listwise_rank = 0;   // 1-based teacher rank
    double gt_score = 0.0;   // fused label in [0,1]
};

/// One query with its annotated candidate list.
struct TrainingRecord {
    Query query;
    std::vector<TrainingCandidate> candidates;
};

/// Throws std::invalid_argument unless ranks form a permutation of 1..n and
/// every score lies in range. `expected_size` of 0 accepts any non-empty size.
void check_training_record(const TrainingRecord& record, std::size_t expected_size = 50);

/// Shortest decimal representation that parses back to the same double.
std::string format_score(double value);

// --- readers and writers -------------------------------------------------

/// Reads a 6-column TREC run (`qid Q0 docid rank score tag`). Entries are
/// re-sorted by score (ties by doc id) and re-ranked; the file's rank column
/// is ignored. Queries appear in first-seen order.
std::vector<RunList> read_run_file(const std::string& path);
std::vector<RunList> parse_run(std::istream& in, const std::string& source = "<stream>");

void write_run(std::ostream& out, const RunList& run);
void write_run_file(const std::string& path, const std::vector<RunList>& runs);

/// Reads 4-column TREC qrels (`qid 0 docid grade`). A repeated pair keeps the
/// later grade and emits a warning.
Qrels read_qrels(const std::string& path, const WarningSink& warn = stderr_warnings());
Qrels parse_qrels(std::istream& in, const std::string& source = "<stream>",
                  const WarningSink& warn = stderr_warnings());

/// JSON-lines corpus, one `{"id": ..., "text": ...}` per line.
Corpus read_corpus(const std::string& path);
Corpus parse_corpus(std::istream& in, const std::string& source = "<stream>");

/// JSON-lines queries: `{"id", "text"[, "rewritten_text"]}`. File order kept.
std::vector<Query> read_queries(const std::string& path);
std::vector<Query> parse_queries(std::istream& in, const std::string& source = "<stream>");

/// Groups runs by query id; throws on a repeated query.
std::map<std::string, RunList> index_by_query(std::vector<RunList> runs);

}  // namespace grouprank
