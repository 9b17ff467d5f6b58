#pragma once

// Prompt assembly and response parsing for the three annotation/scoring
// protocols: groupwise reranking, pointwise labeling, listwise labeling.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grouprank/core.hpp"
#include "grouprank/rewards.hpp"

namespace grouprank::protocol {

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PromptKind { Groupwise, Pointwise, Listwise };

/// Placeholders every template of `kind` must carry in its user text.
std::vector<std::string_view> required_placeholders(PromptKind kind);

/// System text is rendered first, separated from the user text by a blank
/// line. Placeholders are literal `{NAME}` tokens.
class PromptTemplate {
public:
    /// Throws ProtocolError if a required placeholder is missing.
    PromptTemplate(PromptKind kind, std::string system_text, std::string user_text);

    static PromptTemplate default_groupwise();
    static PromptTemplate default_pointwise();
    static PromptTemplate default_listwise();
    static PromptTemplate defaults(PromptKind kind);

    /// Whole file becomes the user text.
    static PromptTemplate from_file(PromptKind kind, const std::string& path);

    PromptKind kind() const noexcept { return kind_; }
    const std::string& system_text() const noexcept { return system_; }
    const std::string& user_text() const noexcept { return user_; }

    /// Single-pass substitution; substituted values are never rescanned.
    std::string render(std::span<const std::pair<std::string_view, std::string>> values) const;

private:
    PromptKind kind_;
    std::string system_;
    std::string user_;
};

struct RenderOptions {
    std::size_t max_group_size = 100;
    bool prefer_rewritten_query = false;
};

/// `[1] text` ... `[n] text`, one per line.
std::string render_passages(std::span<const Document> docs);

/// Throws ProtocolError on an empty group, one over max_group_size, or a
/// template of the wrong kind.
std::string render_group_prompt(const PromptTemplate& tmpl, const Query& query,
                                std::span<const Document> docs, const RenderOptions& opts = {});

struct ParseOptions {
    /// Clamp out-of-range scores into [0,10] instead of rejecting the answer.
    bool clamp_out_of_range = false;
};

struct ParsedResponse {
    rewards::FormatVerdict verdict;
    std::optional<GroupScoreMap> score_map;  // present iff answer_format_ok
    std::string detail;                      // first failure reason, empty on success
};

/// Never throws on any input; every failure is folded into the verdict.
ParsedResponse parse_response(std::string_view raw, std::size_t expected_n,
                              const ParseOptions& opts = {}) noexcept;

std::string render_pointwise_prompt(const Query& query, const Document& doc,
                                    const PromptTemplate& tmpl = PromptTemplate::default_pointwise(),
                                    bool prefer_rewritten_query = false);

/// Accepts `Relevance score: X.` with X in 0..10, surrounding whitespace
/// allowed. nullopt on anything else.
std::optional<int> parse_pointwise(std::string_view raw) noexcept;

std::string render_listwise_prompt(const Query& query, std::span<const Document> docs,
                                   const PromptTemplate& tmpl = PromptTemplate::default_listwise(),
                                   bool prefer_rewritten_query = false);

struct ListwiseRanking {
    std::vector<int> order;  // passage ids, most valuable first
    std::vector<int> ranks;  // ranks[i] is the rank of passage i+1
};

/// Takes the last fenced JSON array in the response (or the whole response
/// when it is a bare array). Throws ProtocolError when the array is missing,
/// has the wrong length, or is not a permutation of 1..expected_n.
ListwiseRanking parse_listwise(std::string_view raw, std::size_t expected_n);

/// Builds a well-formed groupwise response, e.g. for mock backends.
std::string format_group_response(std::span<const int> scores, std::string_view reason = "");

}  // namespace grouprank::protocol
