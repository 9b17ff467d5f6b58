#pragma once

// Scorer backends: anything that turns a prompt into a raw model response.
// Implementations must be safe to call from many threads at once.

#include <chrono>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "grouprank/core.hpp"

namespace grouprank {

/// The backend could not produce a response (transport failure, HTTP error,
/// malformed envelope) after its own retries.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ScorerBackend {
public:
    virtual ~ScorerBackend() = default;
    virtual std::string score_group(const std::string& prompt) = 0;
    virtual std::string identity() const = 0;
};

/// Wraps a callable. Thread safety is the callable's responsibility.
class CallbackBackend final : public ScorerBackend {
public:
    using Fn = std::function<std::string(const std::string&)>;
    CallbackBackend(Fn fn, std::string name = "callback")
        : fn_(std::move(fn)), name_(std::move(name)) {}
    std::string score_group(const std::string& prompt) override { return fn_(prompt); }
    std::string identity() const override { return name_; }

private:
    Fn fn_;
    std::string name_;
};

struct HttpBackendConfig {
    std::string url;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string api_key;  // sent as a Bearer token when non-empty
    double temperature = 0.0;
    std::chrono::milliseconds timeout{120'000};
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{1000};
    double backoff_factor = 2.0;
};

/// OpenAI-compatible chat-completions client. The prompt is sent as a single
/// user message; the first choice's message content is returned verbatim.
/// Transport errors, 429 and 5xx responses are retried with exponential
/// backoff; other failures throw BackendError immediately.
class HttpChatBackend final : public ScorerBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    std::string score_group(const std::string& prompt) override;
    std::string identity() const override;

    /// The request body for `prompt`.
    std::string build_request(const std::string& prompt) const;
    /// Extracts choices[0].message.content; throws BackendError otherwise.
    static std::string extract_content(const std::string& response_body);

private:
    HttpBackendConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

/// Answers every prompt kind from relevance judgments: groupwise prompts get
/// each passage's grade (capped at 10) as its score, pointwise prompts get
/// `Relevance score: <grade>.`, listwise prompts get passages ordered by
/// grade. Passages are matched to documents by exact text, queries by
/// exact text; anything unmatched scores 0. Expects the default templates
/// and single-line passage texts.
class QrelsOracleBackend final : public ScorerBackend {
public:
    QrelsOracleBackend(const std::vector<Query>& queries, const Corpus& corpus, Qrels qrels);
    std::string score_group(const std::string& prompt) override;
    std::string identity() const override { return "qrels-oracle"; }

private:
    int grade_for(const std::string& query_id, const std::string& passage) const;
    std::string query_id_for(const std::string& text) const;

    std::unordered_map<std::string, std::string> query_by_text_;
    std::unordered_map<std::string, std::vector<std::string>> docs_by_text_;
    Qrels qrels_;
};

}  // namespace grouprank
