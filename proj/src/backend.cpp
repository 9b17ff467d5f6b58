#include "grouprank/backend.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "grouprank/protocol.hpp"

namespace grouprank {

namespace {

using nlohmann::json;

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::string between(const std::string& text, std::string_view start, std::string_view end) {
    auto a = text.find(start);
    if (a == std::string::npos) return {};
    a += start.size();
    auto b = end.empty() ? std::string::npos : text.find(end, a);
    return text.substr(a, b == std::string::npos ? std::string::npos : b - a);
}

/// Splits a `[1] ...\n[2] ...` block back into passage texts.
std::vector<std::string> split_passages(const std::string& block) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (int i = 1;; ++i) {
        const std::string marker = "[" + std::to_string(i) + "] ";
        if (block.compare(pos, marker.size(), marker) != 0) break;
        const std::size_t start = pos + marker.size();
        const std::string next = "\n[" + std::to_string(i + 1) + "] ";
        auto end = block.find(next, start);
        out.push_back(block.substr(start, end == std::string::npos ? std::string::npos : end - start));
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    return out;
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    const auto& url = config_.url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw BackendError("backend URL lacks a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
    if (config_.max_attempts < 1) config_.max_attempts = 1;
}

std::string HttpChatBackend::identity() const { return "http:" + config_.model; }

std::string HttpChatBackend::build_request(const std::string& prompt) const {
    json body = {
        {"model", config_.model},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
        {"temperature", config_.temperature},
    };
    return body.dump();
}

std::string HttpChatBackend::extract_content(const std::string& response_body) {
    auto j = json::parse(response_body, nullptr, false);
    if (j.is_discarded()) throw BackendError("backend returned invalid JSON");
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw BackendError("message content is not a string");
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("unexpected chat response shape: ") + e.what());
    }
}

std::string HttpChatBackend::score_group(const std::string& prompt) {
    const std::string body = build_request(prompt);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto delay = config_.backoff_base;
    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        httplib::Client client(scheme_host_port_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
            config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        auto res = client.Post(path_, headers, body, "application/json");
        if (res && res->status == 200) return extract_content(res->body);
        if (res && !retryable_status(res->status))
            throw BackendError("backend answered HTTP " + std::to_string(res->status) + ": " +
                               res->body.substr(0, 200));
        last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
        if (attempt < config_.max_attempts) {
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(delay.count()) * config_.backoff_factor));
        }
    }
    throw BackendError("backend unreachable after " + std::to_string(config_.max_attempts) +
                       " attempts: " + last_error);
}

QrelsOracleBackend::QrelsOracleBackend(const std::vector<Query>& queries, const Corpus& corpus,
                                       Qrels qrels)
    : qrels_(std::move(qrels)) {
    for (const auto& q : queries) {
        query_by_text_.emplace(q.text, q.id);
        if (q.rewritten_text) query_by_text_.emplace(*q.rewritten_text, q.id);
    }
    for (const auto& [id, doc] : corpus) docs_by_text_[doc.text].push_back(id);
}

std::string QrelsOracleBackend::query_id_for(const std::string& text) const {
    auto it = query_by_text_.find(text);
    return it == query_by_text_.end() ? std::string() : it->second;
}

int QrelsOracleBackend::grade_for(const std::string& query_id, const std::string& passage) const {
    auto it = docs_by_text_.find(passage);
    if (it == docs_by_text_.end()) return 0;
    int best = 0;
    for (const auto& doc : it->second) best = std::max(best, qrels_.grade(query_id, doc));
    return std::min(best, GroupScoreMap::kMaxScore);
}

std::string QrelsOracleBackend::score_group(const std::string& prompt) {
    if (prompt.find("Here is the document:\n") != std::string::npos) {
        auto qid = query_id_for(between(prompt, "Here is the query:\n", "\n\nHere is the document:"));
        auto text = between(prompt, "Here is the document:\n", "\n\nNote that your answer");
        return "Relevance score: " + std::to_string(grade_for(qid, text)) + ".";
    }
    if (prompt.find("Here are the passages to evaluate:\n") != std::string::npos) {
        auto qid = query_id_for(
            between(prompt, "The user's query is:\n", "\n\nHere are the passages to evaluate:"));
        auto passages = split_passages(between(prompt, "Here are the passages to evaluate:\n", ""));
        std::vector<int> grades;
        for (const auto& p : passages) grades.push_back(grade_for(qid, p));
        std::vector<int> order(passages.size());
        std::iota(order.begin(), order.end(), 1);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return grades[a - 1] > grades[b - 1]; });
        return "Ordered by judged relevance.\n```json\n" + json(order).dump() + "\n```";
    }
    auto qid = query_id_for(between(prompt, "Query:\n", "\n\nDocuments:\n"));
    auto passages = split_passages(between(prompt, "Documents:\n", "\n\n## Final Output Format"));
    std::vector<int> scores;
    for (const auto& p : passages) scores.push_back(grade_for(qid, p));
    return protocol::format_group_response(scores, "Scores copied from relevance judgments.");
}

}  // namespace grouprank
