#include "grouprank/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace grouprank::protocol {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + needle.size()))
        ++n;
    return n;
}

/// Strips one ```lang ... ``` fence if the body is wrapped in one.
std::string_view strip_fence(std::string_view body) {
    body = trim(body);
    if (body.substr(0, 3) != "```") return body;
    auto eol = body.find('\n');
    if (eol == std::string_view::npos) {
        // single-line fence: ```json {...}```
        body.remove_prefix(3);
        auto lang_end = body.find_first_of("{[ \t");
        if (lang_end == std::string_view::npos) return body;
        body.remove_prefix(lang_end);
    } else {
        body.remove_prefix(eol + 1);
    }
    body = trim(body);
    if (body.size() >= 3 && body.substr(body.size() - 3) == "```") body.remove_suffix(3);
    return trim(body);
}

/// Parses JSON without throwing; flags repeated keys in the top-level object.
json parse_strict(std::string_view text, bool& duplicate_key) {
    std::vector<std::unordered_set<std::string>> keys_by_depth;
    duplicate_key = false;
    json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
        const auto d = static_cast<std::size_t>(depth);
        if (event == json::parse_event_t::object_start) {
            if (keys_by_depth.size() <= d) keys_by_depth.resize(d + 1);
            keys_by_depth[d].clear();
        } else if (event == json::parse_event_t::key && d == 1 && parsed.is_string()) {
            if (keys_by_depth.empty()) keys_by_depth.resize(1);
            if (!keys_by_depth[0].insert(parsed.get<std::string>()).second) duplicate_key = true;
        }
        return true;
    };
    return json::parse(text.begin(), text.end(), cb, false);
}

struct Region {
    std::size_t open = 0;   // index of the opening tag
    std::size_t body = 0;   // first byte after the opening tag
    std::size_t close = 0;  // index of the closing tag
};

std::optional<Region> single_region(std::string_view raw, std::string_view open_tag,
                                    std::string_view close_tag) {
    if (count_occurrences(raw, open_tag) != 1 || count_occurrences(raw, close_tag) != 1)
        return std::nullopt;
    Region r;
    r.open = raw.find(open_tag);
    r.body = r.open + open_tag.size();
    r.close = raw.find(close_tag);
    if (r.close < r.body) return std::nullopt;
    return r;
}

std::string substitute(std::string_view text,
                       std::span<const std::pair<std::string_view, std::string>> values) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            bool replaced = false;
            for (const auto& [name, value] : values) {
                if (text.compare(i + 1, name.size(), name) == 0 &&
                    i + 1 + name.size() < text.size() && text[i + 1 + name.size()] == '}') {
                    out += value;
                    i += name.size() + 2;
                    replaced = true;
                    break;
                }
            }
            if (replaced) continue;
        }
        out += text[i++];
    }
    return out;
}

bool has_placeholder(std::string_view text, std::string_view name) {
    return text.find("{" + std::string(name) + "}") != std::string_view::npos;
}

void expect_kind(const PromptTemplate& tmpl, PromptKind kind) {
    if (tmpl.kind() != kind) throw ProtocolError("prompt template has the wrong kind");
}

}  // namespace

std::vector<std::string_view> required_placeholders(PromptKind kind) {
    switch (kind) {
        case PromptKind::Groupwise: return {"TOPK", "QUERY", "PASSAGES"};
        case PromptKind::Pointwise: return {"your_query", "your_passage"};
        case PromptKind::Listwise: return {"your_query", "your_passages_list"};
    }
    return {};
}

PromptTemplate::PromptTemplate(PromptKind kind, std::string system_text, std::string user_text)
    : kind_(kind), system_(std::move(system_text)), user_(std::move(user_text)) {
    for (auto name : required_placeholders(kind_))
        if (!has_placeholder(user_, name))
            throw ProtocolError("prompt template lacks placeholder {" + std::string(name) + "}");
}

PromptTemplate PromptTemplate::from_file(PromptKind kind, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ProtocolError("cannot open prompt template " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return {kind, {}, ss.str()};
}

std::string PromptTemplate::render(
    std::span<const std::pair<std::string_view, std::string>> values) const {
    std::string user = substitute(user_, values);
    if (system_.empty()) return user;
    return substitute(system_, values) + "\n\n" + user;
}

std::string render_passages(std::span<const Document> docs) {
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i) out += '\n';
        out += '[' + std::to_string(i + 1) + "] " + docs[i].text;
    }
    return out;
}

std::string render_group_prompt(const PromptTemplate& tmpl, const Query& query,
                                std::span<const Document> docs, const RenderOptions& opts) {
    expect_kind(tmpl, PromptKind::Groupwise);
    if (docs.empty()) throw ProtocolError("cannot render a prompt for an empty group");
    if (docs.size() > opts.max_group_size)
        throw ProtocolError("group of " + std::to_string(docs.size()) + " exceeds max size " +
                            std::to_string(opts.max_group_size));
    const std::pair<std::string_view, std::string> values[] = {
        {"TOPK", std::to_string(docs.size())},
        {"QUERY", query.prompt_text(opts.prefer_rewritten_query)},
        {"PASSAGES", render_passages(docs)},
    };
    return tmpl.render(values);
}

ParsedResponse parse_response(std::string_view raw, std::size_t expected_n,
                              const ParseOptions& opts) noexcept {
    ParsedResponse out;
    try {
        auto reason = single_region(raw, "<reason>", "</reason>");
        auto answer = single_region(raw, "<answer>", "</answer>");
        if (!reason || !answer) {
            out.detail = "expected exactly one <reason> and one <answer> region";
            return out;
        }
        const bool disjoint = reason->close < answer->open || answer->close < reason->open;
        if (!disjoint) {
            out.detail = "<reason> and <answer> regions overlap";
            return out;
        }
        out.verdict.output_format_ok = true;

        auto body = strip_fence(raw.substr(answer->body, answer->close - answer->body));
        bool duplicate = false;
        json j = parse_strict(body, duplicate);
        if (j.is_discarded() || !j.is_object()) {
            out.detail = "answer is not a JSON object";
            return out;
        }
        if (duplicate) {
            out.detail = "answer repeats a key";
            return out;
        }
        if (expected_n == 0 || j.size() != expected_n) {
            out.detail = "answer has " + std::to_string(j.size()) + " keys, expected " +
                         std::to_string(expected_n);
            return out;
        }
        std::vector<int> scores(expected_n);
        for (std::size_t i = 1; i <= expected_n; ++i) {
            const std::string key = "[" + std::to_string(i) + "]";
            auto it = j.find(key);
            if (it == j.end()) {
                out.detail = "answer lacks key \"" + key + "\"";
                return out;
            }
            if (!it->is_number_integer()) {
                out.detail = "score for \"" + key + "\" is not an integer";
                return out;
            }
            long long v = it->is_number_unsigned()
                              ? static_cast<long long>(std::min<std::uint64_t>(
                                    it->get<std::uint64_t>(), 1u << 30))
                              : it->get<long long>();
            if (v < GroupScoreMap::kMinScore || v > GroupScoreMap::kMaxScore) {
                if (!opts.clamp_out_of_range) {
                    out.detail = "score for \"" + key + "\" outside [0,10]";
                    return out;
                }
                v = std::clamp<long long>(v, GroupScoreMap::kMinScore, GroupScoreMap::kMaxScore);
            }
            scores[i - 1] = static_cast<int>(v);
        }
        std::string reason_text(
            trim(raw.substr(reason->body, reason->close - reason->body)));
        out.score_map.emplace(std::move(scores), std::move(reason_text));
        out.verdict.answer_format_ok = true;
    } catch (const std::exception& e) {
        out.verdict.answer_format_ok = false;
        out.score_map.reset();
        out.detail = std::string("parse failure: ") + e.what();
    } catch (...) {
        out.verdict.answer_format_ok = false;
        out.score_map.reset();
        out.detail = "parse failure";
    }
    return out;
}

std::string render_pointwise_prompt(const Query& query, const Document& doc,
                                    const PromptTemplate& tmpl, bool prefer_rewritten) {
    expect_kind(tmpl, PromptKind::Pointwise);
    const std::pair<std::string_view, std::string> values[] = {
        {"your_query", query.prompt_text(prefer_rewritten)},
        {"your_passage", doc.text},
    };
    return tmpl.render(values);
}

std::optional<int> parse_pointwise(std::string_view raw) noexcept {
    constexpr std::string_view kPrefix = "Relevance score:";
    auto s = trim(raw);
    if (s.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
    s.remove_prefix(kPrefix.size());
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits == 0 || digits > 2 || s.substr(digits) != ".") return std::nullopt;
    int value = 0;
    for (std::size_t i = 0; i < digits; ++i) value = value * 10 + (s[i] - '0');
    if (value > 10) return std::nullopt;
    return value;
}

std::string render_listwise_prompt(const Query& query, std::span<const Document> docs,
                                   const PromptTemplate& tmpl, bool prefer_rewritten) {
    expect_kind(tmpl, PromptKind::Listwise);
    if (docs.empty()) throw ProtocolError("cannot render a listwise prompt without passages");
    const std::pair<std::string_view, std::string> values[] = {
        {"your_query", query.prompt_text(prefer_rewritten)},
        {"your_passages_list", render_passages(docs)},
    };
    return tmpl.render(values);
}

ListwiseRanking parse_listwise(std::string_view raw, std::size_t expected_n) {
    std::optional<json> array;
    std::vector<std::size_t> fences;
    for (auto pos = raw.find("```"); pos != std::string_view::npos; pos = raw.find("```", pos + 3))
        fences.push_back(pos);
    for (std::size_t f = 0; f + 1 < fences.size(); f += 2) {
        auto block = strip_fence(raw.substr(fences[f], fences[f + 1] + 3 - fences[f]));
        bool dup = false;
        json j = parse_strict(block, dup);
        if (!j.is_discarded() && j.is_array()) array = std::move(j);
    }
    if (!array) {
        bool dup = false;
        json j = parse_strict(trim(raw), dup);
        if (!j.is_discarded() && j.is_array()) array = std::move(j);
    }
    if (!array) throw ProtocolError("listwise response has no JSON array");
    if (array->size() != expected_n)
        throw ProtocolError("listwise array has " + std::to_string(array->size()) +
                            " entries, expected " + std::to_string(expected_n));

    ListwiseRanking out;
    out.ranks.assign(expected_n, 0);
    for (std::size_t pos = 0; pos < array->size(); ++pos) {
        const auto& v = (*array)[pos];
        if (!v.is_number_integer()) throw ProtocolError("listwise array holds a non-integer");
        const long long id = v.get<long long>();
        if (id < 1 || static_cast<std::size_t>(id) > expected_n || out.ranks[id - 1] != 0)
            throw ProtocolError("listwise array is not a permutation of 1.." +
                                std::to_string(expected_n));
        out.ranks[id - 1] = static_cast<int>(pos + 1);
        out.order.push_back(static_cast<int>(id));
    }
    return out;
}

std::string format_group_response(std::span<const int> scores, std::string_view reason) {
    json answer = json::object();
    for (std::size_t i = 0; i < scores.size(); ++i)
        answer["[" + std::to_string(i + 1) + "]"] = scores[i];
    std::string out = "<reason>\n";
    out += reason;
    out += "\n</reason>\n<answer>\n```json\n" + answer.dump() + "\n```\n</answer>";
    return out;
}

}  // namespace grouprank::protocol
