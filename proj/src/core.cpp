#include "grouprank/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace grouprank {

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path, 0, "cannot open file");
    return in;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

template <typename T>
std::optional<T> parse_number(std::string_view field) {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
    return value;
}

std::optional<double> parse_real(std::string_view field) {
    // from_chars rejects a leading '+', which some tools emit
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    auto value = parse_number<double>(field);
    if (value && !std::isfinite(*value)) return std::nullopt;
    return value;
}

nlohmann::json parse_json_line(const std::string& line, const std::string& source,
                               std::size_t lineno) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError(source, lineno, "invalid JSON");
    if (!j.is_object()) throw FormatError(source, lineno, "expected a JSON object");
    return j;
}

std::string required_string(const nlohmann::json& j, const char* key, const std::string& source,
                            std::size_t lineno) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(source, lineno, std::string("missing field '") + key + "'");
    if (!it->is_string())
        throw FormatError(source, lineno, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

FormatError::FormatError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " +
                         what),
      line_(line) {}

WarningSink stderr_warnings() {
    return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

RunList RunList::from_scores(std::string query_id,
                             std::vector<std::pair<std::string, double>> scored, std::string tag) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    RunList run{std::move(query_id), {}, std::move(tag)};
    run.entries.reserve(scored.size());
    for (auto& [doc, score] : scored) run.entries.push_back({std::move(doc), 0, score});
    run.renumber();
    return run;
}

void RunList::renumber() {
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = static_cast<int>(i + 1);
}

std::vector<std::string> RunList::doc_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.doc_id);
    return ids;
}

void check_run_invariants(const RunList& run) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < run.entries.size(); ++i) {
        const auto& e = run.entries[i];
        if (e.rank != static_cast<int>(i + 1))
            throw std::invalid_argument("run " + run.query_id + ": rank " + std::to_string(e.rank) +
                                        " at position " + std::to_string(i + 1));
        if (i > 0 && e.score > run.entries[i - 1].score)
            throw std::invalid_argument("run " + run.query_id + ": score increases at rank " +
                                        std::to_string(e.rank));
        if (!seen.insert(e.doc_id).second)
            throw std::invalid_argument("run " + run.query_id + ": duplicate doc " + e.doc_id);
    }
}

std::optional<int> Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) throw std::invalid_argument("negative relevance grade");
    auto& docs = judgments_[query_id];
    auto [it, inserted] = docs.try_emplace(doc_id, grade);
    if (inserted) return std::nullopt;
    int previous = it->second;
    it->second = grade;
    return previous;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = judgments_.find(query_id);
    if (q == judgments_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
}

bool Qrels::has_query(const std::string& query_id) const {
    return judgments_.count(query_id) != 0;
}

const std::map<std::string, int>& Qrels::judged(const std::string& query_id) const {
    static const std::map<std::string, int> kEmpty;
    auto q = judgments_.find(query_id);
    return q == judgments_.end() ? kEmpty : q->second;
}

std::vector<std::string> Qrels::query_ids() const {
    std::vector<std::string> ids;
    for (const auto& [q, _] : judgments_) ids.push_back(q);
    return ids;
}

std::size_t Qrels::size() const {
    std::size_t n = 0;
    for (const auto& [_, docs] : judgments_) n += docs.size();
    return n;
}

GroupScoreMap::GroupScoreMap(std::vector<int> scores, std::string reason)
    : scores_(std::move(scores)), reason_(std::move(reason)) {
    if (scores_.empty()) throw std::invalid_argument("empty group score map");
    for (int s : scores_)
        if (s < kMinScore || s > kMaxScore)
            throw std::invalid_argument("group score " + std::to_string(s) + " outside [0,10]");
}

void check_training_record(const TrainingRecord& record, std::size_t expected_size) {
    const auto n = record.candidates.size();
    if (n == 0) throw std::invalid_argument("training record has no candidates");
    if (expected_size != 0 && n != expected_size)
        throw std::invalid_argument("training record has " + std::to_string(n) +
                                    " candidates, expected " + std::to_string(expected_size));
    std::vector<bool> seen(n + 1, false);
    for (const auto& c : record.candidates) {
        if (c.listwise_rank < 1 || static_cast<std::size_t>(c.listwise_rank) > n ||
            seen[c.listwise_rank])
            throw std::invalid_argument("listwise ranks are not a permutation of 1.." +
                                        std::to_string(n));
        seen[c.listwise_rank] = true;
        if (!(c.pointwise >= 0.0 && c.pointwise <= 10.0))
            throw std::invalid_argument("pointwise score outside [0,10]");
        if (!(c.gt_score >= 0.0 && c.gt_score <= 1.0))
            throw std::invalid_argument("gt_score outside [0,1]");
    }
}

std::string format_score(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw std::runtime_error("cannot format score");
    return std::string(buf, ptr);
}

std::vector<RunList> parse_run(std::istream& in, const std::string& source) {
    std::vector<RunList> order;
    std::unordered_map<std::string, std::size_t> by_query;
    std::unordered_map<std::string, std::vector<std::pair<std::string, double>>> scored;
    std::set<std::pair<std::string, std::string>> seen;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        auto f = split_ws(line);
        if (f.size() != 6)
            throw FormatError(source, lineno,
                              "expected 6 fields, found " + std::to_string(f.size()));
        std::string qid(f[0]), doc(f[2]);
        if (!parse_number<long long>(f[3]))
            throw FormatError(source, lineno, "non-integer rank '" + std::string(f[3]) + "'");
        auto score = parse_real(f[4]);
        if (!score) throw FormatError(source, lineno, "non-numeric score '" + std::string(f[4]) + "'");
        if (!seen.emplace(qid, doc).second)
            throw FormatError(source, lineno, "duplicate entry (" + qid + ", " + doc + ")");
        if (!by_query.count(qid)) {
            by_query.emplace(qid, order.size());
            order.push_back({qid, {}, std::string(f[5])});
        }
        scored[qid].emplace_back(std::move(doc), *score);
    }
    for (auto& run : order)
        run = RunList::from_scores(run.query_id, std::move(scored[run.query_id]), run.tag);
    return order;
}

std::vector<RunList> read_run_file(const std::string& path) {
    auto in = open_input(path);
    return parse_run(in, path);
}

void write_run(std::ostream& out, const RunList& run) {
    const std::string tag = run.tag.empty() ? "run" : run.tag;
    for (const auto& e : run.entries)
        out << run.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << format_score(e.score)
            << ' ' << tag << '\n';
}

void write_run_file(const std::string& path, const std::vector<RunList>& runs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& run : runs) write_run(out, run);
    if (!out) throw std::runtime_error("write failed: " + path);
}

Qrels parse_qrels(std::istream& in, const std::string& source, const WarningSink& warn) {
    Qrels qrels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        auto f = split_ws(line);
        if (f.size() != 4)
            throw FormatError(source, lineno,
                              "expected 4 fields, found " + std::to_string(f.size()));
        auto grade = parse_number<int>(f[3]);
        if (!grade) throw FormatError(source, lineno, "non-integer grade '" + std::string(f[3]) + "'");
        if (*grade < 0) throw FormatError(source, lineno, "negative grade " + std::to_string(*grade));
        std::string qid(f[0]), doc(f[2]);
        if (auto prev = qrels.set(qid, doc, *grade); prev && warn)
            warn(source + ":" + std::to_string(lineno) + ": duplicate judgment (" + qid + ", " +
                 doc + "), grade " + std::to_string(*prev) + " replaced by " +
                 std::to_string(*grade));
    }
    return qrels;
}

Qrels read_qrels(const std::string& path, const WarningSink& warn) {
    auto in = open_input(path);
    return parse_qrels(in, path, warn);
}

Corpus parse_corpus(std::istream& in, const std::string& source) {
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        auto j = parse_json_line(line, source, lineno);
        Document doc{required_string(j, "id", source, lineno),
                     required_string(j, "text", source, lineno)};
        if (doc.id.empty()) throw FormatError(source, lineno, "empty document id");
        std::string id = doc.id;
        if (!corpus.emplace(id, std::move(doc)).second)
            throw FormatError(source, lineno, "duplicate document id '" + id + "'");
    }
    return corpus;
}

Corpus read_corpus(const std::string& path) {
    auto in = open_input(path);
    return parse_corpus(in, path);
}

std::vector<Query> parse_queries(std::istream& in, const std::string& source) {
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        auto j = parse_json_line(line, source, lineno);
        Query q{required_string(j, "id", source, lineno), required_string(j, "text", source, lineno),
                std::nullopt};
        if (j.contains("rewritten_text") && !j["rewritten_text"].is_null())
            q.rewritten_text = required_string(j, "rewritten_text", source, lineno);
        if (q.id.empty()) throw FormatError(source, lineno, "empty query id");
        if (q.text.empty()) throw FormatError(source, lineno, "empty query text");
        if (!seen.insert(q.id).second)
            throw FormatError(source, lineno, "duplicate query id '" + q.id + "'");
        queries.push_back(std::move(q));
    }
    return queries;
}

std::vector<Query> read_queries(const std::string& path) {
    auto in = open_input(path);
    return parse_queries(in, path);
}

std::map<std::string, RunList> index_by_query(std::vector<RunList> runs) {
    std::map<std::string, RunList> out;
    for (auto& run : runs) {
        std::string qid = run.query_id;
        if (!out.emplace(qid, std::move(run)).second)
            throw std::invalid_argument("query '" + qid + "' appears twice");
    }
    return out;
}

}  // namespace grouprank
