#include "grouprank/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <unordered_map>

#include <json.hpp>

#include "grouprank/fusion.hpp"
#include "parallel.hpp"

namespace grouprank::synth {

namespace {

using nlohmann::json;

struct SourceView {
    std::unordered_map<std::string, double> normalized;
    std::unordered_map<std::string, double> raw;
    std::unordered_map<std::string, int> rank;
};

SourceView top_of(const RunList& run, std::size_t k) {
    SourceView view;
    const std::size_t n = std::min(k, run.size());
    if (n == 0) return view;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) scores.push_back(run.entries[i].score);
    auto norm = fusion::minmax_normalize(scores);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = run.entries[i];
        view.normalized.emplace(e.doc_id, norm[i]);
        view.raw.emplace(e.doc_id, e.score);
        view.rank.emplace(e.doc_id, static_cast<int>(i + 1));
    }
    return view;
}

}  // namespace

void SynthConfig::validate() const {
    if (top_k_in == 0 || top_k_out == 0) throw std::invalid_argument("top_k values must be positive");
    if (!(w_sparse >= 0.0 && w_dense >= 0.0)) throw std::invalid_argument("weights must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
    if (max_in_flight == 0) throw std::invalid_argument("max_in_flight must be >= 1");
}

void SynthConfig::apply(const KeyValues& kv) {
    if (auto v = kv.get_uint("top_k_in")) top_k_in = *v;
    if (auto v = kv.get_uint("top_k_out")) top_k_out = *v;
    if (auto v = kv.get_real("w_sparse")) w_sparse = *v;
    if (auto v = kv.get_real("w_dense")) w_dense = *v;
    if (auto v = kv.get_real("alpha")) alpha = *v;
    if (auto v = kv.get_uint("max_retries")) max_retries = *v;
    if (auto v = kv.get_uint("max_in_flight")) max_in_flight = *v;
    if (auto v = kv.get_bool("prefer_rewritten_query")) prefer_rewritten_query = *v;
}

std::vector<Candidate> build_candidates(const RunList& bm25, const RunList& dense,
                                        std::size_t top_k_in, std::size_t top_k_out,
                                        double w_sparse, double w_dense) {
    if (bm25.query_id != dense.query_id)
        throw std::invalid_argument("build_candidates: query mismatch (" + bm25.query_id + " vs " +
                                    dense.query_id + ")");
    if (bm25.empty() && dense.empty())
        throw std::invalid_argument("build_candidates: both runs are empty for " + bm25.query_id);
    if (!(w_sparse >= 0.0 && w_dense >= 0.0))
        throw std::invalid_argument("build_candidates: weights must be >= 0");

    const auto sparse = top_of(bm25, top_k_in);
    const auto semantic = top_of(dense, top_k_in);

    struct Scored {
        Candidate cand;
        int best_rank;
    };
    std::vector<Scored> pool;
    std::unordered_map<std::string, std::size_t> where;
    auto visit = [&](const RunList& run, std::size_t k) {
        for (std::size_t i = 0; i < std::min(k, run.size()); ++i) {
            const auto& id = run.entries[i].doc_id;
            if (where.count(id)) continue;
            where.emplace(id, pool.size());
            Candidate c{id, {}, std::nullopt};
            int best = std::numeric_limits<int>::max();
            double fused = 0.0;
            if (auto it = sparse.raw.find(id); it != sparse.raw.end()) {
                c.source_scores.emplace("bm25", it->second);
                fused += w_sparse * sparse.normalized.at(id);
                best = std::min(best, sparse.rank.at(id));
            }
            if (auto it = semantic.raw.find(id); it != semantic.raw.end()) {
                c.source_scores.emplace("dense", it->second);
                fused += w_dense * semantic.normalized.at(id);
                best = std::min(best, semantic.rank.at(id));
            }
            c.fused_score = std::clamp(fused, 0.0, 1.0);
            pool.push_back({std::move(c), best});
        }
    };
    visit(bm25, top_k_in);
    visit(dense, top_k_in);

    std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) {
        if (*a.cand.fused_score != *b.cand.fused_score)
            return *a.cand.fused_score > *b.cand.fused_score;
        if (a.best_rank != b.best_rank) return a.best_rank < b.best_rank;
        return a.cand.doc_id < b.cand.doc_id;
    });
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < std::min(top_k_out, pool.size()); ++i)
        out.push_back(std::move(pool[i].cand));
    return out;
}

std::string prompt_hash(std::string_view prompt) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : prompt) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Journal::Journal(const std::string& path, const WarningSink& warn) {
    {
        std::ifstream in(path);
        std::string line;
        std::size_t lineno = 0;
        while (in && std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto j = json::parse(line, nullptr, false);
            try {
                if (j.is_discarded()) throw std::runtime_error("invalid JSON");
                const auto kind = j.at("kind").get<std::string>();
                const auto qid = j.at("query_id").get<std::string>();
                const auto hash = j.at("prompt_hash").get<std::string>();
                if (kind == "pointwise")
                    pointwise_[{qid, j.at("doc_id").get<std::string>(), hash}] =
                        j.at("score").get<int>();
                else if (kind == "listwise")
                    listwise_[{qid, hash}] = j.at("ranks").get<std::vector<int>>();
                else
                    throw std::runtime_error("unknown kind '" + kind + "'");
            } catch (const std::exception& e) {
                if (warn)
                    warn(path + ":" + std::to_string(lineno) + ": ignoring journal entry (" +
                         e.what() + ")");
            }
        }
    }
    bool torn = false;
    if (std::ifstream tail(path, std::ios::binary | std::ios::ate); tail && tail.tellg() > 0) {
        tail.seekg(-1, std::ios::end);
        torn = tail.get() != '\n';
    }
    out_ = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*out_) throw std::runtime_error("cannot open journal " + path);
    // start the next entry on its own line
    if (torn) *out_ << '\n';
}

std::optional<int> Journal::pointwise(const std::string& qid, const std::string& doc,
                                      const std::string& hash) const {
    std::lock_guard lock(mu_);
    auto it = pointwise_.find({qid, doc, hash});
    if (it == pointwise_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::vector<int>> Journal::listwise(const std::string& qid,
                                                  const std::string& hash) const {
    std::lock_guard lock(mu_);
    auto it = listwise_.find({qid, hash});
    if (it == listwise_.end()) return std::nullopt;
    return it->second;
}

void Journal::append(const std::string& line) {
    if (!out_) return;
    *out_ << line << '\n';
    out_->flush();
}

void Journal::record_pointwise(const std::string& qid, const std::string& doc,
                               const std::string& hash, int score) {
    json j = {{"kind", "pointwise"}, {"query_id", qid}, {"doc_id", doc},
              {"prompt_hash", hash}, {"score", score}};
    std::lock_guard lock(mu_);
    pointwise_[{qid, doc, hash}] = score;
    append(j.dump());
}

void Journal::record_listwise(const std::string& qid, const std::string& hash,
                              const std::vector<int>& ranks) {
    json j = {{"kind", "listwise"}, {"query_id", qid}, {"prompt_hash", hash}, {"ranks", ranks}};
    std::lock_guard lock(mu_);
    listwise_[{qid, hash}] = ranks;
    append(j.dump());
}

std::size_t Journal::size() const {
    std::lock_guard lock(mu_);
    return pointwise_.size() + listwise_.size();
}

PointwiseAnnotation annotate_pointwise(const Query& query, std::span<const Document> docs,
                                       ScorerBackend& backend, const SynthConfig& config,
                                       Journal* journal, const protocol::PromptTemplate& tmpl,
                                       const WarningSink& warn) {
    const std::size_t n = docs.size();
    PointwiseAnnotation out;
    out.scores.assign(n, 0);
    std::vector<std::size_t> calls(n, 0);
    std::vector<char> failed(n, 0), reused(n, 0);

    detail::bounded_parallel_for(n, config.max_in_flight, [&](std::size_t i) {
        const auto prompt =
            protocol::render_pointwise_prompt(query, docs[i], tmpl, config.prefer_rewritten_query);
        const auto hash = prompt_hash(prompt);
        if (journal) {
            if (auto hit = journal->pointwise(query.id, docs[i].id, hash)) {
                out.scores[i] = *hit;
                reused[i] = 1;
                return;
            }
        }
        for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
            ++calls[i];
            if (auto score = protocol::parse_pointwise(backend.score_group(prompt))) {
                out.scores[i] = *score;
                if (journal) journal->record_pointwise(query.id, docs[i].id, hash, *score);
                return;
            }
        }
        failed[i] = 1;
    });

    for (std::size_t i = 0; i < n; ++i) {
        out.backend_calls += calls[i];
        out.reused += reused[i];
        if (failed[i]) {
            out.failed.push_back(i);
            if (warn)
                warn("query " + query.id + ": pointwise label for " + docs[i].id +
                     " unparseable after " + std::to_string(config.max_retries + 1) +
                     " attempts; using 0");
        }
    }
    return out;
}

ListwiseAnnotation annotate_listwise(const Query& query, std::span<const Document> docs,
                                     ScorerBackend& backend, const SynthConfig& config,
                                     Journal* journal, const protocol::PromptTemplate& tmpl,
                                     const WarningSink& warn) {
    ListwiseAnnotation out;
    const auto prompt =
        protocol::render_listwise_prompt(query, docs, tmpl, config.prefer_rewritten_query);
    const auto hash = prompt_hash(prompt);
    if (journal) {
        if (auto hit = journal->listwise(query.id, hash); hit && hit->size() == docs.size()) {
            out.ranks = std::move(*hit);
            out.reused = true;
            return out;
        }
    }
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
        ++out.backend_calls;
        const auto raw = backend.score_group(prompt);
        try {
            auto parsed = protocol::parse_listwise(raw, docs.size());
            out.ranks = std::move(parsed.ranks);
            if (journal) journal->record_listwise(query.id, hash, *out.ranks);
            return out;
        } catch (const protocol::ProtocolError& e) {
            last_error = e.what();
        }
    }
    if (warn)
        warn("query " + query.id + ": listwise ranking failed after " +
             std::to_string(config.max_retries + 1) + " attempts (" + last_error +
             "); skipping query");
    return out;
}

TrainingRecord make_training_record(const Query& query, std::span<const Document> docs,
                                    std::span<const int> pointwise, std::span<const int> ranks,
                                    double alpha) {
    if (docs.size() != pointwise.size() || docs.size() != ranks.size())
        throw std::invalid_argument("make_training_record: length mismatch");
    std::vector<double> pw(pointwise.begin(), pointwise.end());
    const auto gt = fusion::fuse_labels(pw, ranks, alpha);
    TrainingRecord rec{query, {}};
    rec.candidates.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i)
        rec.candidates.push_back({docs[i], pw[i], ranks[i], gt[i]});
    check_training_record(rec, 0);
    return rec;
}

void write_training_record(std::ostream& out, const TrainingRecord& record) {
    json cands = json::array();
    for (const auto& c : record.candidates)
        cands.push_back(json{{"doc_id", c.doc.id},
                             {"text", c.doc.text},
                             {"pointwise", c.pointwise},
                             {"listwise_rank", c.listwise_rank},
                             {"gt_score", c.gt_score}});
    nlohmann::ordered_json j;
    j["query_id"] = record.query.id;
    j["query_text"] = record.query.text;
    j["candidates"] = std::move(cands);
    out << j.dump() << '\n';
}

std::vector<TrainingRecord> read_training_records(std::istream& in, const std::string& source) {
    std::vector<TrainingRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw FormatError(source, lineno, "invalid JSON");
        try {
            TrainingRecord rec;
            rec.query.id = j.at("query_id").get<std::string>();
            rec.query.text = j.at("query_text").get<std::string>();
            for (const auto& c : j.at("candidates"))
                rec.candidates.push_back({{c.at("doc_id").get<std::string>(),
                                           c.at("text").get<std::string>()},
                                          c.at("pointwise").get<double>(),
                                          c.at("listwise_rank").get<int>(),
                                          c.at("gt_score").get<double>()});
            check_training_record(rec, 0);
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            throw FormatError(source, lineno, e.what());
        }
    }
    return records;
}

SynthesisSummary synthesize(const std::vector<Query>& queries,
                            const std::map<std::string, RunList>& bm25_runs,
                            const std::map<std::string, RunList>& dense_runs, const Corpus& corpus,
                            Teachers teachers, const SynthConfig& config, Journal& journal,
                            std::ostream& out, const WarningSink& warn) {
    config.validate();
    SynthesisSummary summary;
    auto skip = [&](const Query& q, const std::string& why) {
        summary.skipped.push_back(q.id);
        if (warn) warn("query " + q.id + ": " + why + "; skipped");
    };

    for (const auto& query : queries) {
        auto b = bm25_runs.find(query.id);
        auto d = dense_runs.find(query.id);
        if (b == bm25_runs.end() && d == dense_runs.end()) continue;
        const RunList empty{query.id, {}, {}};
        const auto& sparse = b == bm25_runs.end() ? empty : b->second;
        const auto& semantic = d == dense_runs.end() ? empty : d->second;

        const auto candidates = build_candidates(sparse, semantic, config.top_k_in,
                                                 config.top_k_out, config.w_sparse, config.w_dense);
        if (candidates.size() != config.top_k_out) {
            skip(query, "only " + std::to_string(candidates.size()) + " candidates, need " +
                            std::to_string(config.top_k_out));
            continue;
        }
        std::vector<Document> docs;
        std::string missing;
        for (const auto& c : candidates) {
            auto it = corpus.find(c.doc_id);
            if (it == corpus.end()) {
                missing = c.doc_id;
                break;
            }
            docs.push_back(it->second);
        }
        if (!missing.empty()) {
            skip(query, "document " + missing + " missing from corpus");
            continue;
        }

        auto pointwise = annotate_pointwise(query, docs, teachers.pointwise, config, &journal,
                                            protocol::PromptTemplate::default_pointwise(), warn);
        auto listwise = annotate_listwise(query, docs, teachers.listwise, config, &journal,
                                          protocol::PromptTemplate::default_listwise(), warn);
        summary.pointwise_calls += pointwise.backend_calls;
        summary.listwise_calls += listwise.backend_calls;
        summary.reused += pointwise.reused + (listwise.reused ? 1 : 0);
        if (!listwise.ranks) {
            summary.skipped.push_back(query.id);
            continue;
        }
        write_training_record(
            out, make_training_record(query, docs, pointwise.scores, *listwise.ranks, config.alpha));
        ++summary.records;
    }
    return summary;
}

}  // namespace grouprank::synth
