#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grouprank/backend.hpp"
#include "grouprank/synth.hpp"

using namespace grouprank;
using namespace grouprank::synth;

namespace {

struct World {
    std::vector<Query> queries{{"q1", "which passages matter", {}},
                               {"q2", "a query with a short run", {}}};
    Corpus corpus;
    Qrels qrels;
    std::map<std::string, RunList> bm25, dense;

    World() {
        std::vector<std::pair<std::string, double>> sparse, semantic;
        for (int i = 0; i < 8; ++i) {
            const std::string id = "d" + std::to_string(i);
            corpus[id] = {id, "text of document " + std::to_string(i)};
            qrels.set("q1", id, i % 3);
            sparse.emplace_back(id, 10.0 - i);
            semantic.emplace_back(id, 0.1 * i);
        }
        bm25["q1"] = RunList::from_scores("q1", sparse, "bm25");
        dense["q1"] = RunList::from_scores("q1", semantic, "dense");
        bm25["q2"] = RunList::from_scores("q2", {{"d0", 1.0}}, "bm25");
    }
};

std::filesystem::path temp_path(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("grouprank_test_" + name);
    std::filesystem::remove(p);
    return p;
}

}  // namespace

TEST_CASE("hybrid candidates on a toy pair of runs") {
    const auto bm25 = RunList::from_scores("q", {{"a", 12}, {"b", 8}, {"c", 4}}, "bm25");
    const auto dense = RunList::from_scores("q", {{"b", 0.9}, {"c", 0.7}, {"d", 0.1}}, "dense");
    const auto cands = build_candidates(bm25, dense, 100, 10);
    REQUIRE(cands.size() == 4);
    const char* order[] = {"b", "a", "c", "d"};
    const double scores[] = {0.75, 0.5, 0.375, 0.0};
    for (int i = 0; i < 4; ++i) {
        CHECK(cands[i].doc_id == order[i]);
        CHECK(*cands[i].fused_score == doctest::Approx(scores[i]));
    }
    CHECK(cands[0].source_scores.at("bm25") == 8);
    CHECK(cands[3].source_scores.count("bm25") == 0);

    CHECK(build_candidates(bm25, dense, 100, 2).size() == 2);
    // only the top 1 of each run enters the pool
    CHECK(build_candidates(bm25, dense, 1, 10).size() == 2);
    CHECK_THROWS_AS(build_candidates(RunList{"q", {}, ""}, RunList{"q", {}, ""}),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_candidates(bm25, RunList{"other", {}, ""}), std::invalid_argument);
}

TEST_CASE("prompt hashes") {
    CHECK(prompt_hash("") == "cbf29ce484222325");
    CHECK(prompt_hash("a") == "af63dc4c8601ec8c");
    CHECK(prompt_hash("abc") != prompt_hash("abd"));
}

TEST_CASE("pointwise and listwise annotation with the oracle") {
    World w;
    QrelsOracleBackend oracle(w.queries, w.corpus, w.qrels);
    std::vector<Document> docs;
    for (int i = 0; i < 6; ++i) docs.push_back(w.corpus.at("d" + std::to_string(i)));
    SynthConfig cfg;

    const auto pw = annotate_pointwise(w.queries[0], docs, oracle, cfg);
    CHECK(pw.scores == std::vector<int>{0, 1, 2, 0, 1, 2});
    CHECK(pw.backend_calls == 6);
    CHECK(pw.failed.empty());

    const auto lw = annotate_listwise(w.queries[0], docs, oracle, cfg);
    REQUIRE(lw.ranks);
    // grades 0 1 2 0 1 2 -> order 3 6 2 5 1 4
    CHECK(*lw.ranks == std::vector<int>{5, 3, 1, 6, 4, 2});
}

TEST_CASE("pointwise failures fall back to 0 after retries") {
    std::atomic<int> calls{0};
    CallbackBackend junk([&](const std::string&) {
        ++calls;
        return std::string("maybe a 7?");
    });
    const std::vector<Document> docs{{"a", "x"}, {"b", "y"}};
    SynthConfig cfg;
    cfg.max_retries = 1;
    std::vector<std::string> warnings;
    const auto pw = annotate_pointwise({"q", "t", {}}, docs, junk, cfg, nullptr,
                                       protocol::PromptTemplate::default_pointwise(),
                                       [&](const std::string& m) { warnings.push_back(m); });
    CHECK(calls.load() == 4);
    CHECK(pw.scores == std::vector<int>{0, 0});
    CHECK(pw.failed.size() == 2);
    CHECK(warnings.size() == 2);

    CallbackBackend down([](const std::string&) -> std::string { throw BackendError("down"); });
    CHECK_THROWS_AS(annotate_pointwise({"q", "t", {}}, docs, down, cfg), BackendError);

    const auto lw = annotate_listwise({"q", "t", {}}, docs, junk, cfg, nullptr,
                                      protocol::PromptTemplate::default_listwise(),
                                      [](const std::string&) {});
    CHECK_FALSE(lw.ranks);
    CHECK(lw.backend_calls == 2);
}

TEST_CASE("training records round-trip") {
    const std::vector<Document> docs{{"a", "x"}, {"b", "y \"quoted\""}, {"c", "z"}};
    const std::vector<int> pw{10, 5, 0}, ranks{1, 2, 3};
    const auto rec = make_training_record({"q", "query", {}}, docs, pw, ranks, 0.5);
    CHECK(rec.candidates[1].gt_score == doctest::Approx(0.43453512321427135));
    std::stringstream ss;
    write_training_record(ss, rec);
    const auto back = read_training_records(ss);
    REQUIRE(back.size() == 1);
    CHECK(back[0].query.text == "query");
    CHECK(back[0].candidates[1].doc.text == "y \"quoted\"");
    CHECK(back[0].candidates[1].gt_score == rec.candidates[1].gt_score);

    std::istringstream broken("{\"query_id\": \"q\"}\n");
    CHECK_THROWS_AS(read_training_records(broken), FormatError);
}

TEST_CASE("synthesize skips short queries and resumes from the journal") {
    World w;
    QrelsOracleBackend oracle(w.queries, w.corpus, w.qrels);
    SynthConfig cfg;
    cfg.top_k_in = 8;
    cfg.top_k_out = 5;
    const auto path = temp_path("journal.jsonl");
    auto quiet = [](const std::string&) {};

    std::ostringstream first_out;
    SynthesisSummary first;
    {
        Journal journal(path.string(), quiet);
        first = synthesize(w.queries, w.bm25, w.dense, w.corpus, {oracle, oracle}, cfg, journal,
                           first_out, quiet);
        CHECK(journal.size() == 6);
    }
    CHECK(first.records == 1);
    CHECK(first.skipped == std::vector<std::string>{"q2"});
    CHECK(first.pointwise_calls == 5);
    CHECK(first.listwise_calls == 1);
    CHECK(first.reused == 0);

    std::istringstream in(first_out.str());
    const auto records = read_training_records(in);
    REQUIRE(records.size() == 1);
    CHECK(records[0].candidates.size() == 5);

    // a torn trailing line is tolerated
    { std::ofstream(path, std::ios::app) << "{\"kind\": \"pointw"; }

    std::atomic<int> calls{0};
    CallbackBackend counting([&](const std::string& p) {
        ++calls;
        return oracle.score_group(p);
    });
    std::vector<std::string> warnings;
    Journal journal(path.string(), [&](const std::string& m) { warnings.push_back(m); });
    CHECK(warnings.size() == 1);
    std::ostringstream second_out;
    const auto second = synthesize(w.queries, w.bm25, w.dense, w.corpus, {counting, counting}, cfg,
                                   journal, second_out, quiet);
    CHECK(calls.load() == 0);
    CHECK(second.reused == 6);
    CHECK(second_out.str() == first_out.str());
    std::filesystem::remove(path);
}
