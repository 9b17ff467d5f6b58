#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "grouprank/core.hpp"

using namespace grouprank;

namespace {

std::vector<std::string> collected;

WarningSink collect() {
    collected.clear();
    return [](const std::string& msg) { collected.push_back(msg); };
}

}  // namespace

TEST_CASE("run files round-trip and re-sort by score") {
    std::istringstream in(
        "q1 Q0 b 1 0.5 bm25\n"
        "q1 Q0 a 2 0.9 bm25\n"
        "\n"
        "q2 Q0 z 1 3 bm25\n"
        "q1 Q0 c 3 0.5 bm25\n");
    auto runs = parse_run(in);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].query_id == "q1");
    CHECK(runs[1].query_id == "q2");
    CHECK(runs[0].doc_ids() == std::vector<std::string>{"a", "b", "c"});
    CHECK(runs[0].entries[2].rank == 3);
    check_run_invariants(runs[0]);

    std::ostringstream out;
    for (const auto& r : runs) write_run(out, r);
    CHECK(out.str() ==
          "q1 Q0 a 1 0.9 bm25\n"
          "q1 Q0 b 2 0.5 bm25\n"
          "q1 Q0 c 3 0.5 bm25\n"
          "q2 Q0 z 1 3 bm25\n");

    std::istringstream again(out.str());
    auto reread = parse_run(again);
    CHECK(reread[0].doc_ids() == runs[0].doc_ids());
    CHECK(reread[0].entries[0].score == runs[0].entries[0].score);
}

TEST_CASE("run parser reports the offending line") {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            parse_run(in);
        } catch (const FormatError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("q1 Q0 a 1 0.1 t\nq1 Q0 b 2 x t\n") == 2);
    CHECK(line_of("q1 Q0 a 1 0.1 t\nq1 Q0 a 2 0.2 t\n") == 2);
    CHECK(line_of("q1 Q0 a 1 0.1\n") == 1);
    CHECK(line_of("\n\nq1 Q0 a one 0.1 t\n") == 3);
}

TEST_CASE("scores round-trip exactly") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-12, 12345.678, 0.0})
        CHECK(std::stod(format_score(v)) == v);
    CHECK(format_score(3.0) == "3");
}

TEST_CASE("qrels: duplicates warn and keep the later grade") {
    std::istringstream in("q1 0 a 2\nq1 0 b 0\nq1 0 a 3\n");
    auto qrels = parse_qrels(in, "<qrels>", collect());
    CHECK(qrels.grade("q1", "a") == 3);
    CHECK(qrels.grade("q1", "b") == 0);
    CHECK(qrels.grade("q1", "zzz") == 0);
    CHECK(qrels.grade("q9", "a") == 0);
    CHECK(qrels.size() == 2);
    REQUIRE(collected.size() == 1);
    CHECK(collected[0].find(":3:") != std::string::npos);
}

TEST_CASE("qrels: negative grades are rejected") {
    std::istringstream in("q1 0 a -1\n");
    CHECK_THROWS_AS(parse_qrels(in, "<qrels>", collect()), FormatError);
}

TEST_CASE("corpus and queries JSONL") {
    std::istringstream corpus_in(R"({"id": "d1", "text": "alpha"}
{"id": "d2", "text": "beta", "title": "ignored"}
)");
    auto corpus = parse_corpus(corpus_in);
    CHECK(corpus.size() == 2);
    CHECK(corpus.at("d2").text == "beta");

    std::istringstream dup(R"({"id": "d1", "text": "a"}
{"id": "d1", "text": "b"})");
    CHECK_THROWS_AS(parse_corpus(dup), FormatError);

    std::istringstream missing(R"({"id": "d1"})");
    CHECK_THROWS_AS(parse_corpus(missing), FormatError);

    std::istringstream queries_in(R"({"id": "q2", "text": "second"}
{"id": "q1", "text": "first", "rewritten_text": "first, rewritten"}
)");
    auto queries = parse_queries(queries_in);
    REQUIRE(queries.size() == 2);
    CHECK(queries[0].id == "q2");
    CHECK(queries[1].prompt_text(false) == "first");
    CHECK(queries[1].prompt_text(true) == "first, rewritten");
    CHECK(queries[0].prompt_text(true) == "second");
}

TEST_CASE("run invariants") {
    auto run = RunList::from_scores("q", {{"a", 1.0}, {"b", 2.0}, {"c", 2.0}}, "t");
    CHECK(run.doc_ids() == std::vector<std::string>{"b", "c", "a"});
    check_run_invariants(run);

    auto broken = run;
    broken.entries[1].rank = 5;
    CHECK_THROWS_AS(check_run_invariants(broken), std::invalid_argument);
    broken = run;
    broken.entries[2].score = 10.0;
    CHECK_THROWS_AS(check_run_invariants(broken), std::invalid_argument);
    broken = run;
    broken.entries[2].doc_id = "b";
    CHECK_THROWS_AS(check_run_invariants(broken), std::invalid_argument);
}

TEST_CASE("group score maps stay in [0,10]") {
    GroupScoreMap m({0, 10, 5}, "why");
    CHECK(m.at_position(2) == 10);
    CHECK(m.reason() == "why");
    CHECK_THROWS_AS(GroupScoreMap({11}), std::invalid_argument);
    CHECK_THROWS_AS(GroupScoreMap({-1}), std::invalid_argument);
    CHECK_THROWS_AS(GroupScoreMap(std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("training record invariants") {
    TrainingRecord rec{{"q", "text", {}}, {}};
    for (int i = 1; i <= 3; ++i)
        rec.candidates.push_back({{"d" + std::to_string(i), "t"}, 5.0, i, 0.5});
    check_training_record(rec, 3);
    check_training_record(rec, 0);
    CHECK_THROWS_AS(check_training_record(rec, 50), std::invalid_argument);
    rec.candidates[0].listwise_rank = 2;
    CHECK_THROWS_AS(check_training_record(rec, 3), std::invalid_argument);
    rec.candidates[0].listwise_rank = 1;
    rec.candidates[0].gt_score = 1.5;
    CHECK_THROWS_AS(check_training_record(rec, 3), std::invalid_argument);
}

TEST_CASE("index_by_query rejects repeated queries") {
    std::vector<RunList> runs{{"q1", {}, "t"}, {"q1", {}, "t"}};
    CHECK_THROWS_AS(index_by_query(runs), std::invalid_argument);
}
