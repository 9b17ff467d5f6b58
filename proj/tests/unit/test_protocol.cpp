#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grouprank/protocol.hpp"

using namespace grouprank;
using namespace grouprank::protocol;

namespace {

std::string wrap(const std::string& answer) {
    return "<reason>ok</reason>\n<answer>\n" + answer + "\n</answer>";
}

}  // namespace

TEST_CASE("group prompt rendering") {
    const Query q{"q1", "what is {PASSAGES}?", std::string("rewritten")};
    const std::vector<Document> docs{{"a", "first"}, {"b", "second {QUERY}"}};
    const auto tmpl = PromptTemplate::default_groupwise();
    const auto prompt = render_group_prompt(tmpl, q, docs);
    CHECK(prompt.find("I will provide you 2 documents") != std::string::npos);
    CHECK(prompt.find("[1] first\n[2] second {QUERY}") != std::string::npos);
    // substituted text is not rescanned
    CHECK(prompt.find("what is {PASSAGES}?") != std::string::npos);
    CHECK(prompt.find("## Final Output Format") != std::string::npos);

    RenderOptions opts;
    opts.prefer_rewritten_query = true;
    CHECK(render_group_prompt(tmpl, q, docs, opts).find("rewritten") != std::string::npos);
    opts.max_group_size = 1;
    CHECK_THROWS_AS(render_group_prompt(tmpl, q, docs, opts), ProtocolError);
    CHECK_THROWS_AS(render_group_prompt(tmpl, q, std::vector<Document>{}), ProtocolError);
    CHECK_THROWS_AS(render_group_prompt(PromptTemplate::default_pointwise(), q, docs),
                    ProtocolError);
}

TEST_CASE("templates must carry their placeholders") {
    CHECK_THROWS_AS(PromptTemplate(PromptKind::Groupwise, "", "{TOPK} {QUERY}"), ProtocolError);
    PromptTemplate ok(PromptKind::Groupwise, "", "{TOPK}|{QUERY}|{PASSAGES}");
    const std::vector<Document> docs{{"a", "x"}};
    CHECK(render_group_prompt(ok, {"q", "t", {}}, docs) == "1|t|[1] x");
    for (auto kind : {PromptKind::Groupwise, PromptKind::Pointwise, PromptKind::Listwise})
        CHECK_NOTHROW(PromptTemplate::defaults(kind));
}

TEST_CASE("well-formed responses parse") {
    const std::vector<int> scores{3, 0, 10};
    const auto r = parse_response(format_group_response(scores, "because"), 3);
    CHECK(r.verdict.output_format_ok);
    CHECK(r.verdict.answer_format_ok);
    REQUIRE(r.score_map);
    CHECK(r.score_map->scores() == scores);
    CHECK(r.score_map->reason() == "because");

    const auto bare = parse_response(wrap(R"({"[2]": 1, "[1]": 4})"), 2);
    CHECK(bare.verdict.answer_format_ok);
    CHECK(bare.score_map->at_position(1) == 4);

    const auto fenced_inline = parse_response(wrap(R"(```json {"[1]": 4}```)"), 1);
    CHECK(fenced_inline.verdict.answer_format_ok);

    const auto answer_first =
        parse_response("<answer>{\"[1]\": 2}</answer> then <reason>r</reason>", 1);
    CHECK(answer_first.verdict.answer_format_ok);
}

TEST_CASE("output-format failures") {
    for (const std::string raw : {
             std::string(R"({"[1]": 1})"),
             std::string("<reason>a</reason><reason>b</reason><answer>{\"[1]\": 1}</answer>"),
             std::string("<reason>a<answer>{\"[1]\": 1}</answer></reason>"),
             std::string("<answer>{\"[1]\": 1}</answer>"),
             std::string("</reason>x<reason><answer>{\"[1]\": 1}</answer>"),
         }) {
        const auto r = parse_response(raw, 1);
        CHECK_FALSE(r.verdict.output_format_ok);
        CHECK_FALSE(r.verdict.answer_format_ok);
        CHECK_FALSE(r.score_map);
        CHECK_FALSE(r.detail.empty());
    }
}

TEST_CASE("answer-format failures keep the output verdict") {
    for (const std::string answer : {
             std::string(R"({"[1]": 1})"),                      // missing key
             std::string(R"({"[1]": 1, "[2]": 2, "[3]": 3})"),  // extra key
             std::string(R"({"[1]": 1, "[1]": 2})"),            // repeated key
             std::string(R"({"[1]": 1, "[2]": 11})"),           // out of range
             std::string(R"({"[1]": 1, "[2]": -1})"),
             std::string(R"({"[1]": 1, "[2]": 2.5})"),          // not an integer
             std::string(R"({"[1]": 1, "[2]": "2"})"),
             std::string(R"({"1": 1, "[2]": 2})"),              // wrong key shape
             std::string(R"([1, 2])"),
             std::string(R"({"[1]": 1, "[2]": 2)"),             // truncated
             std::string(""),
         }) {
        CAPTURE(answer);
        const auto r = parse_response(wrap(answer), 2);
        CHECK(r.verdict.output_format_ok);
        CHECK_FALSE(r.verdict.answer_format_ok);
        CHECK_FALSE(r.score_map);
    }
}

TEST_CASE("out-of-range scores can be clamped") {
    ParseOptions opts;
    opts.clamp_out_of_range = true;
    const auto r = parse_response(wrap(R"({"[1]": 12, "[2]": -3})"), 2, opts);
    REQUIRE(r.verdict.answer_format_ok);
    CHECK(r.score_map->scores() == std::vector<int>{10, 0});
}

TEST_CASE("the published case-study response parses") {
    std::ifstream in(GROUPRANK_TEST_DATA "/case_sustainable_living.txt");
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto r = parse_response(ss.str(), 20);
    REQUIRE(r.verdict.answer_format_ok);
    CHECK(r.score_map->scores() ==
          std::vector<int>{0, 1, 0, 4, 0, 8, 0, 0, 0, 0, 5, 0, 2, 0, 9, 8, 0, 0, 0, 7});
    CHECK(r.score_map->reason().find("neonicotinoid") != std::string::npos);
}

TEST_CASE("pointwise answers") {
    CHECK(parse_pointwise("Relevance score: 7.") == 7);
    CHECK(parse_pointwise("  Relevance score: 10.\n") == 10);
    CHECK(parse_pointwise("Relevance score:0.") == 0);
    CHECK_FALSE(parse_pointwise("Relevance score: 11."));
    CHECK_FALSE(parse_pointwise("Relevance score: 7"));
    CHECK_FALSE(parse_pointwise("Relevance score: 7.5."));
    CHECK_FALSE(parse_pointwise("I think 7."));
    const auto prompt = render_pointwise_prompt({"q", "the query", {}}, {"d", "the passage"});
    CHECK(prompt.find("the query") != std::string::npos);
    CHECK(prompt.find("the passage") != std::string::npos);
}

TEST_CASE("listwise answers") {
    const auto r = parse_listwise("thinking...\n```json\n[3, 1, 2]\n```", 3);
    CHECK(r.order == std::vector<int>{3, 1, 2});
    CHECK(r.ranks == std::vector<int>{2, 3, 1});
    CHECK(parse_listwise("[2, 1]", 2).order == std::vector<int>{2, 1});
    // the last fenced array wins
    CHECK(parse_listwise("```\n[1, 2]\n```\nfinal:\n```json\n[2, 1]\n```", 2).order ==
          std::vector<int>{2, 1});
    CHECK_THROWS_AS(parse_listwise("[1, 1, 2]", 3), ProtocolError);
    CHECK_THROWS_AS(parse_listwise("[1, 2]", 3), ProtocolError);
    CHECK_THROWS_AS(parse_listwise("no array here", 3), ProtocolError);
    const std::vector<Document> docs{{"a", "x"}, {"b", "y"}};
    const auto prompt = render_listwise_prompt({"q", "the query", {}}, docs);
    CHECK(prompt.find("[1] x\n[2] y") != std::string::npos);
}
