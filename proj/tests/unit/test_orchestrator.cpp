#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "grouprank/orchestrator.hpp"
#include "parallel.hpp"

using namespace grouprank;
using namespace grouprank::orchestrator;

namespace {

struct Fixture {
    std::vector<Query> queries{{"q", "find the good ones", {}}};
    Corpus corpus;
    Qrels qrels;
    RunList run;

    explicit Fixture(std::size_t n) {
        std::vector<std::pair<std::string, double>> scored;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string id = "d" + std::to_string(i);
            corpus[id] = {id, "passage number " + std::to_string(i)};
            qrels.set("q", id, static_cast<int>(i % 4));
            scored.emplace_back(id, static_cast<double>(n - i));
        }
        run = RunList::from_scores("q", scored, "bm25");
    }
};

/// Scores each passage by the number at its end, modulo 11.
std::string score_by_number(const std::string& prompt) {
    std::vector<int> scores;
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind('[', 0) != 0) continue;
        auto pos = line.find("passage number ");
        if (pos == std::string::npos) continue;
        scores.push_back(std::stoi(line.substr(pos + 15)) % 11);
    }
    return protocol::format_group_response(scores);
}

}  // namespace

TEST_CASE("disjoint partition") {
    CHECK(partition_disjoint(45, 20) ==
          std::vector<IndexRange>{{0, 20}, {20, 40}, {40, 45}});
    CHECK(partition_disjoint(0, 20).empty());
    CHECK_THROWS_AS(partition_disjoint(5, 0), std::invalid_argument);
}

TEST_CASE("sliding windows") {
    CHECK(partition_sliding(25, 20, 10) == std::vector<IndexRange>{{0, 20}, {5, 25}});
    CHECK(partition_sliding(15, 20, 10) == std::vector<IndexRange>{{0, 15}});
    CHECK(partition_sliding(100, 20, 10).size() == 9);
    CHECK_THROWS_AS(partition_sliding(10, 5, 6), std::invalid_argument);

    // every doc is covered for any shape
    for (std::size_t n = 1; n <= 60; ++n)
        for (std::size_t w = 1; w <= 12; ++w)
            for (std::size_t s = 1; s <= w; ++s) {
                std::vector<int> seen(n, 0);
                for (const auto& r : partition_sliding(n, w, s)) {
                    CHECK(r.size() == std::min(n, w));
                    for (auto i = r.begin; i < r.end; ++i) ++seen[i];
                }
                CHECK(std::count(seen.begin(), seen.end(), 0) == 0);
            }
}

TEST_CASE("seeded shuffle is a deterministic permutation") {
    std::vector<std::size_t> a(50), b;
    std::iota(a.begin(), a.end(), 0);
    b = a;
    seeded_shuffle(a, 42);
    seeded_shuffle(b, 42);
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> ids(50);
    std::iota(ids.begin(), ids.end(), 0);
    CHECK(sorted == ids);
    CHECK(a != ids);

    CHECK(round_order(10, 1, 1, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(round_order(10, 1, 1, 3) != round_order(10, 1, 2, 3));
}

TEST_CASE("bounded_parallel_for caps concurrency and rethrows") {
    std::atomic<int> live{0}, peak{0};
    auto done = detail::bounded_parallel_for(40, 3, [&](std::size_t) {
        const int now = ++live;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
        --live;
    });
    CHECK(peak.load() <= 3);
    CHECK(std::count(done.begin(), done.end(), true) == 40);

    CHECK_THROWS_AS(detail::bounded_parallel_for(
                        10, 2, [](std::size_t i) { if (i == 4) throw std::runtime_error("x"); }),
                    std::runtime_error);
}

TEST_CASE("rerank orders by averaged scores and breaks ties by retrieval rank") {
    Fixture f(30);
    CallbackBackend backend(score_by_number);
    RerankConfig cfg;
    cfg.group_size = 7;
    auto result = rerank(f.queries[0], f.run, f.corpus, backend, cfg);
    check_run_invariants(result.run);
    CHECK(result.run.size() == 30);
    CHECK(result.stats.backend_calls == 5);
    CHECK(result.stats.failed_groups == 0);
    CHECK(result.run.tag == "grouprank_seed0");
    // d10 and d21 both score 10; d10 was retrieved earlier
    CHECK(result.run.entries[0].doc_id == "d10");
    CHECK(result.run.entries[1].doc_id == "d21");
    CHECK(result.run.entries[0].score == 10.0);
}

TEST_CASE("sliding mode averages overlapping windows") {
    Fixture f(25);
    CallbackBackend backend(score_by_number);
    RerankConfig cfg;
    cfg.mode = GroupingMode::SlidingWindow;
    auto result = rerank(f.queries[0], f.run, f.corpus, backend, cfg);
    CHECK(result.stats.backend_calls == 2);
    CHECK(result.run.size() == 25);
    // d10 sits in both windows and scores 10 in each
    CHECK(result.run.entries[0].doc_id == "d10");
    CHECK(result.run.entries[0].score == 10.0);
    CHECK(result.run.entries[1].doc_id == "d21");
}

TEST_CASE("self-ensemble is seed-deterministic and order independent") {
    Fixture f(40);
    CallbackBackend backend(score_by_number);
    RerankConfig cfg;
    cfg.ensemble_n = 3;
    cfg.seed = 17;
    cfg.group_size = 6;
    const auto a = rerank(f.queries[0], f.run, f.corpus, backend, cfg);
    cfg.max_in_flight = 1;
    const auto b = rerank(f.queries[0], f.run, f.corpus, backend, cfg);
    std::ostringstream sa, sb;
    write_run(sa, a.run);
    write_run(sb, b.run);
    CHECK(sa.str() == sb.str());
    CHECK(a.stats.backend_calls == 3 * 7);
}

TEST_CASE("unparseable groups are retried and then scored 0") {
    Fixture f(5);
    std::atomic<int> calls{0};
    CallbackBackend backend([&](const std::string&) {
        ++calls;
        return std::string("no tags at all");
    });
    RerankConfig cfg;
    cfg.max_retries = 2;
    std::vector<std::string> warnings;
    auto result = rerank(f.queries[0], f.run, f.corpus, backend, cfg,
                         protocol::PromptTemplate::default_groupwise(),
                         [&](const std::string& w) { warnings.push_back(w); });
    CHECK(calls.load() == 3);
    CHECK(result.stats.failed_groups == 1);
    CHECK(warnings.size() == 1);
    // all zero, so retrieval order survives
    CHECK(result.run.doc_ids() == f.run.doc_ids());
}

TEST_CASE("a retry that parses replaces the failure") {
    Fixture f(4);
    std::atomic<int> calls{0};
    CallbackBackend backend([&](const std::string& p) {
        return ++calls == 1 ? std::string("<reason></reason><answer>{}</answer>")
                            : score_by_number(p);
    });
    auto result = rerank(f.queries[0], f.run, f.corpus, backend, {});
    CHECK(result.stats.failed_groups == 0);
    CHECK(result.stats.backend_calls == 2);
}

TEST_CASE("backend failure aborts with a partial run") {
    Fixture f(40);
    CallbackBackend backend([&](const std::string& p) {
        if (p.find("passage number 25\n") != std::string::npos)
            throw BackendError("connection refused");
        return score_by_number(p);
    });
    RerankConfig cfg;
    cfg.group_size = 10;
    cfg.max_in_flight = 1;
    try {
        rerank(f.queries[0], f.run, f.corpus, backend, cfg);
        FAIL("expected RerankAborted");
    } catch (const RerankAborted& e) {
        CHECK(std::string(e.what()).find("connection refused") != std::string::npos);
        CHECK(e.partial.size() < 40);
        CHECK(e.partial.size() % 10 == 0);
        check_run_invariants(e.partial);
    }
}

TEST_CASE("rerank input validation") {
    Fixture f(3);
    CallbackBackend backend(score_by_number);
    auto missing = f.run;
    missing.entries[1].doc_id = "nowhere";
    CHECK_THROWS_AS(rerank(f.queries[0], missing, f.corpus, backend, {}), std::invalid_argument);
    CHECK_THROWS_AS(rerank(f.queries[0], RunList{"q", {}, "t"}, f.corpus, backend, {}),
                    std::invalid_argument);
}

TEST_CASE("optional fusion with the retriever") {
    Fixture f(10);
    CallbackBackend backend(score_by_number);
    RerankConfig cfg;
    cfg.fuse_with_retriever = true;
    cfg.w_rerank = 0.0;
    cfg.w_retrieve = 1.0;
    auto result = rerank(f.queries[0], f.run, f.corpus, backend, cfg);
    CHECK(result.run.doc_ids() == f.run.doc_ids());
}

TEST_CASE("call-count table") {
    const CostParams p;
    const std::pair<Paradigm, std::uint64_t> expected[] = {
        {Paradigm::PointwiseQlm, 100},      {Paradigm::PointwiseYesNo, 100},
        {Paradigm::ListwiseGeneration, 10}, {Paradigm::ListwiseLikelihood, 10},
        {Paradigm::PairwiseAllPair, 9900},  {Paradigm::PairwiseHeapsort, 70},
        {Paradigm::PairwiseBubblesort, 1000}, {Paradigm::SetwiseHeapsort, 20},
        {Paradigm::SetwiseBubblesort, 60},  {Paradigm::Groupwise, 5},
    };
    for (const auto& [paradigm, calls] : expected) {
        CAPTURE(info(paradigm).name);
        CHECK(estimate_llm_calls(paradigm, p) == calls);
        CHECK(parse_paradigm(info(paradigm).name) == paradigm);
    }
    CHECK(paradigms().size() == 10);
    CHECK(estimate_llm_calls(Paradigm::Groupwise, {101, 20, 20, 10, 10, 1}) == 6);
    CHECK_THROWS_AS(estimate_llm_calls(Paradigm::SetwiseBubblesort, {100, 1, 20, 10, 10, 1}),
                    std::invalid_argument);
}
