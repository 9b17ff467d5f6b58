// Python bindings: metrics, fusion, the response parser and reward stack,
// cost estimates, and groupwise reranking with a Python scorer callable.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grouprank/backend.hpp"
#include "grouprank/core.hpp"
#include "grouprank/eval.hpp"
#include "grouprank/fusion.hpp"
#include "grouprank/metrics.hpp"
#include "grouprank/orchestrator.hpp"
#include "grouprank/protocol.hpp"
#include "grouprank/rewards.hpp"

namespace py = pybind11;
using namespace grouprank;

namespace {

using Scored = std::vector<std::pair<std::string, double>>;

Qrels single_query(const std::map<std::string, int>& judgments) {
    Qrels q;
    for (const auto& [doc, grade] : judgments) q.set("q", doc, grade);
    return q;
}

Scored to_pairs(const RunList& run) {
    Scored out;
    for (const auto& e : run.entries) out.emplace_back(e.doc_id, e.score);
    return out;
}

py::dict breakdown_dict(const rewards::RewardBreakdown& b, const std::string& detail) {
    py::dict d;
    d["output_format_ok"] = b.verdict.output_format_ok;
    d["answer_format_ok"] = b.verdict.answer_format_ok;
    d["r_recall"] = b.r_recall;
    d["r_rank"] = b.r_rank;
    d["r_dist"] = b.r_dist;
    d["r_h"] = b.r_h;
    d["final"] = b.final;
    d["detail"] = detail;
    return d;
}

}  // namespace

PYBIND11_MODULE(_grouprank, m) {
    m.doc() = "Groupwise LLM reranking: metrics, fusion, rewards and orchestration";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<protocol::ProtocolError>(m, "ProtocolError", PyExc_ValueError);
    py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
    py::register_exception<orchestrator::RerankAborted>(m, "RerankAborted", PyExc_RuntimeError);
    py::register_exception<eval::EmptyEvaluation>(m, "EmptyEvaluation", PyExc_ValueError);

    // --- metrics
    m.def("ndcg",
          [](const std::vector<std::string>& ranking, const std::map<std::string, int>& judgments,
             std::size_t k) { return metrics::ndcg_at_k(ranking, single_query(judgments), "q", k).value; },
          py::arg("ranking"), py::arg("judgments"), py::arg("k") = 10,
          "NDCG@k of doc ids against {doc_id: grade}; gain 2^g - 1, log2 discount.");
    m.def("recall",
          [](const std::vector<std::string>& ranking, const std::map<std::string, int>& judgments,
             std::size_t k) { return metrics::recall_at_k(ranking, single_query(judgments), "q", k).value; },
          py::arg("ranking"), py::arg("judgments"), py::arg("k") = 10);
    m.def("rbo",
          [](const std::vector<std::string>& a, const std::vector<std::string>& b, double p) {
              return metrics::rbo(a, b, p);
          },
          py::arg("a"), py::arg("b"), py::arg("p") = metrics::kDefaultRboPersistence,
          "Extrapolated rank-biased overlap.");

    // --- fusion
    m.def("minmax_normalize",
          [](const std::vector<double>& v) { return fusion::minmax_normalize(v); }, py::arg("values"));
    m.def("hybrid_score",
          [](const std::vector<double>& bm25, const std::vector<double>& dense, double ws, double wd) {
              return fusion::hybrid_score(bm25, dense, ws, wd);
          },
          py::arg("bm25"), py::arg("dense"), py::arg("w_sparse") = 0.5, py::arg("w_dense") = 0.5);
    m.def("fuse_labels",
          [](const std::vector<double>& pointwise, const std::vector<int>& ranks, double alpha) {
              return fusion::fuse_labels(pointwise, ranks, alpha);
          },
          py::arg("pointwise"), py::arg("listwise_ranks"), py::arg("alpha") = 0.5);
    m.def("scores_to_distribution",
          [](const std::vector<double>& v, double eps) { return fusion::scores_to_distribution(v, eps); },
          py::arg("values"), py::arg("epsilon") = fusion::kDefaultSmoothing);
    m.def("fuse_runs",
          [](const Scored& reranker, const Scored& retriever, double w_rerank, double w_retrieve) {
              return to_pairs(fusion::fuse_runs(RunList::from_scores("q", reranker, "rerank"),
                                                RunList::from_scores("q", retriever, "retrieve"),
                                                w_rerank, w_retrieve));
          },
          py::arg("reranker"), py::arg("retriever"), py::arg("w_rerank") = 0.6,
          py::arg("w_retrieve") = 0.4,
          "Fuse two [(doc_id, score)] lists; returns the fused list, best first.");

    // --- protocol and rewards
    py::class_<rewards::RewardParams>(m, "RewardParams")
        .def(py::init<>())
        .def_property(
            "alpha", [](const rewards::RewardParams& p) { return p.weights.alpha; },
            [](rewards::RewardParams& p, double v) { p.weights.alpha = v; })
        .def_property(
            "beta", [](const rewards::RewardParams& p) { return p.weights.beta; },
            [](rewards::RewardParams& p, double v) { p.weights.beta = v; })
        .def_property(
            "gamma", [](const rewards::RewardParams& p) { return p.weights.gamma; },
            [](rewards::RewardParams& p, double v) { p.weights.gamma = v; })
        .def_property(
            "ndcg_vs_rbo", [](const rewards::RewardParams& p) { return p.weights.ndcg_vs_rbo; },
            [](rewards::RewardParams& p, double v) { p.weights.ndcg_vs_rbo = v; })
        .def_readwrite("ndcg_k", &rewards::RewardParams::ndcg_k)
        .def_readwrite("recall_k", &rewards::RewardParams::recall_k)
        .def_readwrite("rbo_persistence", &rewards::RewardParams::rbo_persistence)
        .def_readwrite("relevance_threshold", &rewards::RewardParams::relevance_threshold)
        .def_readwrite("epsilon", &rewards::RewardParams::epsilon)
        .def_readwrite("clamp_heterogeneous_at_zero",
                       &rewards::RewardParams::clamp_heterogeneous_at_zero);

    m.def("parse_response",
          [](const std::string& raw, std::size_t n, bool clamp) {
              const auto r = protocol::parse_response(raw, n, {clamp});
              py::dict d;
              d["output_format_ok"] = r.verdict.output_format_ok;
              d["answer_format_ok"] = r.verdict.answer_format_ok;
              d["scores"] = r.score_map ? py::cast(r.score_map->scores()) : py::none();
              d["reason"] = r.score_map ? py::cast(r.score_map->reason()) : py::none();
              d["detail"] = r.detail;
              return d;
          },
          py::arg("raw"), py::arg("n"), py::arg("clamp_out_of_range") = false,
          "Classify a groupwise response; never raises on malformed text.");
    m.def("format_group_response",
          [](const std::vector<int>& scores, const std::string& reason) {
              return protocol::format_group_response(scores, reason);
          },
          py::arg("scores"), py::arg("reason") = "");
    m.def("score_response",
          [](const std::string& raw, const std::vector<double>& gt,
             const std::optional<rewards::RewardParams>& params) {
              const auto p = params.value_or(rewards::RewardParams{});
              const auto r = protocol::parse_response(raw, gt.size());
              return breakdown_dict(
                  rewards::score_response(r.verdict, r.score_map ? &*r.score_map : nullptr, gt, p),
                  r.detail);
          },
          py::arg("raw"), py::arg("gt"), py::arg("params") = py::none(),
          "Parse a response and compute every reward component and the gated reward.");
    m.def("heterogeneous_reward",
          [](double r_recall, double r_rank, double r_dist, double alpha, double beta, double gamma) {
              return rewards::heterogeneous_reward(r_recall, r_rank, r_dist, {alpha, beta, gamma, 0.5});
          },
          py::arg("r_recall"), py::arg("r_rank"), py::arg("r_dist"), py::arg("alpha") = 0.2,
          py::arg("beta") = 0.5, py::arg("gamma") = 0.1);
    m.def("final_reward",
          [](bool output_ok, bool answer_ok, double r_h) {
              return rewards::final_reward({output_ok, answer_ok}, r_h);
          },
          py::arg("output_format_ok"), py::arg("answer_format_ok"), py::arg("r_h"));
    m.def("grpo_advantages",
          [](const std::vector<double>& r) { return rewards::grpo_advantages(r); },
          py::arg("rewards"));

    // --- grouping and cost
    auto ranges = [](const std::vector<orchestrator::IndexRange>& rs) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& r : rs) out.emplace_back(r.begin, r.end);
        return out;
    };
    m.def("partition_disjoint",
          [ranges](std::size_t n, std::size_t c) { return ranges(orchestrator::partition_disjoint(n, c)); },
          py::arg("n"), py::arg("group_size"), "Half-open [begin, end) index ranges.");
    m.def("partition_sliding",
          [ranges](std::size_t n, std::size_t w, std::size_t s) {
              return ranges(orchestrator::partition_sliding(n, w, s));
          },
          py::arg("n"), py::arg("window"), py::arg("step"), "Half-open [begin, end) index ranges.");
    m.def("paradigms", [] {
        std::vector<std::string> names;
        for (const auto& p : orchestrator::paradigms()) names.emplace_back(p.name);
        return names;
    });
    m.def("estimate_llm_calls",
          [](const std::string& paradigm, std::uint64_t n, std::uint64_t c, std::uint64_t w,
             std::uint64_t s, std::uint64_t k, std::uint64_t r) {
              return orchestrator::estimate_llm_calls(orchestrator::parse_paradigm(paradigm),
                                                      {n, c, w, s, k, r});
          },
          py::arg("paradigm"), py::arg("N") = 100, py::arg("c") = 20, py::arg("w") = 20,
          py::arg("s") = 10, py::arg("k") = 10, py::arg("r") = 1);

    // --- prompts and reranking
    m.def("render_group_prompt",
          [](const std::string& query, const std::vector<std::string>& passages) {
              std::vector<Document> docs;
              for (std::size_t i = 0; i < passages.size(); ++i)
                  docs.push_back({std::to_string(i + 1), passages[i]});
              return protocol::render_group_prompt(protocol::PromptTemplate::default_groupwise(),
                                                   {"q", query, {}}, docs);
          },
          py::arg("query"), py::arg("passages"));

    m.def(
        "rerank",
        [](const std::string& query, const Scored& candidates,
           const std::map<std::string, std::string>& texts, const py::function& scorer,
           std::size_t group_size, const std::string& mode, std::size_t window, std::size_t step,
           std::size_t ensemble_n, std::uint64_t seed, std::size_t max_retries,
           std::size_t max_in_flight) {
            orchestrator::RerankConfig cfg;
            cfg.group_size = group_size;
            cfg.mode = orchestrator::parse_grouping_mode(mode);
            cfg.window = window;
            cfg.step = step;
            cfg.ensemble_n = ensemble_n;
            cfg.seed = seed;
            cfg.max_retries = max_retries;
            cfg.max_in_flight = max_in_flight;

            const auto run = RunList::from_scores("q", candidates, "input");
            Corpus corpus;
            for (const auto& [id, text] : texts) corpus[id] = {id, text};

            CallbackBackend backend(
                [&scorer](const std::string& prompt) {
                    py::gil_scoped_acquire gil;
                    try {
                        return scorer(prompt).cast<std::string>();
                    } catch (py::error_already_set& e) {
                        throw BackendError(std::string("python scorer raised: ") + e.what());
                    } catch (const py::cast_error&) {
                        throw BackendError("python scorer must return a str");
                    }
                },
                "python");
            std::vector<std::string> warnings;
            orchestrator::RerankResult result;
            {
                py::gil_scoped_release release;
                result = orchestrator::rerank({"q", query, {}}, run, corpus, backend, cfg,
                                              protocol::PromptTemplate::default_groupwise(),
                                              [&](const std::string& w) { warnings.push_back(w); });
            }
            for (const auto& w : warnings)
                PyErr_WarnEx(PyExc_RuntimeWarning, w.c_str(), 1);
            return to_pairs(result.run);
        },
        py::arg("query"), py::arg("candidates"), py::arg("texts"), py::arg("scorer"),
        py::arg("group_size") = 20, py::arg("mode") = "disjoint", py::arg("window") = 20,
        py::arg("step") = 10, py::arg("ensemble_n") = 1, py::arg("seed") = 0,
        py::arg("max_retries") = 2, py::arg("max_in_flight") = 8,
        "Rerank [(doc_id, retrieval_score)] with `scorer(prompt) -> str`.\n"
        "`scorer` may be called from several threads at once.");

    m.def("evaluate_files",
          [](const std::string& run_path, const std::string& qrels_path,
             const std::vector<std::size_t>& cutoffs) {
              const WarningSink quiet = [](const std::string&) {};
              const auto report = eval::evaluate(read_run_file(run_path),
                                                 read_qrels(qrels_path, quiet), cutoffs, quiet);
              return eval::to_json(report);
          },
          py::arg("run_path"), py::arg("qrels_path"), py::arg("cutoffs") = std::vector<std::size_t>{10},
          "Evaluate a TREC run against qrels; returns the JSON report as a string.");
}
