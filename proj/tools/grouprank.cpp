// grouprank: command-line driver for groupwise reranking, training-data
// synthesis, run evaluation and fusion, reward auditing and cost tables.
//
// Data goes to stdout (or --out), diagnostics to stderr. The exit code is 0
// iff no error was reported.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grouprank/backend.hpp"
#include "grouprank/config.hpp"
#include "grouprank/core.hpp"
#include "grouprank/eval.hpp"
#include "grouprank/fusion.hpp"
#include "grouprank/orchestrator.hpp"
#include "grouprank/protocol.hpp"
#include "grouprank/rewards.hpp"
#include "grouprank/synth.hpp"

namespace {

using namespace grouprank;

/// Thrown for user errors that should end the run with exit code 1.
struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
void override_with(T& field, const std::optional<T>& flag) {
    if (flag) field = *flag;
}

KeyValues load_config(const std::string& path) {
    return path.empty() ? KeyValues{} : KeyValues::load(path);
}

/// `--out -` or no --out writes to stdout.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw CliError("cannot write " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string read_all(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- backend selection ---------------------------------------------------

struct BackendFlags {
    std::optional<std::string> kind;  // http | oracle
    std::optional<std::string> url;
    std::optional<std::string> model;
    std::optional<std::string> api_key_env;
    std::optional<long long> timeout_ms;
    std::optional<double> temperature;

    void add_to(CLI::App& cmd, const std::string& prefix, const std::string& what) {
        cmd.add_option("--" + prefix + "backend", kind, what + " backend: http or oracle")
            ->check(CLI::IsMember({"http", "oracle"}));
        cmd.add_option("--" + prefix + "url", url, what + " chat-completions endpoint URL");
        cmd.add_option("--" + prefix + "model", model, what + " model name sent to the endpoint");
        cmd.add_option("--" + prefix + "api-key-env", api_key_env,
                       "environment variable holding the bearer token (default GROUPRANK_API_KEY)");
        cmd.add_option("--" + prefix + "timeout-ms", timeout_ms, "per-request timeout");
        cmd.add_option("--" + prefix + "temperature", temperature, "sampling temperature");
    }
};

struct OracleInputs {
    std::string qrels_path;
    const std::vector<Query>* queries = nullptr;
    const Corpus* corpus = nullptr;
};

/// Config keys are read as `<prefix>backend`, `<prefix>url`, ... with the
/// prefix "" for rerank and "pointwise."/"listwise." for synthesize.
std::unique_ptr<ScorerBackend> make_backend(const BackendFlags& flags, const KeyValues& kv,
                                            const std::string& prefix, const OracleInputs& oracle) {
    auto pick = [&](const std::optional<std::string>& flag, const std::string& key,
                    std::string fallback) {
        if (flag) return *flag;
        if (auto v = kv.get(prefix + key)) return *v;
        return fallback;
    };
    const auto kind = pick(flags.kind, "backend", "http");
    if (kind == "oracle") {
        if (oracle.qrels_path.empty()) throw CliError("the oracle backend needs --qrels");
        return std::make_unique<QrelsOracleBackend>(*oracle.queries, *oracle.corpus,
                                                    read_qrels(oracle.qrels_path));
    }
    if (kind != "http") throw CliError("unknown backend '" + kind + "'");

    HttpBackendConfig cfg;
    cfg.url = pick(flags.url, "url", "");
    cfg.model = pick(flags.model, "model", "");
    if (cfg.url.empty() || cfg.model.empty())
        throw CliError("the http backend needs a URL and a model name");
    const auto env = pick(flags.api_key_env, "api_key_env", "GROUPRANK_API_KEY");
    if (const char* token = std::getenv(env.c_str())) cfg.api_key = token;
    if (flags.timeout_ms) cfg.timeout = std::chrono::milliseconds(*flags.timeout_ms);
    else if (auto v = kv.get_int(prefix + "timeout_ms")) cfg.timeout = std::chrono::milliseconds(*v);
    if (flags.temperature) cfg.temperature = *flags.temperature;
    else if (auto v = kv.get_real(prefix + "temperature")) cfg.temperature = *v;
    if (auto v = kv.get_int(prefix + "http_attempts")) cfg.max_attempts = static_cast<int>(*v);
    if (auto v = kv.get_int(prefix + "backoff_ms")) cfg.backoff_base = std::chrono::milliseconds(*v);
    if (auto v = kv.get_real(prefix + "backoff_factor")) cfg.backoff_factor = *v;
    return std::make_unique<HttpChatBackend>(cfg);
}

std::map<std::string, Query> queries_by_id(const std::vector<Query>& queries) {
    std::map<std::string, Query> out;
    for (const auto& q : queries) out.emplace(q.id, q);
    return out;
}

// --- rerank --------------------------------------------------------------

struct RerankArgs {
    std::string run, corpus, queries, out, config, qrels, prompt_template;
    BackendFlags backend;
    std::optional<std::size_t> group_size, window, step, ensemble_n, max_retries, max_in_flight,
        depth;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<bool> prefer_rewritten, fuse_with_retriever;
    std::optional<double> w_rerank, w_retrieve;
};

void add_rerank(CLI::App& app, RerankArgs& a, int& status) {
    auto* cmd = app.add_subcommand("rerank", "Rerank a retriever run with a groupwise scorer");
    cmd->add_option("--run", a.run, "input TREC run (retriever candidates)")->required();
    cmd->add_option("--corpus", a.corpus, "JSONL corpus {id, text}")->required();
    cmd->add_option("--queries", a.queries, "JSONL queries {id, text[, rewritten_text]}")
        ->required();
    cmd->add_option("--out", a.out, "output TREC run (default stdout)");
    cmd->add_option("--config", a.config, "flat key = value config file");
    cmd->add_option("--qrels", a.qrels, "qrels for the oracle backend");
    cmd->add_option("--prompt-template", a.prompt_template,
                    "groupwise prompt file with {TOPK}, {QUERY}, {PASSAGES}");
    a.backend.add_to(*cmd, "", "scorer");
    cmd->add_option("--seed", a.seed, "shuffle seed");
    cmd->add_option("--mode", a.mode, "disjoint or sliding")
        ->check(CLI::IsMember({"disjoint", "disjoint-groups", "sliding", "sliding-window"}));
    cmd->add_option("-c,--group-size", a.group_size, "documents per request (default 20)");
    cmd->add_option("-w,--window", a.window, "sliding window size (default 20)");
    cmd->add_option("-s,--step", a.step, "sliding step (default 10)");
    cmd->add_option("--ensemble-n", a.ensemble_n, "self-ensemble rounds (default 1)");
    cmd->add_option("--max-retries", a.max_retries, "retries after an unparseable response");
    cmd->add_option("--max-in-flight", a.max_in_flight, "concurrent requests (default 8)");
    cmd->add_option("--depth", a.depth, "rerank only the top N candidates (default 100, 0 = all)");
    cmd->add_flag("--prefer-rewritten{true}", a.prefer_rewritten,
                  "use rewritten query text when available");
    cmd->add_flag("--fuse-with-retriever{true}", a.fuse_with_retriever,
                  "fuse reranker scores with retriever scores");
    cmd->add_option("--w-rerank", a.w_rerank, "reranker weight for fusion (default 0.6)");
    cmd->add_option("--w-retrieve", a.w_retrieve, "retriever weight for fusion (default 0.4)");

    cmd->callback([&a, &status] {
        const auto kv = load_config(a.config);
        orchestrator::RerankConfig cfg;
        cfg.apply(kv);
        override_with(cfg.group_size, a.group_size);
        override_with(cfg.window, a.window);
        override_with(cfg.step, a.step);
        override_with(cfg.ensemble_n, a.ensemble_n);
        override_with(cfg.max_retries, a.max_retries);
        override_with(cfg.max_in_flight, a.max_in_flight);
        override_with(cfg.seed, a.seed);
        if (a.mode) cfg.mode = orchestrator::parse_grouping_mode(*a.mode);
        override_with(cfg.prefer_rewritten_query, a.prefer_rewritten);
        override_with(cfg.fuse_with_retriever, a.fuse_with_retriever);
        override_with(cfg.w_rerank, a.w_rerank);
        override_with(cfg.w_retrieve, a.w_retrieve);
        cfg.validate();
        std::size_t depth = kv.get_uint("depth").value_or(100);
        override_with(depth, a.depth);

        const auto runs = read_run_file(a.run);
        const auto corpus = read_corpus(a.corpus);
        const auto queries = read_queries(a.queries);
        const auto by_id = queries_by_id(queries);
        auto backend = make_backend(a.backend, kv, "", {a.qrels, &queries, &corpus});
        const auto tmpl =
            !a.prompt_template.empty()
                ? protocol::PromptTemplate::from_file(protocol::PromptKind::Groupwise,
                                                      a.prompt_template)
            : kv.get("prompt_template")
                ? protocol::PromptTemplate::from_file(protocol::PromptKind::Groupwise,
                                                      *kv.get("prompt_template"))
                : protocol::PromptTemplate::default_groupwise();

        Output out(a.out);
        std::size_t calls = 0, failed = 0;
        for (auto run : runs) {
            auto q = by_id.find(run.query_id);
            if (q == by_id.end()) {
                std::cerr << "warning: query " << run.query_id << " has no text; skipped\n";
                status = 1;
                continue;
            }
            if (depth != 0 && run.entries.size() > depth) run.entries.resize(depth);
            try {
                auto result = orchestrator::rerank(q->second, run, corpus, *backend, cfg, tmpl);
                calls += result.stats.backend_calls;
                failed += result.stats.failed_groups;
                write_run(out.stream(), result.run);
            } catch (const orchestrator::RerankAborted& e) {
                write_run(out.stream(), e.partial);
                std::cerr << "error: " << e.what() << " (partial run written: "
                          << e.partial.size() << " of " << run.size() << " documents, "
                          << e.stats.groups << " groups scored)\n";
                status = 1;
                return;
            }
        }
        std::cerr << "rerank: " << runs.size() << " queries, " << calls << " backend calls, "
                  << failed << " groups fell back to 0 (seed " << cfg.seed << ")\n";
    });
}

// --- synthesize ------------------------------------------------------------

struct SynthArgs {
    std::string bm25_run, dense_run, corpus, queries, out, config, journal, qrels;
    BackendFlags pointwise, listwise;
    std::optional<double> alpha, w_sparse, w_dense;
    std::optional<std::size_t> top_k_in, top_k_out, max_retries, max_in_flight;
};

void add_synthesize(CLI::App& app, SynthArgs& a, int& status) {
    auto* cmd = app.add_subcommand("synthesize", "Build fused-label training records");
    cmd->add_option("--bm25-run", a.bm25_run, "sparse retriever TREC run")->required();
    cmd->add_option("--dense-run", a.dense_run, "dense retriever TREC run")->required();
    cmd->add_option("--corpus", a.corpus, "JSONL corpus {id, text}")->required();
    cmd->add_option("--queries", a.queries, "JSONL queries {id, text}")->required();
    cmd->add_option("--out", a.out, "output JSONL of training records (default stdout)");
    cmd->add_option("--config", a.config, "flat key = value config file");
    cmd->add_option("--journal", a.journal, "append-only annotation journal for resuming");
    cmd->add_option("--qrels", a.qrels, "qrels for oracle teachers");
    a.pointwise.add_to(*cmd, "pointwise-", "pointwise teacher");
    a.listwise.add_to(*cmd, "listwise-", "listwise teacher");
    cmd->add_option("--alpha", a.alpha, "pointwise share of the fused label (default 0.5)");
    cmd->add_option("--w-sparse", a.w_sparse, "BM25 weight in the hybrid score (default 0.5)");
    cmd->add_option("--w-dense", a.w_dense, "dense weight in the hybrid score (default 0.5)");
    cmd->add_option("--top-k-in", a.top_k_in, "candidates read from each run (default 100)");
    cmd->add_option("--top-k-out", a.top_k_out, "candidates per record (default 50)");
    cmd->add_option("--max-retries", a.max_retries, "retries after an unparseable answer");
    cmd->add_option("--max-in-flight", a.max_in_flight, "concurrent pointwise requests");

    cmd->callback([&a, &status] {
        const auto kv = load_config(a.config);
        synth::SynthConfig cfg;
        cfg.apply(kv);
        override_with(cfg.alpha, a.alpha);
        override_with(cfg.w_sparse, a.w_sparse);
        override_with(cfg.w_dense, a.w_dense);
        override_with(cfg.top_k_in, a.top_k_in);
        override_with(cfg.top_k_out, a.top_k_out);
        override_with(cfg.max_retries, a.max_retries);
        override_with(cfg.max_in_flight, a.max_in_flight);
        cfg.validate();

        const auto corpus = read_corpus(a.corpus);
        const auto queries = read_queries(a.queries);
        const auto bm25 = index_by_query(read_run_file(a.bm25_run));
        const auto dense = index_by_query(read_run_file(a.dense_run));
        const OracleInputs oracle{a.qrels, &queries, &corpus};
        auto pointwise = make_backend(a.pointwise, kv, "pointwise.", oracle);
        auto listwise = make_backend(a.listwise, kv, "listwise.", oracle);

        std::unique_ptr<synth::Journal> journal =
            a.journal.empty() ? std::make_unique<synth::Journal>()
                              : std::make_unique<synth::Journal>(a.journal);
        Output out(a.out);
        const auto summary = synth::synthesize(queries, bm25, dense, corpus,
                                               {*pointwise, *listwise}, cfg, *journal,
                                               out.stream());
        std::cerr << "synthesize: " << summary.records << " records, " << summary.skipped.size()
                  << " queries skipped, " << summary.pointwise_calls << " pointwise + "
                  << summary.listwise_calls << " listwise calls, " << summary.reused
                  << " answers reused from the journal\n";
        if (!summary.skipped.empty()) status = 1;
    });
}

// --- evaluate --------------------------------------------------------------

struct EvalArgs {
    std::string run, qrels, config, format = "text", json_out;
    std::vector<std::size_t> cutoffs;
};

void add_evaluate(CLI::App& app, EvalArgs& a, int& status) {
    auto* cmd = app.add_subcommand("evaluate", "NDCG@k and Recall@k of a run against qrels");
    cmd->add_option("--run", a.run, "TREC run")->required();
    cmd->add_option("--qrels", a.qrels, "TREC qrels")->required();
    cmd->add_option("-k,--cutoffs", a.cutoffs, "cutoffs (default 10)")->delimiter(',');
    cmd->add_option("--format", a.format, "stdout format: text or json")
        ->check(CLI::IsMember({"text", "json"}));
    cmd->add_option("--json-out", a.json_out, "also write the JSON report to this file");
    cmd->add_option("--config", a.config, "flat key = value config file (key: cutoffs)");

    cmd->callback([&a, &status] {
        const auto kv = load_config(a.config);
        auto cutoffs = a.cutoffs;
        if (cutoffs.empty()) {
            if (auto v = kv.get("cutoffs")) {
                std::stringstream ss(*v);
                std::string item;
                while (std::getline(ss, item, ','))
                    cutoffs.push_back(static_cast<std::size_t>(std::stoul(item)));
            } else {
                cutoffs = {10};
            }
        }
        const auto runs = read_run_file(a.run);
        const auto qrels = read_qrels(a.qrels);
        bool warned = false;
        const auto report = eval::evaluate(runs, qrels, cutoffs, [&](const std::string& msg) {
            warned = true;
            std::cerr << "warning: " << msg << '\n';
        });
        if (warned) status = 1;
        const auto json = eval::to_json(report);
        if (a.format == "json") std::cout << json << '\n';
        else std::cout << eval::render_table(report);
        if (!a.json_out.empty()) {
            Output file(a.json_out);
            file.stream() << json << '\n';
        }
    });
}

// --- fuse ------------------------------------------------------------------

struct FuseArgs {
    std::string reranker_run, retriever_run, out, config, dataset;
    std::optional<double> w_rerank, w_retrieve;
};

void add_fuse(CLI::App& app, FuseArgs& a, int& status) {
    auto* cmd = app.add_subcommand("fuse", "Weighted min-max fusion of two runs");
    cmd->add_option("--reranker-run", a.reranker_run, "reranker TREC run")->required();
    cmd->add_option("--retriever-run", a.retriever_run, "retriever TREC run")->required();
    cmd->add_option("--out", a.out, "output TREC run (default stdout)");
    cmd->add_option("--w-rerank", a.w_rerank, "reranker weight (default 0.6)");
    cmd->add_option("--w-retrieve", a.w_retrieve, "retriever weight (default 0.4)");
    cmd->add_option("--dataset", a.dataset,
                    "read <dataset>.w_rerank / <dataset>.w_retrieve from the config");
    cmd->add_option("--config", a.config, "flat key = value config file");

    cmd->callback([&a, &status] {
        const auto kv = load_config(a.config);
        const std::string prefix = a.dataset.empty() ? "" : a.dataset + ".";
        double w_rerank = kv.get_real(prefix + "w_rerank").value_or(
            kv.get_real("w_rerank").value_or(0.6));
        double w_retrieve = kv.get_real(prefix + "w_retrieve").value_or(
            kv.get_real("w_retrieve").value_or(0.4));
        override_with(w_rerank, a.w_rerank);
        override_with(w_retrieve, a.w_retrieve);

        const auto rerank = read_run_file(a.reranker_run);
        const auto retrieve = index_by_query(read_run_file(a.retriever_run));
        Output out(a.out);
        for (const auto& run : rerank) {
            auto it = retrieve.find(run.query_id);
            if (it == retrieve.end()) {
                std::cerr << "warning: query " << run.query_id
                          << " missing from the retriever run; fused with nothing\n";
                status = 1;
            }
            const RunList empty{run.query_id, {}, {}};
            write_run(out.stream(), fusion::fuse_runs(run, it == retrieve.end() ? empty : it->second,
                                                      w_rerank, w_retrieve));
        }
    });
}

// --- reward ----------------------------------------------------------------

struct RewardArgs {
    std::string input, out, config;
    std::optional<double> alpha, beta, gamma, ndcg_vs_rbo, threshold, rbo_p;
    std::optional<std::size_t> ndcg_k, recall_k;
    std::optional<bool> clamp;
};

void add_reward(CLI::App& app, RewardArgs& a, int& /*status*/) {
    auto* cmd = app.add_subcommand("reward", "Audit RL rollouts: rewards as JSON lines");
    cmd->add_option("--input", a.input, "JSON array of {output, gt[, id, group]}")->required();
    cmd->add_option("--out", a.out, "output JSONL (default stdout)");
    cmd->add_option("--config", a.config, "flat key = value config file");
    cmd->add_option("--alpha", a.alpha, "recall weight (default 0.2)");
    cmd->add_option("--beta", a.beta, "ranking weight (default 0.5)");
    cmd->add_option("--gamma", a.gamma, "distribution weight (default 0.1)");
    cmd->add_option("--ndcg-vs-rbo", a.ndcg_vs_rbo, "NDCG share of the ranking reward (0.5)");
    cmd->add_option("--ndcg-k", a.ndcg_k, "NDCG cutoff inside the ranking reward (10)");
    cmd->add_option("--recall-k", a.recall_k, "recall cutoff (10)");
    cmd->add_option("--rbo-p", a.rbo_p, "RBO persistence (0.9)");
    cmd->add_option("--relevance-threshold", a.threshold, "gt score counted as relevant (0.5)");
    cmd->add_flag("--clamp-rh{true}", a.clamp, "clamp the heterogeneous reward at 0");

    cmd->callback([&a] {
        const auto kv = load_config(a.config);
        rewards::RewardParams p;
        auto& w = p.weights;
        w.alpha = kv.get_real("alpha").value_or(w.alpha);
        w.beta = kv.get_real("beta").value_or(w.beta);
        w.gamma = kv.get_real("gamma").value_or(w.gamma);
        w.ndcg_vs_rbo = kv.get_real("ndcg_vs_rbo").value_or(w.ndcg_vs_rbo);
        p.ndcg_k = kv.get_uint("ndcg_k").value_or(p.ndcg_k);
        p.recall_k = kv.get_uint("recall_k").value_or(p.recall_k);
        p.rbo_persistence = kv.get_real("rbo_p").value_or(p.rbo_persistence);
        p.relevance_threshold = kv.get_real("relevance_threshold").value_or(p.relevance_threshold);
        p.epsilon = kv.get_real("epsilon").value_or(p.epsilon);
        p.clamp_heterogeneous_at_zero = kv.get_bool("clamp_rh").value_or(false);
        override_with(w.alpha, a.alpha);
        override_with(w.beta, a.beta);
        override_with(w.gamma, a.gamma);
        override_with(w.ndcg_vs_rbo, a.ndcg_vs_rbo);
        override_with(p.ndcg_k, a.ndcg_k);
        override_with(p.recall_k, a.recall_k);
        override_with(p.rbo_persistence, a.rbo_p);
        override_with(p.relevance_threshold, a.threshold);
        override_with(p.clamp_heterogeneous_at_zero, a.clamp);

        const auto rows = eval::audit_rewards(read_all(a.input), p);
        Output out(a.out);
        for (const auto& row : rows) out.stream() << row << '\n';
    });
}

// --- cost ------------------------------------------------------------------

struct CostArgs {
    std::string config, format = "text";
    std::optional<std::uint64_t> n, c, w, s, k, r;
};

void add_cost(CLI::App& app, CostArgs& a, int& /*status*/) {
    auto* cmd = app.add_subcommand("cost", "Worst-case LLM calls per reranking paradigm");
    cmd->add_option("-N,--num-docs", a.n, "documents to rerank (100)");
    cmd->add_option("-c,--group-size", a.c, "documents compared per call (20)");
    cmd->add_option("-w,--window", a.w, "window size (20)");
    cmd->add_option("-s,--step", a.s, "window step (10)");
    cmd->add_option("-k,--top-k", a.k, "top documents wanted (10)");
    cmd->add_option("-r,--repeats", a.r, "repeats (1)");
    cmd->add_option("--format", a.format, "text or json")->check(CLI::IsMember({"text", "json"}));
    cmd->add_option("--config", a.config, "flat key = value config file (keys N c w s k r)");

    cmd->callback([&a] {
        const auto kv = load_config(a.config);
        orchestrator::CostParams p;
        p.n = kv.get_uint("N").value_or(p.n);
        p.c = kv.get_uint("c").value_or(p.c);
        p.w = kv.get_uint("w").value_or(p.w);
        p.s = kv.get_uint("s").value_or(p.s);
        p.k = kv.get_uint("k").value_or(p.k);
        p.r = kv.get_uint("r").value_or(p.r);
        override_with(p.n, a.n);
        override_with(p.c, a.c);
        override_with(p.w, a.w);
        override_with(p.s, a.s);
        override_with(p.k, a.k);
        override_with(p.r, a.r);
        const auto rows = eval::cost_report(p);
        if (a.format == "json") std::cout << eval::to_json(rows, p) << '\n';
        else std::cout << eval::render_table(rows, p);
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grouprank: groupwise LLM reranking toolkit"};
    app.require_subcommand(1);
    int status = 0;

    RerankArgs rerank_args;
    SynthArgs synth_args;
    EvalArgs eval_args;
    FuseArgs fuse_args;
    RewardArgs reward_args;
    CostArgs cost_args;
    add_rerank(app, rerank_args, status);
    add_synthesize(app, synth_args, status);
    add_evaluate(app, eval_args, status);
    add_fuse(app, fuse_args, status);
    add_reward(app, reward_args, status);
    add_cost(app, cost_args, status);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return status;
}
