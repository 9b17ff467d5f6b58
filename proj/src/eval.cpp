#include "grouprank/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "grouprank/metrics.hpp"
#include "grouprank/protocol.hpp"

namespace grouprank::eval {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> metric_names(const std::vector<std::size_t>& cutoffs) {
    std::vector<std::string> names;
    for (auto k : cutoffs) names.push_back("ndcg@" + std::to_string(k));
    for (auto k : cutoffs) names.push_back("recall@" + std::to_string(k));
    return names;
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

std::string pad(const std::string& s, std::size_t width, bool left = true) {
    if (s.size() >= width) return s;
    return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

}  // namespace

EvalReport evaluate(const std::vector<RunList>& runs, const Qrels& qrels,
                    const std::vector<std::size_t>& cutoffs, const WarningSink& warn) {
    if (cutoffs.empty()) throw std::invalid_argument("evaluate: no cutoffs");
    for (auto k : cutoffs)
        if (k == 0) throw std::invalid_argument("evaluate: cutoffs must be positive");

    EvalReport report;
    report.cutoffs = cutoffs;
    std::vector<const RunList*> scored;
    for (const auto& run : runs) {
        if (qrels.has_query(run.query_id)) {
            scored.push_back(&run);
        } else {
            report.excluded.push_back(run.query_id);
            if (warn) warn("query " + run.query_id + " has no judgments; excluded from the mean");
        }
    }
    if (scored.empty()) throw EmptyEvaluation("no run query appears in the qrels");
    std::sort(scored.begin(), scored.end(),
              [](const RunList* a, const RunList* b) { return a->query_id < b->query_id; });

    for (const auto* run : scored) {
        QueryMetrics qm{run->query_id, {}};
        const auto ids = run->doc_ids();
        for (auto k : cutoffs) {
            qm.values["ndcg@" + std::to_string(k)] =
                metrics::ndcg_at_k(ids, qrels, run->query_id, k).value;
            qm.values["recall@" + std::to_string(k)] =
                metrics::recall_at_k(ids, qrels, run->query_id, k).value;
        }
        report.per_query.push_back(std::move(qm));
    }
    for (const auto& name : metric_names(cutoffs)) {
        double total = 0.0;
        for (const auto& qm : report.per_query) total += qm.values.at(name);
        report.mean[name] = total / static_cast<double>(report.per_query.size());
    }
    return report;
}

std::string render_table(const EvalReport& report) {
    const auto names = metric_names(report.cutoffs);
    std::size_t qwidth = 5;
    for (const auto& qm : report.per_query) qwidth = std::max(qwidth, qm.query_id.size());
    std::size_t mwidth = 8;
    for (const auto& n : names) mwidth = std::max(mwidth, n.size());

    std::ostringstream out;
    out << pad("query", qwidth);
    for (const auto& n : names) out << "  " << pad(n, mwidth, false);
    out << '\n';
    auto row = [&](const std::string& label, const std::map<std::string, double>& values) {
        out << pad(label, qwidth);
        for (const auto& n : names) out << "  " << pad(fixed(values.at(n)), mwidth, false);
        out << '\n';
    };
    for (const auto& qm : report.per_query) row(qm.query_id, qm.values);
    row("mean", report.mean);
    return out.str();
}

std::string to_json(const EvalReport& report) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["report"] = "evaluate";
    j["cutoffs"] = report.cutoffs;
    j["num_queries"] = report.per_query.size();
    ordered_json mean = ordered_json::object();
    for (const auto& n : metric_names(report.cutoffs)) mean[n] = report.mean.at(n);
    j["mean"] = std::move(mean);
    ordered_json per = ordered_json::array();
    for (const auto& qm : report.per_query) {
        ordered_json q;
        q["query_id"] = qm.query_id;
        for (const auto& n : metric_names(report.cutoffs)) q[n] = qm.values.at(n);
        per.push_back(std::move(q));
    }
    j["per_query"] = std::move(per);
    j["excluded"] = report.excluded;
    return j.dump(2);
}

std::vector<CostRow> cost_report(const orchestrator::CostParams& params) {
    std::vector<CostRow> rows;
    for (const auto& info : orchestrator::paradigms())
        rows.push_back({info, orchestrator::estimate_llm_calls(info.paradigm, params)});
    return rows;
}

std::string render_table(const std::vector<CostRow>& rows, const orchestrator::CostParams& p) {
    std::ostringstream out;
    out << "N=" << p.n << " c=" << p.c << " w=" << p.w << " s=" << p.s << " k=" << p.k
        << " r=" << p.r << '\n';
    out << pad("method", 20) << "  " << pad("generate", 8) << "  " << pad("batching", 8) << "  "
        << pad("complexity", 16) << "  " << pad("llm_calls", 9, false) << '\n';
    for (const auto& r : rows)
        out << pad(std::string(r.info.name), 20) << "  " << pad(r.info.generate ? "yes" : "no", 8)
            << "  " << pad(r.info.batching ? "yes" : "no", 8) << "  "
            << pad(std::string(r.info.complexity), 16) << "  "
            << pad(std::to_string(r.calls), 9, false) << '\n';
    return out.str();
}

std::string to_json(const std::vector<CostRow>& rows, const orchestrator::CostParams& p) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["report"] = "cost";
    j["params"] = {{"N", p.n}, {"c", p.c}, {"w", p.w}, {"s", p.s}, {"k", p.k}, {"r", p.r}};
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json row;
        row["method"] = r.info.name;
        row["generate"] = r.info.generate;
        row["batching"] = r.info.batching;
        row["complexity"] = r.info.complexity;
        row["llm_calls"] = r.calls;
        arr.push_back(std::move(row));
    }
    j["rows"] = std::move(arr);
    return j.dump(2);
}


std::vector<std::string> audit_rewards(const std::string& input_json,
                                       const rewards::RewardParams& params) {
    using nlohmann::json;
    rewards::validate(params);
    auto doc = json::parse(input_json, nullptr, false);
    if (doc.is_discarded()) throw FormatError("<reward input>", 0, "invalid JSON");
    const json* items = &doc;
    if (doc.is_object() && doc.contains("items")) items = &doc["items"];
    if (!items->is_array())
        throw FormatError("<reward input>", 0, "expected an array of {output, gt} items");

    auto field = [](const json& item, std::initializer_list<const char*> keys) -> const json* {
        for (const char* k : keys)
            if (auto it = item.find(k); it != item.end()) return &*it;
        return nullptr;
    };

    std::vector<ordered_json> rows;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < items->size(); ++i) {
        const auto& item = (*items)[i];
        const std::string where = "item " + std::to_string(i);
        if (!item.is_object()) throw FormatError("<reward input>", 0, where + " is not an object");
        const json* output = field(item, {"output", "response", "raw"});
        const json* gt = field(item, {"gt", "gt_scores"});
        if (!output || !output->is_string())
            throw FormatError("<reward input>", 0, where + " lacks a string 'output'");
        if (!gt || !gt->is_array() || gt->empty())
            throw FormatError("<reward input>", 0, where + " lacks a non-empty 'gt' list");
        std::vector<double> gt_scores;
        for (const auto& v : *gt) {
            if (!v.is_number()) throw FormatError("<reward input>", 0, where + ": non-numeric gt");
            gt_scores.push_back(v.get<double>());
        }

        const auto parsed = protocol::parse_response(output->get<std::string>(), gt_scores.size());
        const auto b = rewards::score_response(
            parsed.verdict, parsed.score_map ? &*parsed.score_map : nullptr, gt_scores, params);

        ordered_json row;
        if (auto id = field(item, {"id"})) row["id"] = *id;
        if (auto g = field(item, {"group"})) {
            row["group"] = *g;
            groups[g->dump()].push_back(rows.size());
        }
        row["output_format_ok"] = b.verdict.output_format_ok;
        row["answer_format_ok"] = b.verdict.answer_format_ok;
        row["r_recall"] = b.r_recall;
        row["r_rank"] = b.r_rank;
        row["r_dist"] = b.r_dist;
        row["r_h"] = b.r_h;
        row["final"] = b.final;
        if (!parsed.detail.empty()) row["detail"] = parsed.detail;
        rows.push_back(std::move(row));
    }
    for (const auto& [_, members] : groups) {
        std::vector<double> finals;
        for (auto i : members) finals.push_back(rows[i]["final"].get<double>());
        const auto adv = rewards::grpo_advantages(finals);
        for (std::size_t j = 0; j < members.size(); ++j) rows[members[j]]["advantage"] = adv[j];
    }
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.dump());
    return out;
}

}  // namespace grouprank::eval
