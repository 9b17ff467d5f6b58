#pragma once

// Run evaluation (macro-averaged NDCG@k / Recall@k) and the paradigm cost
// table, each rendered as an aligned text table or versioned JSON.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "grouprank/core.hpp"
#include "grouprank/orchestrator.hpp"
#include "grouprank/rewards.hpp"

namespace grouprank::eval {

inline constexpr int kSchemaVersion = 1;

struct QueryMetrics {
    std::string query_id;
    std::map<std::string, double> values;  // "ndcg@10" -> value
};

struct EvalReport {
    std::vector<std::size_t> cutoffs;
    std::vector<QueryMetrics> per_query;  // query id order
    std::map<std::string, double> mean;
    std::vector<std::string> excluded;  // run queries absent from qrels
};

/// Thrown when no run query has judgments.
class EmptyEvaluation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scores every run query that has judgments; the rest are listed in
/// `excluded` and reported through `warn`.
EvalReport evaluate(const std::vector<RunList>& runs, const Qrels& qrels,
                    const std::vector<std::size_t>& cutoffs,
                    const WarningSink& warn = stderr_warnings());

std::string render_table(const EvalReport& report);
std::string to_json(const EvalReport& report);

struct CostRow {
    orchestrator::ParadigmInfo info;
    std::uint64_t calls = 0;
};

std::vector<CostRow> cost_report(const orchestrator::CostParams& params);
std::string render_table(const std::vector<CostRow>& rows, const orchestrator::CostParams& params);
std::string to_json(const std::vector<CostRow>& rows, const orchestrator::CostParams& params);

/// Scores logged rollouts offline. Input is a JSON array (or an object with
/// an "items" array) of {"output": raw response, "gt": [scores in [0,1]]},
/// optionally with "id" and "group". Returns one JSON object per item with
/// the verdict, every reward component, and, for items sharing a "group",
/// the GRPO advantage within that group.
std::vector<std::string> audit_rewards(const std::string& input_json,
                                       const rewards::RewardParams& params = {});

}  // namespace grouprank::eval
