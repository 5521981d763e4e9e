#pragma once

#include "nrp/metrics.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nrp {

struct FamilyWinner {
    Family family = Family::Logistic;
    std::string spec_id;
    std::string groups;
    /// Aligned with kHyperparameterNames.
    std::vector<std::string> hyperparameters;
    /// Mean and population variance over the non-empty values in the selection window.
    double mean = 0.0;
    double variance = 0.0;
    /// (split, value) over the selection window; empty values kept as gaps.
    std::vector<std::pair<int, std::optional<double>>> trajectory;
    std::size_t n_candidates = 0;
};

struct SelectionResult {
    std::string metric;
    /// Splits averaged over: every evaluated split except the last.
    std::vector<int> window;
    int final_split = 0;
    /// One winner per family that has at least one defined value in the window.
    std::vector<FamilyWinner> winners;

    const FamilyWinner* winner(Family f) const;

    nlohmann::json to_json() const;
    static SelectionResult from_json(const nlohmann::json& j);
};

/// Per family, the spec with the highest mean metric over all splits but the last.
///
/// Empty values are skipped. Equal means go to the lower variance, then to the
/// lexicographically smaller spec id.
SelectionResult best_average(std::span<const EvaluationRecord> records, std::string_view metric = "roc_auc");

struct DeploymentRow {
    Family family = Family::Logistic;
    std::string spec_id;
    std::string groups;
    std::vector<std::string> hyperparameters;
    MetricValues metrics;
};

struct DeploymentReport {
    int split = 0;
    std::vector<DeploymentRow> rows;
    /// Pairwise Jaccard similarity of the winners' risk lists, in row order.
    std::vector<std::vector<double>> jaccard;

    std::string to_csv() const;
    std::string jaccard_csv() const;
};

/// Final-split metrics of each winner and the similarity of their risk lists.
///
/// `risk_lists` maps spec id to the winner's top list on the final split.
/// Throws MISSING_EVALUATION when a winner has no final record or list.
DeploymentReport deployment_report(const SelectionResult& selection,
                                   std::span<const EvaluationRecord> final_records,
                                   const std::map<std::string, std::vector<std::string>>& risk_lists);

} // namespace nrp
