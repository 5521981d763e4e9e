#pragma once

#include "nrp/features.hpp"
#include "nrp/model_zoo.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nrp {

/// Probability that a random positive outscores a random negative, ties counting one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// List length for a cutoff: ceil(pct * n), at least 1 and at most n.
std::size_t top_k(std::size_t n, double pct);

/// Panelists with the highest risk scores.
struct RiskList {
    double pct = 0.0;
    std::vector<std::string> ids;
    /// Row positions of the members, best first.
    std::vector<std::size_t> positions;
    /// Score of the last member; every member scores at least this much.
    double threshold = 0.0;
};

/// Top ceil(pct * n) rows ordered by descending score, ties by ascending id.
RiskList top_list(std::span<const double> scores, std::span<const std::string> ids, double pct);

/// Row positions of the top list. Without ids, ties fall to the lower row index.
std::vector<std::size_t> top_positions(std::span<const double> scores, double pct,
                                       std::span<const std::string> ids = {});

double precision_at_pct(std::span<const double> scores, std::span<const int> labels, double pct,
                        std::span<const std::string> ids = {});
/// Throws SINGLE_CLASS when there are no positives.
double recall_at_pct(std::span<const double> scores, std::span<const int> labels, double pct,
                     std::span<const std::string> ids = {});

/// |A ∩ B| / |A ∪ B| over distinct members; two empty lists give 1.
double jaccard(std::span<const std::string> a, std::span<const std::string> b);

struct Curves {
    /// (false positive rate, true positive rate) from (0,0) to (1,1).
    std::vector<std::pair<double, double>> roc;
    /// (recall, precision), one point per distinct score in descending order.
    std::vector<std::pair<double, double>> pr;
};

Curves curves(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under a polyline.
double trapezoid_area(std::span<const std::pair<double, double>> points);

/// Mean importance over the columns of one (concept, block) cell.
struct ImportanceCell {
    /// Concept name, or "na" for missing indicators.
    std::string concept_name;
    Block block = Block::I;
    double mean = 0.0;
    std::size_t n_columns = 0;
};

/// Occupied cells, ordered by concept (missing indicators last), then block.
std::vector<ImportanceCell> grouped_importance(std::span<const double> importance,
                                               std::span<const ColumnDescriptor> columns);

/// Metric column name for a cutoff: ("prec", 0.05) gives "prec5".
std::string cutoff_metric_name(std::string_view prefix, double pct);

/// Metric names in record order: roc_auc, prec@cutoffs, rec@cutoffs, base_rate.
std::vector<std::string> metric_names(std::span<const double> cutoffs);

using MetricValues = std::vector<std::pair<std::string, std::optional<double>>>;

/// Every metric for one test set; undefined metrics stay empty and add a flag.
struct TestEvaluation {
    MetricValues metrics;
    std::vector<std::string> flags;
};

TestEvaluation evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                               std::span<const std::string> ids, std::span<const double> cutoffs);

/// Metric values of one trained spec on one test set.
struct EvaluationRecord {
    int split = 0;
    std::string spec_id;
    Family family = Family::Logistic;
    std::string groups;
    /// Values for kHyperparameterNames; empty when the family does not use the parameter.
    std::vector<std::string> hyperparameters;
    MetricValues metrics;
    /// Semicolon-joined markers such as `single_class_test`.
    std::string flags;

    std::optional<double> metric(std::string_view name) const;
};

/// Hyperparameter values aligned with kHyperparameterNames.
std::vector<std::string> hyperparameter_columns(const ModelSpec& spec);

/// Record table with header `split,spec_id,family,groups,<hyperparameters>,<metrics>,flags`.
std::string records_to_csv(std::span<const EvaluationRecord> records);
std::vector<EvaluationRecord> records_from_csv(std::string_view text);

} // namespace nrp
