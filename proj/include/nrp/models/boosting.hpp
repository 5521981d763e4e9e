#pragma once

#include "nrp/matrix.hpp"
#include "nrp/models/tree.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nrp::models {

struct BoostingOptions {
    int max_depth = 3;
    int n_estimators = 100;
    double learning_rate = 0.1;
    /// Per-round Bernoulli row sampling rate; 1 uses every row.
    double subsample = 1.0;
    /// L2 penalty on leaf weights.
    double lambda = 1.0;
};

/// Newton boosting on the logistic loss.
struct BoostedTrees {
    /// Initial margin: logit of the training base rate.
    double base_score = 0.0;
    double learning_rate = 0.1;
    /// Leaf values hold the unscaled Newton weight -G / (H + lambda).
    std::vector<DecisionTree> trees;
    /// Loss reduction per feature summed over all splits.
    std::vector<double> importance;
    /// Mean training log-loss before the first round and after each round.
    std::vector<double> training_loss;

    std::vector<double> predict_margin(const Matrix& X) const;
    std::vector<double> predict(const Matrix& X) const;
};

BoostedTrees fit_boosting(const Matrix& X, std::span<const int> y, const BoostingOptions& options,
                          std::uint64_t seed);

/// Mean logistic loss of probabilities against 0/1 labels.
double mean_log_loss(std::span<const double> margin, std::span<const int> y);

} // namespace nrp::models
