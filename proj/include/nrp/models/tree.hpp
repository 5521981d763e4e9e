#pragma once

#include "nrp/matrix.hpp"
#include "nrp/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nrp::models {

/// Binary tree node; rows with x[feature] <= threshold go left. Leaves have feature < 0.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int depth = 0;
    /// Training rows reaching the node (bootstrap duplicates counted).
    double weight = 0.0;
    /// Class-1 fraction for classification trees, raw leaf weight for boosting trees.
    double value = 0.0;
    /// Gini impurity for classification trees; unused by boosting trees.
    double impurity = 0.0;
    /// Weighted impurity decrease (classification) or loss reduction (boosting) of the split.
    double gain = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
};

class DecisionTree {
public:
    std::vector<TreeNode> nodes;

    /// Index of the leaf reached by a row.
    std::size_t leaf_of(const Matrix& X, std::size_t row) const;
    double predict(const Matrix& X, std::size_t row) const { return nodes[leaf_of(X, row)].value; }
    int depth() const;
    std::size_t n_leaves() const;
};

/// Per-feature ranks into the sorted distinct values of each column.
///
/// Split scans over the ranks visit exactly the thresholds a sort-based scan
/// would (midpoints between consecutive distinct values present in a node).
struct FeatureBins {
    std::vector<std::vector<double>> values;
    /// Column-major rank of every cell.
    std::vector<std::uint32_t> ranks;
    std::size_t rows = 0;

    static FeatureBins build(const Matrix& X);
    std::uint32_t rank(std::size_t row, std::size_t feature) const { return ranks[feature * rows + row]; }
    std::size_t n_bins(std::size_t feature) const { return values[feature].size(); }
};

enum class MaxFeatures { All, Sqrt, Log2 };

/// Candidate features per node: ceil(sqrt(p)) or ceil(log2(p)), at least 1; All keeps every column.
std::size_t resolve_max_features(MaxFeatures mode, std::size_t n_features);

struct TreeGrowOptions {
    std::optional<int> max_depth;
    std::size_t max_features = 0;
    int min_samples_leaf = 1;
    /// Extra-trees: one uniform random cut point per candidate feature.
    bool random_thresholds = false;
};

/// Grows a Gini CART tree on `sample` (row indices, duplicates allowed).
///
/// Among equally good splits the lowest column index wins, then the lowest threshold.
DecisionTree grow_classification_tree(const Matrix& X, std::span<const int> y,
                                      std::vector<std::uint32_t> sample,
                                      const TreeGrowOptions& options, Rng& rng);
DecisionTree grow_classification_tree(const Matrix& X, const FeatureBins& bins, std::span<const int> y,
                                      std::vector<std::uint32_t> sample,
                                      const TreeGrowOptions& options, Rng& rng);

/// Averaged classification trees: a single CART tree, a random forest, or extra-trees.
struct TreeEnsemble {
    std::vector<DecisionTree> trees;
    /// Impurity decrease per feature, divided by the root weight and averaged over trees.
    std::vector<double> importance;

    std::vector<double> predict(const Matrix& X) const;
};

struct ForestOptions {
    MaxFeatures max_features = MaxFeatures::Sqrt;
    int min_samples_leaf = 1;
    int n_estimators = 100;
    bool bootstrap = true;
    bool random_thresholds = false;
};

TreeEnsemble fit_tree(const Matrix& X, std::span<const int> y, std::optional<int> max_depth,
                      MaxFeatures max_features, std::uint64_t seed);
TreeEnsemble fit_forest(const Matrix& X, std::span<const int> y, const ForestOptions& options,
                        std::uint64_t seed);

/// Per-feature sum of node gains divided by the root weight.
std::vector<double> tree_importance(const DecisionTree& tree, std::size_t n_features);

} // namespace nrp::models
