#include "nrp/models/tree.hpp"

#include "nrp/error.hpp"

#include <algorithm>
#include <cmath>

namespace nrp::models {

std::size_t DecisionTree::leaf_of(const Matrix& X, std::size_t row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& node = nodes[i];
        i = static_cast<std::size_t>(X(row, static_cast<std::size_t>(node.feature)) <= node.threshold
                                         ? node.left
                                         : node.right);
    }
    return i;
}

int DecisionTree::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

std::size_t DecisionTree::n_leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t resolve_max_features(MaxFeatures mode, std::size_t n_features) {
    if (n_features == 0) {
        return 0;
    }
    const double p = static_cast<double>(n_features);
    double k = p;
    switch (mode) {
    case MaxFeatures::All: return n_features;
    case MaxFeatures::Sqrt: k = std::ceil(std::sqrt(p)); break;
    case MaxFeatures::Log2: k = std::ceil(std::log2(p)); break;
    }
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, n_features);
}

namespace {

double gini(double positives, double total) {
    if (total <= 0.0) return 0.0;
    const double p = positives / total;
    return 2.0 * p * (1.0 - p);
}

struct BestSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    /// n_left * gini_left + n_right * gini_right; lower is better.
    double child_impurity = 0.0;
};

class ClassificationGrower {
public:
    ClassificationGrower(const Matrix& X, const FeatureBins& bins, std::span<const int> y,
                         const TreeGrowOptions& options, Rng& rng)
        : X_(X), bins_(bins), y_(y), options_(options), rng_(rng) {
        perm_.resize(X.cols());
    }

    DecisionTree grow(std::vector<std::uint32_t> sample) {
        sample_ = std::move(sample);
        DecisionTree tree;
        struct Pending {
            std::size_t node, begin, end;
        };
        std::vector<Pending> stack;
        tree.nodes.push_back(make_node(0, sample_.size(), 0));
        stack.push_back({0, 0, sample_.size()});
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            TreeNode node = tree.nodes[job.node];
            if (!splittable(node)) {
                continue;
            }
            const BestSplit split = find_split(job.begin, job.end, node);
            if (!split.found) {
                continue;
            }
            const double gain = node.weight * node.impurity - split.child_impurity;
            if (!(gain > 1e-12 * node.weight)) {
                continue;
            }
            const auto f = static_cast<std::size_t>(split.feature);
            auto mid_it = std::partition(sample_.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                         sample_.begin() + static_cast<std::ptrdiff_t>(job.end),
                                         [&](std::uint32_t r) { return X_(r, f) <= split.threshold; });
            const auto mid = static_cast<std::size_t>(mid_it - sample_.begin());

            const auto left = tree.nodes.size();
            tree.nodes.push_back(make_node(job.begin, mid, node.depth + 1));
            const auto right = tree.nodes.size();
            tree.nodes.push_back(make_node(mid, job.end, node.depth + 1));

            auto& parent = tree.nodes[job.node];
            parent.feature = split.feature;
            parent.threshold = split.threshold;
            parent.left = static_cast<int>(left);
            parent.right = static_cast<int>(right);
            parent.gain = gain;

            stack.push_back({right, mid, job.end});
            stack.push_back({left, job.begin, mid});
        }
        return tree;
    }

private:
    TreeNode make_node(std::size_t begin, std::size_t end, int depth) const {
        double pos = 0.0;
        for (std::size_t i = begin; i < end; ++i) pos += y_[sample_[i]];
        TreeNode node;
        node.depth = depth;
        node.weight = static_cast<double>(end - begin);
        node.value = node.weight > 0 ? pos / node.weight : 0.0;
        node.impurity = gini(pos, node.weight);
        return node;
    }

    bool splittable(const TreeNode& node) const {
        if (options_.max_depth && node.depth >= *options_.max_depth) return false;
        if (node.weight < 2.0 * std::max(1, options_.min_samples_leaf)) return false;
        return node.impurity > 0.0;
    }

    bool is_constant(std::size_t begin, std::size_t end, std::size_t f, double& lo, double& hi) const {
        lo = hi = X_(sample_[begin], f);
        for (std::size_t i = begin + 1; i < end; ++i) {
            const double v = X_(sample_[i], f);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return lo == hi;
    }

    BestSplit find_split(std::size_t begin, std::size_t end, const TreeNode& node) {
        const std::size_t p = X_.cols();
        const std::size_t mtry = std::min(options_.max_features == 0 ? p : options_.max_features, p);

        // Visit features in random order until mtry non-constant ones are found.
        candidates_.clear();
        for (std::size_t j = 0; j < p; ++j) perm_[j] = j;
        for (std::size_t i = 0; i < p && candidates_.size() < mtry; ++i) {
            if (mtry < p) {
                const std::size_t pick = i + static_cast<std::size_t>(rng_.below(p - i));
                std::swap(perm_[i], perm_[pick]);
            }
            const std::size_t f = perm_[i];
            double lo, hi;
            if (is_constant(begin, end, f, lo, hi)) {
                continue;
            }
            Candidate c{f, 0.0};
            if (options_.random_thresholds) {
                c.threshold = rng_.uniform(lo, hi);
            }
            candidates_.push_back(c);
        }
        std::sort(candidates_.begin(), candidates_.end(),
                  [](const Candidate& a, const Candidate& b) { return a.feature < b.feature; });

        BestSplit best;
        const double total = node.weight;
        const double total_pos = std::round(node.value * node.weight);
        const double msl = std::max(1, options_.min_samples_leaf);
        auto consider = [&](std::size_t f, double threshold, double n_left, double pos_left) {
            const double n_right = total - n_left;
            if (n_left < msl || n_right < msl) return;
            const double pos_right = total_pos - pos_left;
            const double w = n_left * gini(pos_left, n_left) + n_right * gini(pos_right, n_right);
            // Candidates arrive by ascending feature then threshold, so strict improvement
            // keeps the lowest column and threshold among ties.
            if (!best.found || w < best.child_impurity) {
                best = {true, static_cast<int>(f), threshold, w};
            }
        };

        for (const auto& c : candidates_) {
            if (options_.random_thresholds) {
                double n_left = 0.0, pos_left = 0.0;
                for (std::size_t i = begin; i < end; ++i) {
                    const auto r = sample_[i];
                    if (X_(r, c.feature) <= c.threshold) {
                        n_left += 1.0;
                        pos_left += y_[r];
                    }
                }
                consider(c.feature, c.threshold, n_left, pos_left);
                continue;
            }
            const std::size_t n_bins = bins_.n_bins(c.feature);
            if (n_bins <= 4 * (end - begin)) {
                // Rank histogram: thresholds between consecutive non-empty ranks.
                count_.assign(n_bins, 0.0);
                positive_.assign(n_bins, 0.0);
                for (std::size_t i = begin; i < end; ++i) {
                    const auto r = sample_[i];
                    const auto b = bins_.rank(r, c.feature);
                    count_[b] += 1.0;
                    positive_[b] += y_[r];
                }
                const auto& values = bins_.values[c.feature];
                double n_left = 0.0, pos_left = 0.0;
                std::size_t prev = n_bins;
                for (std::size_t b = 0; b < n_bins; ++b) {
                    if (count_[b] == 0.0) continue;
                    if (prev != n_bins) {
                        consider(c.feature, 0.5 * (values[prev] + values[b]), n_left, pos_left);
                    }
                    n_left += count_[b];
                    pos_left += positive_[b];
                    prev = b;
                }
                continue;
            }
            buffer_.clear();
            for (std::size_t i = begin; i < end; ++i) {
                const auto r = sample_[i];
                buffer_.emplace_back(X_(r, c.feature), y_[r]);
            }
            std::sort(buffer_.begin(), buffer_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double n_left = 0.0, pos_left = 0.0;
            for (std::size_t i = 0; i + 1 < buffer_.size(); ++i) {
                n_left += 1.0;
                pos_left += buffer_[i].second;
                if (buffer_[i].first < buffer_[i + 1].first) {
                    consider(c.feature, 0.5 * (buffer_[i].first + buffer_[i + 1].first), n_left, pos_left);
                }
            }
        }
        return best;
    }

    struct Candidate {
        std::size_t feature;
        double threshold;
    };

    const Matrix& X_;
    const FeatureBins& bins_;
    std::span<const int> y_;
    const TreeGrowOptions& options_;
    Rng& rng_;
    std::vector<std::uint32_t> sample_;
    std::vector<std::size_t> perm_;
    std::vector<Candidate> candidates_;
    std::vector<std::pair<double, int>> buffer_;
    std::vector<double> count_;
    std::vector<double> positive_;
};

void check_inputs(const Matrix& X, std::span<const int> y) {
    if (X.rows() != y.size()) {
        fail(ErrorCode::SchemaMismatch, "row count of X and y differ");
    }
    if (X.rows() < 2) {
        fail(ErrorCode::EmptyInput, "tree training needs at least 2 rows");
    }
    for (double v : X.data()) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::NonFiniteInput, "non-finite feature value");
        }
    }
    for (int v : y) {
        if (v != 0 && v != 1) {
            fail(ErrorCode::InvalidConfig, "labels must be 0 or 1");
        }
    }
}

std::vector<std::uint32_t> all_rows(std::size_t n) {
    std::vector<std::uint32_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
    return rows;
}

} // namespace

DecisionTree grow_classification_tree(const Matrix& X, const FeatureBins& bins, std::span<const int> y,
                                      std::vector<std::uint32_t> sample,
                                      const TreeGrowOptions& options, Rng& rng) {
    if (sample.empty()) {
        fail(ErrorCode::EmptyInput, "empty training sample");
    }
    ClassificationGrower grower(X, bins, y, options, rng);
    return grower.grow(std::move(sample));
}

DecisionTree grow_classification_tree(const Matrix& X, std::span<const int> y,
                                      std::vector<std::uint32_t> sample,
                                      const TreeGrowOptions& options, Rng& rng) {
    return grow_classification_tree(X, FeatureBins::build(X), y, std::move(sample), options, rng);
}

FeatureBins FeatureBins::build(const Matrix& X) {
    FeatureBins bins;
    bins.rows = X.rows();
    bins.values.resize(X.cols());
    bins.ranks.resize(X.rows() * X.cols());
    for (std::size_t f = 0; f < X.cols(); ++f) {
        const auto col = X.col(f);
        auto& values = bins.values[f];
        values.assign(col.begin(), col.end());
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t r = 0; r < X.rows(); ++r) {
            const auto it = std::lower_bound(values.begin(), values.end(), col[r]);
            bins.ranks[f * X.rows() + r] = static_cast<std::uint32_t>(it - values.begin());
        }
    }
    return bins;
}

std::vector<double> tree_importance(const DecisionTree& tree, std::size_t n_features) {
    std::vector<double> imp(n_features, 0.0);
    if (tree.nodes.empty() || tree.nodes.front().weight <= 0.0) {
        return imp;
    }
    const double root = tree.nodes.front().weight;
    for (const auto& node : tree.nodes) {
        if (!node.is_leaf()) {
            imp[static_cast<std::size_t>(node.feature)] += node.gain / root;
        }
    }
    return imp;
}

std::vector<double> TreeEnsemble::predict(const Matrix& X) const {
    std::vector<double> out(X.rows(), 0.0);
    for (const auto& tree : trees) {
        for (std::size_t i = 0; i < X.rows(); ++i) {
            out[i] += tree.predict(X, i);
        }
    }
    const double n = static_cast<double>(trees.size());
    for (double& v : out) v /= n;
    return out;
}

TreeEnsemble fit_tree(const Matrix& X, std::span<const int> y, std::optional<int> max_depth,
                      MaxFeatures max_features, std::uint64_t seed) {
    check_inputs(X, y);
    TreeGrowOptions opts;
    opts.max_depth = max_depth;
    opts.max_features = resolve_max_features(max_features, X.cols());
    Rng rng(mix_seed(seed, 0));
    TreeEnsemble out;
    out.trees.push_back(grow_classification_tree(X, FeatureBins::build(X), y, all_rows(X.rows()), opts, rng));
    out.importance = tree_importance(out.trees.front(), X.cols());
    return out;
}

TreeEnsemble fit_forest(const Matrix& X, std::span<const int> y, const ForestOptions& options,
                        std::uint64_t seed) {
    check_inputs(X, y);
    if (options.n_estimators < 1 || options.min_samples_leaf < 1) {
        fail(ErrorCode::InvalidConfig, "forest needs n_estimators >= 1 and min_samples_leaf >= 1");
    }
    TreeGrowOptions opts;
    opts.max_features = resolve_max_features(options.max_features, X.cols());
    opts.min_samples_leaf = options.min_samples_leaf;
    opts.random_thresholds = options.random_thresholds;

    TreeEnsemble out;
    out.importance.assign(X.cols(), 0.0);
    const std::size_t n = X.rows();
    const FeatureBins bins = FeatureBins::build(X);
    for (int t = 0; t < options.n_estimators; ++t) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<std::uint32_t> sample;
        if (options.bootstrap) {
            sample.resize(n);
            for (auto& r : sample) r = static_cast<std::uint32_t>(rng.below(n));
        } else {
            sample = all_rows(n);
        }
        out.trees.push_back(grow_classification_tree(X, bins, y, std::move(sample), opts, rng));
        const auto imp = tree_importance(out.trees.back(), X.cols());
        for (std::size_t j = 0; j < imp.size(); ++j) out.importance[j] += imp[j];
    }
    for (double& v : out.importance) v /= static_cast<double>(options.n_estimators);
    return out;
}

} // namespace nrp::models
