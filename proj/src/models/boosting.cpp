#include "nrp/models/boosting.hpp"

#include "nrp/error.hpp"
#include "nrp/models/logistic.hpp"
#include "nrp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace nrp::models {

namespace {

struct GradientPair {
    double g = 0.0;
    double h = 0.0;
};

/// Depth-limited regression tree on gradient statistics (exact greedy split search).
class NewtonTreeGrower {
public:
    NewtonTreeGrower(const Matrix& X, const FeatureBins& bins, std::span<const GradientPair> stats,
                     int max_depth, double lambda)
        : X_(X), bins_(bins), stats_(stats), max_depth_(max_depth), lambda_(lambda) {}

    DecisionTree grow(std::vector<std::uint32_t> sample) {
        sample_ = std::move(sample);
        DecisionTree tree;
        tree.nodes.push_back(make_node(0, sample_.size(), 0));
        std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> stack{{0, 0, sample_.size()}};
        while (!stack.empty()) {
            const auto [index, begin, end] = stack.back();
            stack.pop_back();
            const TreeNode node = tree.nodes[index];
            if (node.depth >= max_depth_ || end - begin < 2) {
                continue;
            }
            const Split split = find_split(begin, end);
            if (!split.found || !(split.gain > 1e-12)) {
                continue;
            }
            const auto f = static_cast<std::size_t>(split.feature);
            auto mid_it = std::partition(sample_.begin() + static_cast<std::ptrdiff_t>(begin),
                                         sample_.begin() + static_cast<std::ptrdiff_t>(end),
                                         [&](std::uint32_t r) { return X_(r, f) <= split.threshold; });
            const auto mid = static_cast<std::size_t>(mid_it - sample_.begin());
            const auto left = tree.nodes.size();
            tree.nodes.push_back(make_node(begin, mid, node.depth + 1));
            const auto right = tree.nodes.size();
            tree.nodes.push_back(make_node(mid, end, node.depth + 1));

            auto& parent = tree.nodes[index];
            parent.feature = split.feature;
            parent.threshold = split.threshold;
            parent.left = static_cast<int>(left);
            parent.right = static_cast<int>(right);
            parent.gain = split.gain;
            stack.emplace_back(right, mid, end);
            stack.emplace_back(left, begin, mid);
        }
        return tree;
    }

private:
    struct Split {
        bool found = false;
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    double score(double g, double h) const { return g * g / (h + lambda_); }

    TreeNode make_node(std::size_t begin, std::size_t end, int depth) const {
        double g = 0.0, h = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            g += stats_[sample_[i]].g;
            h += stats_[sample_[i]].h;
        }
        TreeNode node;
        node.depth = depth;
        node.weight = static_cast<double>(end - begin);
        node.value = -g / (h + lambda_);
        return node;
    }

    Split find_split(std::size_t begin, std::size_t end) {
        double g_total = 0.0, h_total = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            g_total += stats_[sample_[i]].g;
            h_total += stats_[sample_[i]].h;
        }
        const double parent = score(g_total, h_total);
        Split best;
        auto consider = [&](std::size_t f, double threshold, double g_left, double h_left) {
            const double gain =
                0.5 * (score(g_left, h_left) + score(g_total - g_left, h_total - h_left) - parent);
            // Ascending feature and threshold order: strict improvement keeps the first tie.
            if (!best.found || gain > best.gain) {
                best = {true, static_cast<int>(f), threshold, gain};
            }
        };
        for (std::size_t f = 0; f < X_.cols(); ++f) {
            const std::size_t n_bins = bins_.n_bins(f);
            if (n_bins < 2) {
                continue;
            }
            if (n_bins <= 4 * (end - begin)) {
                grad_.assign(n_bins, 0.0);
                hess_.assign(n_bins, 0.0);
                seen_.assign(n_bins, 0);
                for (std::size_t i = begin; i < end; ++i) {
                    const auto r = sample_[i];
                    const auto b = bins_.rank(r, f);
                    grad_[b] += stats_[r].g;
                    hess_[b] += stats_[r].h;
                    seen_[b] = 1;
                }
                const auto& values = bins_.values[f];
                double g_left = 0.0, h_left = 0.0;
                std::size_t prev = n_bins;
                for (std::size_t b = 0; b < n_bins; ++b) {
                    if (!seen_[b]) continue;
                    if (prev != n_bins) {
                        consider(f, 0.5 * (values[prev] + values[b]), g_left, h_left);
                    }
                    g_left += grad_[b];
                    h_left += hess_[b];
                    prev = b;
                }
                continue;
            }
            buffer_.clear();
            for (std::size_t i = begin; i < end; ++i) {
                buffer_.emplace_back(X_(sample_[i], f), sample_[i]);
            }
            std::sort(buffer_.begin(), buffer_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double g_left = 0.0, h_left = 0.0;
            for (std::size_t i = 0; i + 1 < buffer_.size(); ++i) {
                g_left += stats_[buffer_[i].second].g;
                h_left += stats_[buffer_[i].second].h;
                if (buffer_[i].first < buffer_[i + 1].first) {
                    consider(f, 0.5 * (buffer_[i].first + buffer_[i + 1].first), g_left, h_left);
                }
            }
        }
        return best;
    }

    const Matrix& X_;
    const FeatureBins& bins_;
    std::span<const GradientPair> stats_;
    int max_depth_;
    double lambda_;
    std::vector<std::uint32_t> sample_;
    std::vector<std::pair<double, std::uint32_t>> buffer_;
    std::vector<double> grad_;
    std::vector<double> hess_;
    std::vector<char> seen_;
};

} // namespace

double mean_log_loss(std::span<const double> margin, std::span<const int> y) {
    double total = 0.0;
    for (std::size_t i = 0; i < margin.size(); ++i) {
        total += log1p_exp(y[i] == 1 ? -margin[i] : margin[i]);
    }
    return margin.empty() ? 0.0 : total / static_cast<double>(margin.size());
}

std::vector<double> BoostedTrees::predict_margin(const Matrix& X) const {
    std::vector<double> margin(X.rows(), base_score);
    for (const auto& tree : trees) {
        for (std::size_t i = 0; i < X.rows(); ++i) {
            margin[i] += learning_rate * tree.predict(X, i);
        }
    }
    return margin;
}

std::vector<double> BoostedTrees::predict(const Matrix& X) const {
    auto margin = predict_margin(X);
    for (double& v : margin) v = sigmoid(v);
    return margin;
}

BoostedTrees fit_boosting(const Matrix& X, std::span<const int> y, const BoostingOptions& options,
                          std::uint64_t seed) {
    if (X.rows() != y.size() || X.rows() == 0) {
        fail(ErrorCode::EmptyInput, "boosting needs matching non-empty X and y");
    }
    if (options.n_estimators < 0 || options.max_depth < 0 || !(options.learning_rate > 0.0) ||
        !(options.subsample > 0.0 && options.subsample <= 1.0) || !(options.lambda >= 0.0)) {
        fail(ErrorCode::InvalidConfig, "invalid boosting hyperparameters");
    }
    for (double v : X.data()) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::NonFiniteInput, "non-finite feature value");
        }
    }
    std::size_t positives = 0;
    for (int v : y) {
        if (v != 0 && v != 1) {
            fail(ErrorCode::InvalidConfig, "labels must be 0 or 1");
        }
        positives += static_cast<std::size_t>(v);
    }
    if (positives == 0 || positives == y.size()) {
        fail(ErrorCode::NoVariation, "training labels contain a single class");
    }

    const std::size_t n = X.rows();
    BoostedTrees model;
    const double base = static_cast<double>(positives) / static_cast<double>(n);
    model.base_score = std::log(base / (1.0 - base));
    model.learning_rate = options.learning_rate;
    model.importance.assign(X.cols(), 0.0);

    std::vector<double> margin(n, model.base_score);
    std::vector<GradientPair> stats(n);
    model.training_loss.push_back(mean_log_loss(margin, y));

    Rng rng(seed);
    const FeatureBins bins = FeatureBins::build(X);
    NewtonTreeGrower grower(X, bins, stats, options.max_depth, options.lambda);
    for (int round = 0; round < options.n_estimators; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            stats[i] = {p - y[i], p * (1.0 - p)};
        }
        std::vector<std::uint32_t> sample;
        sample.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (options.subsample >= 1.0 || rng.bernoulli(options.subsample)) {
                sample.push_back(static_cast<std::uint32_t>(i));
            }
        }
        DecisionTree tree;
        if (sample.empty()) {
            tree.nodes.push_back(TreeNode{});
        } else {
            tree = grower.grow(std::move(sample));
        }
        for (const auto& node : tree.nodes) {
            if (!node.is_leaf()) {
                model.importance[static_cast<std::size_t>(node.feature)] += node.gain;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            margin[i] += options.learning_rate * tree.predict(X, i);
        }
        model.trees.push_back(std::move(tree));
        model.training_loss.push_back(mean_log_loss(margin, y));
    }
    return model;
}

} // namespace nrp::models
