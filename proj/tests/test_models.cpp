#include "support.hpp"

#include "nrp/models/boosting.hpp"
#include "nrp/models/logistic.hpp"
#include "nrp/models/tree.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

using namespace nrp;
using namespace nrp::models;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t p, bool integer = false) {
    Matrix X(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            X(i, j) = integer ? static_cast<double>(rng.below(6)) : rng.normal();
        }
    }
    return X;
}

/// Labels from a noisy linear rule on the first columns; both classes guaranteed.
std::vector<int> random_labels(Rng& rng, const Matrix& X) {
    std::vector<int> y(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        double m = rng.normal();
        for (std::size_t j = 0; j < std::min<std::size_t>(3, X.cols()); ++j) m += X(i, j);
        y[i] = m > 0.0 ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    return y;
}

double gini_oracle(double pos, double n) {
    if (n == 0.0) return 0.0;
    const double p = pos / n;
    return 2.0 * p * (1.0 - p);
}

/// Independent root-to-leaf walk.
double walk(const DecisionTree& tree, const Matrix& X, std::size_t row) {
    int k = 0;
    while (tree.nodes[static_cast<std::size_t>(k)].feature >= 0) {
        const auto& node = tree.nodes[static_cast<std::size_t>(k)];
        k = X(row, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
    }
    return tree.nodes[static_cast<std::size_t>(k)].value;
}

std::size_t count_zeros(const std::vector<double>& w) {
    return static_cast<std::size_t>(std::count(w.begin(), w.end(), 0.0));
}

} // namespace

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

TEST_CASE("logistic loss gradient matches central finite differences") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto X = random_matrix(rng, 20, 10);
        const auto y = random_labels(rng, X);
        std::vector<double> w(10);
        for (double& v : w) v = rng.normal() * 0.5;
        const double b = rng.normal() * 0.5;
        const auto lg = logistic_loss_gradient(X, y, w, b);
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t j = 0; j <= w.size(); ++j) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (j < w.size()) {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double fd =
                (logistic_loss_gradient(X, y, wp, bp).loss - logistic_loss_gradient(X, y, wm, bm).loss) / (2 * h);
            const double analytic = j < w.size() ? lg.grad_w[j] : lg.grad_b;
            worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("fitted logistic objective is below the zero-weight objective") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const auto X = random_matrix(rng, 60, 6);
        const auto y = random_labels(rng, X);
        for (Penalty pen : {Penalty::L1, Penalty::L2}) {
            for (double C : {0.05, 1.0, 1000.0}) {
                const auto m = fit_logistic(X, y, pen, C);
                const auto Xs = m.standardizer.apply(X);
                const std::vector<double> zero(6, 0.0);
                const double fitted = logistic_objective(Xs, y, m.weights, m.intercept, pen, C);
                CHECK(fitted <= logistic_objective(Xs, y, zero, 0.0, pen, C) + 1e-12);
                CHECK(fitted <= logistic_objective(Xs, y, zero, m.intercept, pen, C) + 1e-12);
            }
        }
    }
}

TEST_CASE("logistic solution satisfies the optimality conditions") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto X = random_matrix(rng, 80, 5);
        const auto y = random_labels(rng, X);
        for (double C : {0.1, 1.0}) {
            const auto l2 = fit_logistic(X, y, Penalty::L2, C);
            CHECK(l2.converged);
            const auto g2 = logistic_loss_gradient(l2.standardizer.apply(X), y, l2.weights, l2.intercept);
            CHECK(std::abs(g2.grad_b) < 1e-4);
            for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(l2.weights[j] + C * g2.grad_w[j]) < 1e-4);

            const auto l1 = fit_logistic(X, y, Penalty::L1, C);
            CHECK(l1.converged);
            const auto g1 = logistic_loss_gradient(l1.standardizer.apply(X), y, l1.weights, l1.intercept);
            CHECK(std::abs(g1.grad_b) < 1e-4);
            for (std::size_t j = 0; j < 5; ++j) {
                const double cg = C * g1.grad_w[j];
                if (l1.weights[j] == 0.0) {
                    CHECK(std::abs(cg) <= 1.0 + 1e-4);
                } else {
                    CHECK(std::abs(cg + (l1.weights[j] > 0 ? 1.0 : -1.0)) < 1e-4);
                }
            }
        }
    }
}

TEST_CASE("l1 sparsity grows as C shrinks") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto X = random_matrix(rng, 50, 12);
        const auto y = random_labels(rng, X);
        const auto strong = fit_logistic(X, y, Penalty::L1, 0.05);
        const auto weak = fit_logistic(X, y, Penalty::L1, 1000.0);
        CHECK(count_zeros(strong.weights) >= count_zeros(weak.weights));
    }
}

TEST_CASE("separable two-point set is fitted exactly") {
    Matrix X(2, 1);
    X(0, 0) = 0.0;
    X(1, 0) = 1.0;
    const std::vector<int> y{0, 1};
    const auto m = fit_logistic(X, y, Penalty::L2, 1000.0);
    const auto p = m.predict(X);
    CHECK(p[0] < 0.5);
    CHECK(p[1] > 0.5);
}

TEST_CASE("vanishing C drives weights to zero and scores to the base rate") {
    Rng rng(5);
    const auto X = random_matrix(rng, 40, 4);
    const auto y = random_labels(rng, X);
    const double base = std::accumulate(y.begin(), y.end(), 0.0) / 40.0;
    for (Penalty pen : {Penalty::L1, Penalty::L2}) {
        const auto m = fit_logistic(X, y, pen, 1e-9);
        for (double w : m.weights) CHECK(std::abs(w) < 1e-6);
        for (double p : m.predict(X)) CHECK(p == doctest::Approx(base).epsilon(1e-6));
    }
}

TEST_CASE("zero weights give sigmoid of the intercept everywhere") {
    LogisticModel m;
    m.standardizer.mean = {0.0, 0.0};
    m.standardizer.scale = {1.0, 1.0};
    m.weights = {0.0, 0.0};
    m.intercept = -0.7;
    Rng rng(6);
    for (double p : m.predict(random_matrix(rng, 10, 2))) CHECK(p == sigmoid(-0.7));
}

TEST_CASE("logistic input errors") {
    Matrix X(3, 1);
    X(0, 0) = 1.0;
    const std::vector<int> same{1, 1, 1};
    CHECK_NRP_ERROR(fit_logistic(X, same, Penalty::L2, 1.0), ErrorCode::NoVariation);
    Matrix bad(2, 1);
    bad(0, 0) = std::nan("");
    const std::vector<int> y{0, 1};
    CHECK_NRP_ERROR(fit_logistic(bad, y, Penalty::L2, 1.0), ErrorCode::NonFiniteInput);
    CHECK_NRP_ERROR(fit_logistic(X, std::vector<int>{0, 1, 0}, Penalty::L2, 0.0), ErrorCode::InvalidConfig);
}

TEST_CASE("standardizer centres, scales and zeroes constant columns") {
    Matrix X(4, 2, 3.0);
    for (std::size_t i = 0; i < 4; ++i) X(i, 0) = static_cast<double>(i);
    const auto s = Standardizer::fit(X);
    CHECK(s.mean[0] == 1.5);
    CHECK(s.scale[0] == doctest::Approx(std::sqrt(1.25)));
    CHECK(s.scale[1] == 0.0);
    const auto Xs = s.apply(X);
    for (std::size_t i = 0; i < 4; ++i) CHECK(Xs(i, 1) == 0.0);
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

TEST_CASE("constant labels give a single leaf predicting that label") {
    Rng rng(7);
    const auto X = random_matrix(rng, 10, 3);
    for (int label : {0, 1}) {
        const std::vector<int> y(10, label);
        const auto t = fit_tree(X, y, std::nullopt, MaxFeatures::All, 1);
        CHECK(t.trees[0].nodes.size() == 1);
        for (double p : t.predict(X)) CHECK(p == static_cast<double>(label));
        CHECK(std::all_of(t.importance.begin(), t.importance.end(), [](double v) { return v == 0.0; }));
    }
}

TEST_CASE("one-feature threshold data is split once and fitted exactly") {
    Matrix X(6, 1);
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    for (std::size_t i = 0; i < 6; ++i) X(i, 0) = static_cast<double>(i);
    const auto t = fit_tree(X, y, std::nullopt, MaxFeatures::All, 1);
    CHECK(t.trees[0].depth() == 1);
    CHECK(t.trees[0].nodes[0].threshold == 2.5);
    const auto p = t.predict(X);
    for (std::size_t i = 0; i < 6; ++i) CHECK(p[i] == static_cast<double>(y[i]));
    CHECK(t.importance[0] == doctest::Approx(0.5));
}

TEST_CASE("root split equals an exhaustive split scan") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto X = random_matrix(rng, 50, 5, trial % 2 == 0);
        const auto y = random_labels(rng, X);
        const double n = 50.0;
        const double pos = std::accumulate(y.begin(), y.end(), 0.0);

        double best = std::numeric_limits<double>::infinity();
        std::vector<std::tuple<double, std::size_t, double>> all;
        for (std::size_t f = 0; f < 5; ++f) {
            std::vector<double> vals(X.col(f).begin(), X.col(f).end());
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                const double thr = 0.5 * (vals[k] + vals[k + 1]);
                double nl = 0, pl = 0;
                for (std::size_t i = 0; i < 50; ++i) {
                    if (X(i, f) <= thr) {
                        nl += 1;
                        pl += y[i];
                    }
                }
                const double w = nl * gini_oracle(pl, nl) + (n - nl) * gini_oracle(pos - pl, n - nl);
                all.emplace_back(w, f, thr);
                best = std::min(best, w);
            }
        }
        // Among near-equal optima the lowest column, then threshold, wins.
        std::size_t want_f = 99;
        double want_t = 0;
        for (const auto& [w, f, thr] : all) {
            if (w <= best + 1e-9 && (f < want_f || (f == want_f && thr < want_t))) {
                want_f = f;
                want_t = thr;
            }
        }
        const auto t = fit_tree(X, y, 1, MaxFeatures::All, 3);
        const auto& root = t.trees[0].nodes[0];
        REQUIRE_FALSE(root.is_leaf());
        const auto& l = t.trees[0].nodes[static_cast<std::size_t>(root.left)];
        const auto& r = t.trees[0].nodes[static_cast<std::size_t>(root.right)];
        CHECK(l.weight * l.impurity + r.weight * r.impurity == doctest::Approx(best).epsilon(1e-12));
        CHECK(root.feature == static_cast<int>(want_f));
        CHECK(root.threshold == want_t);
    }
}

TEST_CASE("depth bound and leaf size bound hold") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const auto X = random_matrix(rng, 120, 6);
        const auto y = random_labels(rng, X);
        for (int d : {1, 3, 5}) {
            const auto t = fit_tree(X, y, d, MaxFeatures::Sqrt, static_cast<std::uint64_t>(trial));
            CHECK(t.trees[0].depth() <= d);
        }
        ForestOptions fo;
        fo.min_samples_leaf = 10;
        fo.n_estimators = 5;
        for (bool extra : {false, true}) {
            fo.random_thresholds = extra;
            fo.bootstrap = !extra;
            const auto f = fit_forest(X, y, fo, 11);
            for (const auto& tree : f.trees) {
                for (const auto& node : tree.nodes) {
                    if (node.is_leaf()) CHECK(node.weight >= 10.0);
                }
            }
        }
    }
}

TEST_CASE("single full-sample forest tree with every feature equals the plain tree") {
    Rng rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        const auto X = random_matrix(rng, 80, 5);
        const auto y = random_labels(rng, X);
        ForestOptions fo;
        fo.max_features = MaxFeatures::All;
        fo.n_estimators = 1;
        fo.bootstrap = false;
        const auto forest = fit_forest(X, y, fo, 42);
        const auto tree = fit_tree(X, y, std::nullopt, MaxFeatures::All, 42);
        CHECK(forest.predict(X) == tree.predict(X));
        CHECK(forest.importance == tree.importance);
    }
}

TEST_CASE("forest and extra-trees are bounded, seeded and average their trees") {
    Rng rng(11);
    const auto X = random_matrix(rng, 100, 8);
    const auto y = random_labels(rng, X);
    const auto Xtest = random_matrix(rng, 30, 8);
    for (bool extra : {false, true}) {
        ForestOptions fo;
        fo.n_estimators = 25;
        fo.bootstrap = !extra;
        fo.random_thresholds = extra;
        fo.max_features = MaxFeatures::Log2;
        const auto a = fit_forest(X, y, fo, 5);
        const auto b = fit_forest(X, y, fo, 5);
        const auto c = fit_forest(X, y, fo, 6);
        const auto pa = a.predict(Xtest);
        CHECK(pa == b.predict(Xtest));
        CHECK(pa != c.predict(Xtest));
        for (std::size_t i = 0; i < Xtest.rows(); ++i) {
            CHECK(pa[i] >= 0.0);
            CHECK(pa[i] <= 1.0);
            double mean = 0.0;
            for (const auto& t : a.trees) mean += walk(t, Xtest, i);
            CHECK(pa[i] == doctest::Approx(mean / 25.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("tree importance equals an impurity-decrease walk over the nodes") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto X = random_matrix(rng, 90, 6, true);
        const auto y = random_labels(rng, X);
        const auto t = fit_tree(X, y, 4, MaxFeatures::Sqrt, static_cast<std::uint64_t>(trial));
        const auto& nodes = t.trees[0].nodes;
        std::vector<double> oracle(6, 0.0);
        for (const auto& node : nodes) {
            if (node.is_leaf()) continue;
            const auto& l = nodes[static_cast<std::size_t>(node.left)];
            const auto& r = nodes[static_cast<std::size_t>(node.right)];
            oracle[static_cast<std::size_t>(node.feature)] +=
                (node.weight * node.impurity - l.weight * l.impurity - r.weight * r.impurity) / nodes[0].weight;
        }
        for (std::size_t j = 0; j < 6; ++j) CHECK(t.importance[j] == doctest::Approx(oracle[j]).epsilon(1e-12));
        // Total decrease telescopes to root impurity minus weighted leaf impurity.
        double leaves = 0.0;
        for (const auto& node : nodes) {
            if (node.is_leaf()) leaves += node.weight * node.impurity;
        }
        const double total = std::accumulate(t.importance.begin(), t.importance.end(), 0.0);
        CHECK(total == doctest::Approx((nodes[0].weight * nodes[0].impurity - leaves) / nodes[0].weight));
    }
}

TEST_CASE("max_features resolves to rounded-up roots and logs") {
    CHECK(resolve_max_features(MaxFeatures::All, 10) == 10);
    CHECK(resolve_max_features(MaxFeatures::Sqrt, 10) == 4);
    CHECK(resolve_max_features(MaxFeatures::Log2, 10) == 4);
    CHECK(resolve_max_features(MaxFeatures::Sqrt, 1) == 1);
    CHECK(resolve_max_features(MaxFeatures::Log2, 1) == 1);
    CHECK(resolve_max_features(MaxFeatures::Sqrt, 16) == 4);
}

TEST_CASE("tree input errors") {
    Matrix X(1, 2);
    CHECK_NRP_ERROR(fit_tree(X, std::vector<int>{1}, std::nullopt, MaxFeatures::All, 1), ErrorCode::EmptyInput);
    Matrix Y(3, 1);
    CHECK_NRP_ERROR(fit_tree(Y, std::vector<int>{1, 0}, std::nullopt, MaxFeatures::All, 1),
                    ErrorCode::SchemaMismatch);
    ForestOptions fo;
    fo.n_estimators = 0;
    CHECK_NRP_ERROR(fit_forest(Y, std::vector<int>{1, 0, 1}, fo, 1), ErrorCode::InvalidConfig);
}

// ---------------------------------------------------------------------------
// Boosting
// ---------------------------------------------------------------------------

TEST_CASE("boosting training loss never increases without subsampling") {
    Rng rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        const auto X = random_matrix(rng, 150, 6);
        const auto y = random_labels(rng, X);
        BoostingOptions o;
        o.n_estimators = 100;
        o.max_depth = 3;
        const auto m = fit_boosting(X, y, o, 1);
        REQUIRE(m.training_loss.size() == 101);
        for (std::size_t r = 1; r < m.training_loss.size(); ++r) {
            CHECK(m.training_loss[r] <= m.training_loss[r - 1] + 1e-12);
        }
        CHECK(m.training_loss.back() == doctest::Approx(mean_log_loss(m.predict_margin(X), y)));
    }
}

TEST_CASE("zero boosting rounds predict the base rate") {
    Rng rng(14);
    const auto X = random_matrix(rng, 40, 3);
    const auto y = random_labels(rng, X);
    BoostingOptions o;
    o.n_estimators = 0;
    const auto m = fit_boosting(X, y, o, 1);
    const double base = std::accumulate(y.begin(), y.end(), 0.0) / 40.0;
    for (double p : m.predict(X)) CHECK(p == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("one boosting stump on four points matches the hand-computed Newton step") {
    // Base rate 1/4: p = 1/4, g = p - y = (1/4, 1/4, 1/4, -3/4), h = 3/16 each.
    // Best cut 2.5: left G = 3/4, H = 9/16; right G = -3/4, H = 3/16.
    Matrix X(4, 1);
    for (std::size_t i = 0; i < 4; ++i) X(i, 0) = static_cast<double>(i);
    const std::vector<int> y{0, 0, 0, 1};
    BoostingOptions o;
    o.n_estimators = 1;
    o.max_depth = 1;
    o.learning_rate = 0.5;
    const auto m = fit_boosting(X, y, o, 1);
    CHECK(m.base_score == doctest::Approx(std::log(1.0 / 3.0)));
    const auto& nodes = m.trees[0].nodes;
    REQUIRE(nodes.size() == 3);
    CHECK(nodes[0].threshold == 2.5);
    CHECK(nodes[1].value == doctest::Approx(-0.75 / (0.5625 + 1.0)).epsilon(1e-12));
    CHECK(nodes[2].value == doctest::Approx(0.75 / (0.1875 + 1.0)).epsilon(1e-12));
    const double gain = 0.5 * (0.5625 / 1.5625 + 0.5625 / 1.1875);
    CHECK(m.importance[0] == doctest::Approx(gain).epsilon(1e-12));
    const auto margin = m.predict_margin(X);
    CHECK(margin[3] == doctest::Approx(std::log(1.0 / 3.0) + 0.5 * 0.75 / 1.1875));
}

TEST_CASE("boosting is deterministic under a seed and subsampling changes with it") {
    Rng rng(15);
    const auto X = random_matrix(rng, 120, 5);
    const auto y = random_labels(rng, X);
    BoostingOptions o;
    o.n_estimators = 20;
    o.subsample = 0.8;
    const auto a = fit_boosting(X, y, o, 3).predict(X);
    CHECK(a == fit_boosting(X, y, o, 3).predict(X));
    CHECK(a != fit_boosting(X, y, o, 4).predict(X));
    for (double p : a) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("boosting input errors") {
    Matrix X(3, 1);
    CHECK_NRP_ERROR(fit_boosting(X, std::vector<int>{0, 0, 0}, {}, 1), ErrorCode::NoVariation);
    BoostingOptions o;
    o.subsample = 0.0;
    CHECK_NRP_ERROR(fit_boosting(X, std::vector<int>{0, 1, 0}, o, 1), ErrorCode::InvalidConfig);
}
