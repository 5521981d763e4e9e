#include "nrp/models/logistic.hpp"

#include "nrp/error.hpp"

#include <algorithm>
#include <cmath>

namespace nrp::models {

double sigmoid(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log1p_exp(double z) noexcept {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

Standardizer Standardizer::fit(const Matrix& X) {
    Standardizer s;
    const auto n = static_cast<double>(X.rows());
    s.mean.resize(X.cols());
    s.scale.resize(X.cols());
    for (std::size_t j = 0; j < X.cols(); ++j) {
        const auto col = X.col(j);
        double sum = 0.0;
        for (double v : col) sum += v;
        const double mean = X.rows() > 0 ? sum / n : 0.0;
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        const double sd = X.rows() > 0 ? std::sqrt(ss / n) : 0.0;
        s.mean[j] = mean;
        s.scale[j] = sd > 1e-12 ? sd : 0.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& X) const {
    if (X.cols() != mean.size()) {
        fail(ErrorCode::SchemaMismatch, "standardizer column count mismatch");
    }
    Matrix out(X.rows(), X.cols());
    for (std::size_t j = 0; j < X.cols(); ++j) {
        if (scale[j] == 0.0) {
            continue;
        }
        const auto src = X.col(j);
        auto dst = out.col(j);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            dst[i] = (src[i] - mean[j]) / scale[j];
        }
    }
    return out;
}

std::vector<double> LogisticModel::predict(const Matrix& X) const {
    std::vector<double> margin(X.rows(), intercept);
    for (std::size_t j = 0; j < X.cols(); ++j) {
        if (weights[j] == 0.0 || standardizer.scale[j] == 0.0) {
            continue;
        }
        const double w = weights[j] / standardizer.scale[j];
        const double m = standardizer.mean[j];
        const auto col = X.col(j);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            margin[i] += w * (col[i] - m);
        }
    }
    for (double& v : margin) {
        v = sigmoid(v);
    }
    return margin;
}

namespace {

double penalty_value(Penalty penalty, double w) {
    return penalty == Penalty::L1 ? std::abs(w) : 0.5 * w * w;
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double signed_label(int y) { return y == 1 ? 1.0 : -1.0; }

} // namespace

double logistic_objective(const Matrix& Xs, std::span<const int> y, std::span<const double> w,
                          double b, Penalty penalty, double C) {
    double pen = 0.0;
    for (double v : w) pen += penalty_value(penalty, v);
    return pen + C * logistic_loss_gradient(Xs, y, w, b).loss;
}

LossGradient logistic_loss_gradient(const Matrix& X, std::span<const int> y,
                                    std::span<const double> w, double b) {
    std::vector<double> margin(X.rows(), b);
    for (std::size_t j = 0; j < X.cols(); ++j) {
        const auto col = X.col(j);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            margin[i] += w[j] * col[i];
        }
    }
    LossGradient out;
    out.grad_w.assign(X.cols(), 0.0);
    std::vector<double> resid(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        out.loss += log1p_exp(-signed_label(y[i]) * margin[i]);
        resid[i] = sigmoid(margin[i]) - y[i];
        out.grad_b += resid[i];
    }
    for (std::size_t j = 0; j < X.cols(); ++j) {
        const auto col = X.col(j);
        double g = 0.0;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            g += resid[i] * col[i];
        }
        out.grad_w[j] = g;
    }
    return out;
}

LogisticModel fit_logistic(const Matrix& X, std::span<const int> y, Penalty penalty, double C,
                           const LogisticSolverOptions& options) {
    if (!(C > 0.0) || !std::isfinite(C)) {
        fail(ErrorCode::InvalidConfig, "logistic regression needs a finite C > 0");
    }
    if (y.size() != X.rows() || X.rows() == 0) {
        fail(ErrorCode::EmptyInput, "logistic regression needs matching non-empty X and y");
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

    LogisticModel model;
    model.standardizer = Standardizer::fit(X);
    const Matrix Xs = model.standardizer.apply(X);
    const std::size_t n = X.rows();

    // Solver coordinates: the intercept first, then every non-constant column.
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < X.cols(); ++j) {
        if (model.standardizer.scale[j] != 0.0) cols.push_back(j);
    }
    const std::size_t m = cols.size() + 1;
    auto column = [&](std::size_t k, std::size_t i) { return k == 0 ? 1.0 : Xs(i, cols[k - 1]); };

    const double base = static_cast<double>(positives) / static_cast<double>(n);
    std::vector<double> beta(m, 0.0);
    beta[0] = std::log(base / (1.0 - base));

    // Row-major copy with a leading column of ones.
    std::vector<double> rows(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < m; ++k) rows[i * m + k] = column(k, i);
    }
    auto objective = [&](std::span<const double> b) {
        double pen = 0.0;
        for (std::size_t k = 1; k < m; ++k) pen += penalty_value(penalty, b[k]);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = &rows[i * m];
            double margin = 0.0;
            for (std::size_t k = 0; k < m; ++k) margin += b[k] * xi[k];
            loss += log1p_exp(-signed_label(y[i]) * margin);
        }
        return pen + C * loss;
    };

    std::vector<double> gram(m * m), q(m), trial(m), candidate(m);
    double current = objective(beta);
    int epochs = 0;
    while (epochs < options.max_epochs) {
        // Quadratic model at beta: gradient q = X'(y - p), curvature X' diag(p(1-p)) X.
        std::fill(gram.begin(), gram.end(), 0.0);
        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = &rows[i * m];
            double mi = 0.0;
            for (std::size_t k = 0; k < m; ++k) mi += beta[k] * xi[k];
            const double pi = sigmoid(mi);
            const double vi = pi * (1.0 - pi);
            const double ri = y[i] - pi;
            for (std::size_t a = 0; a < m; ++a) {
                q[a] += ri * xi[a];
                const double vx = vi * xi[a];
                for (std::size_t b = a; b < m; ++b) gram[a * m + b] += vx * xi[b];
            }
        }
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < a; ++b) gram[a * m + b] = gram[b * m + a];
        }

        trial = beta;
        const int inner_budget = std::min(options.max_inner_epochs, options.max_epochs - epochs);
        for (int sweep = 0; sweep < inner_budget; ++sweep) {
            double max_change = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double h = gram[k * m + k];
                if (!(h > 0.0)) continue;
                const double old = trial[k];
                double next;
                if (k == 0) {
                    next = old + q[k] / h;
                } else if (penalty == Penalty::L2) {
                    next = (C * h * old + C * q[k]) / (C * h + 1.0);
                } else {
                    next = soft_threshold(C * h * old + C * q[k], 1.0) / (C * h);
                }
                const double d = next - old;
                if (d == 0.0) continue;
                trial[k] = next;
                const double* gk = &gram[k * m];
                for (std::size_t a = 0; a < m; ++a) q[a] -= d * gk[a];
                max_change = std::max(max_change, std::abs(d));
            }
            ++epochs;
            if (max_change < options.tol) break;
        }

        double step = 1.0, moved = 0.0;
        for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
            for (std::size_t k = 0; k < m; ++k) candidate[k] = beta[k] + step * (trial[k] - beta[k]);
            const double value = objective(candidate);
            if (value <= current) {
                for (std::size_t k = 0; k < m; ++k) moved = std::max(moved, std::abs(candidate[k] - beta[k]));
                beta = candidate;
                current = value;
                break;
            }
        }
        if (moved < options.tol) {
            model.converged = true;
            break;
        }
    }

    model.epochs = epochs;
    model.intercept = beta[0];
    model.weights.assign(X.cols(), 0.0);
    for (std::size_t k = 1; k < m; ++k) model.weights[cols[k - 1]] = beta[k];
    return model;
}

} // namespace nrp::models
