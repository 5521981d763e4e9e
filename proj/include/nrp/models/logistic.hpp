#pragma once

#include "nrp/matrix.hpp"

#include <span>
#include <vector>

namespace nrp::models {

enum class Penalty { L1, L2 };

/// Column-wise centring and scaling to unit standard deviation; constant columns map to 0.
struct Standardizer {
    std::vector<double> mean;
    /// Population standard deviation; 0 marks a constant column.
    std::vector<double> scale;

    static Standardizer fit(const Matrix& X);
    Matrix apply(const Matrix& X) const;
};

struct LogisticSolverOptions {
    double tol = 1e-6;
    int max_epochs = 10000;
    /// Coordinate sweeps per outer step at most.
    int max_inner_epochs = 1000;
};

/// Penalized logistic regression with coefficients on the standardized scale.
struct LogisticModel {
    Standardizer standardizer;
    std::vector<double> weights;
    double intercept = 0.0;
    int epochs = 0;
    bool converged = false;

    std::vector<double> predict(const Matrix& X) const;
};

/// Minimizes penalty(w) + C * sum_i log(1 + exp(-s_i (w'x_i + b))) with s_i = 2y_i - 1,
/// where penalty is ||w||_1 (L1) or 0.5 ||w||_2^2 (L2) and b is unpenalized.
///
/// Proximal Newton with coordinate descent: each outer step fixes the
/// quadratic model of the loss at the current point and solves it by cyclic
/// (soft-thresholded) coordinate updates; the step toward that solution is
/// halved until the objective does not increase. One epoch is one coordinate
/// sweep. Stops once the largest coefficient change of an outer step falls
/// below `tol` or the epoch budget is spent.
LogisticModel fit_logistic(const Matrix& X, std::span<const int> y, Penalty penalty, double C,
                           const LogisticSolverOptions& options = {});

/// Penalized objective on already-standardized inputs.
double logistic_objective(const Matrix& Xs, std::span<const int> y, std::span<const double> w,
                          double b, Penalty penalty, double C);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

/// Unpenalized summed logistic loss and its analytic gradient.
LossGradient logistic_loss_gradient(const Matrix& X, std::span<const int> y,
                                    std::span<const double> w, double b);

double sigmoid(double z) noexcept;
/// log(1 + exp(z)) without overflow.
double log1p_exp(double z) noexcept;

} // namespace nrp::models
