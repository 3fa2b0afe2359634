#pragma once

#include <span>
#include <vector>

#include "tabattn/data.hpp"

namespace tabattn {

struct LogisticParams {
    // Inverse L2 strength, as in liblinear/scikit-learn: the objective is
    // 0.5*|w|^2 + C * sum(logloss). The intercept is not penalized.
    double C = 0.1;
    double tolerance = 1e-6;
    std::size_t max_iterations = 10000;
};

struct LogisticModel {
    std::vector<double> coef;
    double intercept = 0.0;
    std::size_t iterations = 0;
    // Gradient norm of the per-sample-scaled objective at exit.
    double gradient_norm = 0.0;

    double predict_logit(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const;
};

// Full-batch gradient descent with step 1/L, L bounded by a power-iteration
// estimate of the largest Hessian eigenvalue.
LogisticModel fit_logistic(const Dataset& data, const LogisticParams& params = {});

}  // namespace tabattn
