#include "tabattn/logistic.hpp"

#include <cmath>
#include <stdexcept>

#include "tabattn/nn.hpp"

namespace tabattn {

double LogisticModel::predict_logit(std::span<const double> x) const {
    double z = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) z += coef[j] * x[j];
    return z;
}

double LogisticModel::predict_proba(std::span<const double> x) const { return nn::sigmoid(predict_logit(x)); }

namespace {

// Largest eigenvalue of [X 1]^T [X 1] / n.
double gram_spectral_radius(const Matrix& x) {
    const std::size_t n = x.rows(), p = x.cols() + 1;
    std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p))), xv(n), next(p);
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = v[p - 1];
            for (std::size_t j = 0; j + 1 < p; ++j) s += x(i, j) * v[j];
            xv[i] = s;
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j + 1 < p; ++j) next[j] += x(i, j) * xv[i];
            next[p - 1] += xv[i];
        }
        double norm = 0.0;
        for (double& e : next) {
            e /= static_cast<double>(n);
            norm += e * e;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        const double prev = lambda;
        lambda = norm;
        for (std::size_t j = 0; j < p; ++j) v[j] = next[j] / norm;
        if (std::abs(lambda - prev) <= 1e-10 * lambda) break;
    }
    return lambda;
}

}  // namespace

LogisticModel fit_logistic(const Dataset& data, const LogisticParams& params) {
    const std::size_t n = data.rows(), p = data.cols();
    if (n == 0) throw std::invalid_argument("fit_logistic: empty dataset");
    if (!(params.C > 0.0)) throw std::invalid_argument("fit_logistic: C must be positive");
    const double dn = static_cast<double>(n);
    const double l2 = 1.0 / (params.C * dn);
    // Power iteration converges from below; pad the estimate.
    const double lipschitz = 0.25 * gram_spectral_radius(data.features) * 1.01 + l2;
    const double step = 1.0 / lipschitz;

    LogisticModel model;
    model.coef.assign(p, 0.0);
    std::vector<double> grad(p);
    for (model.iterations = 0; model.iterations < params.max_iterations; ++model.iterations) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = data.features.row(i);
            const double err = model.predict_proba(x) - static_cast<double>(data.labels[i]);
            for (std::size_t j = 0; j < p; ++j) grad[j] += err * x[j];
            grad_b += err;
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            grad[j] = grad[j] / dn + l2 * model.coef[j];
            norm += grad[j] * grad[j];
        }
        grad_b /= dn;
        norm = std::sqrt(norm + grad_b * grad_b);
        model.gradient_norm = norm;
        if (norm < params.tolerance) break;
        for (std::size_t j = 0; j < p; ++j) model.coef[j] -= step * grad[j];
        model.intercept -= step * grad_b;
    }
    return model;
}

}  // namespace tabattn
