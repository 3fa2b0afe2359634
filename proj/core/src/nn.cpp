#include "tabattn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tabattn::nn {

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : weight(out, in), bias(out, 0.0), grad_weight(out, in), grad_bias(out, 0.0) {
    if (in == 0 || out == 0) throw std::invalid_argument("DenseLayer: widths must be positive");
}

void DenseLayer::init_glorot(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_width() + out_width()));
    for (double& w : weight.values()) w = rng.uniform(-limit, limit);
    std::fill(bias.begin(), bias.end(), 0.0);
}

Matrix DenseLayer::forward(const Matrix& input) const {
    if (input.cols() != in_width())
        throw std::invalid_argument("DenseLayer: input width " + std::to_string(input.cols()) + ", expected " +
                                    std::to_string(in_width()));
    Matrix out(input.rows(), out_width());
    for (std::size_t r = 0; r < input.rows(); ++r) {
        auto x = input.row(r);
        auto y = out.row(r);
        for (std::size_t o = 0; o < out_width(); ++o) {
            auto w = weight.row(o);
            double acc = bias[o];
            for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
            y[o] = acc;
        }
    }
    return out;
}

Matrix DenseLayer::backward(const Matrix& input, const Matrix& grad_out) {
    Matrix grad_in(input.rows(), in_width());
    for (std::size_t r = 0; r < input.rows(); ++r) {
        auto x = input.row(r);
        auto g = grad_out.row(r);
        auto gx = grad_in.row(r);
        for (std::size_t o = 0; o < out_width(); ++o) {
            const double go = g[o];
            if (go == 0.0) continue;
            grad_bias[o] += go;
            auto w = weight.row(o);
            auto gw = grad_weight.row(o);
            for (std::size_t i = 0; i < x.size(); ++i) {
                gw[i] += go * x[i];
                gx[i] += go * w[i];
            }
        }
    }
    return grad_in;
}

void DenseLayer::zero_grad() {
    grad_weight.fill(0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

void DenseLayer::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", weight.values(), grad_weight.values()});
    out.push_back({prefix + ".bias", bias, grad_bias});
}

NormLayer::NormLayer(std::size_t width, double eps)
    : gain(width, 1.0), shift(width, 0.0), grad_gain(width, 0.0), grad_shift(width, 0.0), epsilon(eps) {
    if (width == 0) throw std::invalid_argument("NormLayer: width must be positive");
}

Matrix NormLayer::forward(const Matrix& input, Cache* cache) const {
    if (input.cols() != width()) throw std::invalid_argument("NormLayer: input width mismatch");
    const std::size_t n = input.cols();
    Matrix out(input.rows(), n);
    if (cache) {
        cache->normalized = Matrix(input.rows(), n);
        cache->inv_std.assign(input.rows(), 0.0);
    }
    for (std::size_t r = 0; r < input.rows(); ++r) {
        auto x = input.row(r);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + epsilon);
        auto y = out.row(r);
        for (std::size_t i = 0; i < n; ++i) {
            const double xhat = (x[i] - mean) * inv;
            if (cache) cache->normalized(r, i) = xhat;
            y[i] = gain[i] * xhat + shift[i];
        }
        if (cache) cache->inv_std[r] = inv;
    }
    return out;
}

Matrix NormLayer::backward(const Cache& cache, const Matrix& grad_out) {
    const std::size_t n = width();
    const double dn = static_cast<double>(n);
    Matrix grad_in(grad_out.rows(), n);
    std::vector<double> dxhat(n);
    for (std::size_t r = 0; r < grad_out.rows(); ++r) {
        auto g = grad_out.row(r);
        auto xhat = cache.normalized.row(r);
        double sum = 0.0, sum_x = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            grad_gain[i] += g[i] * xhat[i];
            grad_shift[i] += g[i];
            dxhat[i] = g[i] * gain[i];
            sum += dxhat[i];
            sum_x += dxhat[i] * xhat[i];
        }
        const double scale = cache.inv_std[r] / dn;
        auto gx = grad_in.row(r);
        for (std::size_t i = 0; i < n; ++i) gx[i] = scale * (dn * dxhat[i] - sum - xhat[i] * sum_x);
    }
    return grad_in;
}

void NormLayer::zero_grad() {
    std::fill(grad_gain.begin(), grad_gain.end(), 0.0);
    std::fill(grad_shift.begin(), grad_shift.end(), 0.0);
}

void NormLayer::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gain", gain, grad_gain});
    out.push_back({prefix + ".shift", shift, grad_shift});
}

Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.values()) v = sigmoid(v);
    return out;
}

Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        auto y = out.row(r);
        const double peak = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t i = 0; i < in.size(); ++i) {
            y[i] = std::exp(in[i] - peak);
            total += y[i];
        }
        for (double& v : y) v /= total;
    }
    return out;
}

Matrix relu_backward(const Matrix& output, const Matrix& grad_out) {
    Matrix g = grad_out;
    auto o = output.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
        if (o[i] <= 0.0) gv[i] = 0.0;
    return g;
}

Matrix sigmoid_backward(const Matrix& output, const Matrix& grad_out) {
    Matrix g = grad_out;
    auto o = output.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= o[i] * (1.0 - o[i]);
    return g;
}

Matrix softmax_rows_backward(const Matrix& output, const Matrix& grad_out) {
    Matrix g(output.rows(), output.cols());
    for (std::size_t r = 0; r < output.rows(); ++r) {
        auto y = output.row(r);
        auto gy = grad_out.row(r);
        double dot = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * gy[i];
        auto gx = g.row(r);
        for (std::size_t i = 0; i < y.size(); ++i) gx[i] = y[i] * (gy[i] - dot);
    }
    return g;
}

LossResult bce_loss(std::span<const double> pred, std::span<const int> labels) {
    if (pred.size() != labels.size() || pred.empty())
        throw std::invalid_argument("bce_loss: predictions and labels must be non-empty and equal length");
    const double n = static_cast<double>(pred.size());
    LossResult out;
    out.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], kProbClamp, 1.0 - kProbClamp);
        if (labels[i] == 1) {
            out.loss -= std::log(p);
            out.grad[i] = -1.0 / (p * n);
        } else {
            out.loss -= std::log(1.0 - p);
            out.grad[i] = 1.0 / ((1.0 - p) * n);
        }
    }
    out.loss /= n;
    return out;
}

void adam_step(std::span<const ParamRef> params, AdamState& state) {
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.value.size(), 0.0);
            state.second_moment.emplace_back(p.value.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw std::invalid_argument("adam_step: parameter list changed between steps");
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto value = params[b].value;
        auto grad = params[b].grad;
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        if (m.size() != value.size()) throw std::invalid_argument("adam_step: moment buffer shape mismatch");
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i] + state.weight_decay * value[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            value[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

GradCheckResult grad_check(const std::function<double(bool)>& loss, std::span<const ParamRef> params,
                           const GradCheckOptions& options) {
    loss(true);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.emplace_back(p.grad.begin(), p.grad.end());

    GradCheckResult result;
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto value = params[b].value;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + options.step;
            const double up = loss(false);
            value[i] = saved - options.step;
            const double down = loss(false);
            value[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double a = analytic[b][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
            const double err = std::abs(a - numeric) / denom;
            if (result.worst_param.empty() || err > result.max_relative_error)
                result = {err, params[b].name, i, a, numeric};
        }
    }
    return result;
}

void save_parameters(std::ostream& out, std::span<const ParamRef> params) {
    out << "tabattn-params 1 " << params.size() << '\n';
    char buf[40];
    for (const auto& p : params) {
        out << p.name << ' ' << p.value.size() << '\n';
        for (double v : p.value) {
            std::snprintf(buf, sizeof buf, "%a", v);
            out << buf << '\n';
        }
    }
    if (!out) throw std::runtime_error("save_parameters: write failed");
}

void load_parameters(std::istream& in, std::span<const ParamRef> params) {
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    if (!(in >> magic >> version >> count) || magic != "tabattn-params" || version != 1)
        throw std::runtime_error("load_parameters: not a parameter checkpoint");
    if (count != params.size())
        throw std::runtime_error("load_parameters: checkpoint has " + std::to_string(count) + " blocks, model has " +
                                 std::to_string(params.size()));
    for (const auto& p : params) {
        std::string name;
        std::size_t len = 0;
        if (!(in >> name >> len)) throw std::runtime_error("load_parameters: truncated checkpoint");
        if (name != p.name || len != p.value.size())
            throw std::runtime_error("load_parameters: block '" + name + "' does not match '" + p.name + "'");
        std::string token;
        for (double& v : p.value) {
            if (!(in >> token)) throw std::runtime_error("load_parameters: truncated block " + name);
            char* end = nullptr;
            v = std::strtod(token.c_str(), &end);
            if (end != token.c_str() + token.size())
                throw std::runtime_error("load_parameters: bad value '" + token + "' in " + name);
        }
    }
}

}  // namespace tabattn::nn
