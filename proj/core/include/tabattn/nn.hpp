#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tabattn/matrix.hpp"
#include "tabattn/rng.hpp"

namespace tabattn::nn {

// Named view of one parameter block and its gradient buffer.
struct ParamRef {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
};

// y = x W^T + b, with W stored out x in.
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;
    Matrix grad_weight;
    std::vector<double> grad_bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out);

    std::size_t in_width() const { return weight.cols(); }
    std::size_t out_width() const { return weight.rows(); }

    // Uniform in +-sqrt(6/(fan_in+fan_out)), zero bias.
    void init_glorot(Rng& rng);

    Matrix forward(const Matrix& input) const;
    // Accumulates parameter gradients and returns d(loss)/d(input).
    Matrix backward(const Matrix& input, const Matrix& grad_out);

    void zero_grad();
    void append_params(const std::string& prefix, std::vector<ParamRef>& out);
};

// Per-row normalization with learned gain and shift.
struct NormLayer {
    std::vector<double> gain;
    std::vector<double> shift;
    std::vector<double> grad_gain;
    std::vector<double> grad_shift;
    double epsilon = 1e-5;

    struct Cache {
        Matrix normalized;              // (x - mean) / sqrt(var + eps)
        std::vector<double> inv_std;    // per row
    };

    NormLayer() = default;
    explicit NormLayer(std::size_t width, double epsilon = 1e-5);

    std::size_t width() const { return gain.size(); }

    Matrix forward(const Matrix& input, Cache* cache = nullptr) const;
    Matrix backward(const Cache& cache, const Matrix& grad_out);

    void zero_grad();
    void append_params(const std::string& prefix, std::vector<ParamRef>& out);
};

Matrix relu(const Matrix& x);
Matrix sigmoid(const Matrix& x);
double sigmoid(double x);
Matrix softmax_rows(const Matrix& x);

// Backward helpers take the forward output where that is sufficient.
Matrix relu_backward(const Matrix& output, const Matrix& grad_out);
Matrix sigmoid_backward(const Matrix& output, const Matrix& grad_out);
// Row-wise softmax Jacobian-vector product.
Matrix softmax_rows_backward(const Matrix& output, const Matrix& grad_out);

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d(loss)/d(pred)
};

inline constexpr double kProbClamp = 1e-12;

// Mean binary cross-entropy over the batch, predictions clamped to
// [1e-12, 1-1e-12].
LossResult bce_loss(std::span<const double> pred, std::span<const int> labels);

struct AdamState {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // L2 penalty added to the gradient; 0 disables it.
    double weight_decay = 0.0;
    std::uint64_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// One bias-corrected Adam update over every block in `params`. Moment
// buffers are created on the first call.
void adam_step(std::span<const ParamRef> params, AdamState& state);

struct GradCheckOptions {
    double step = 1e-5;
    // Denominator floor so that near-zero gradients compare absolutely.
    double abs_floor = 1e-7;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// `loss` must return the scalar loss and, when asked, fill the gradient
// buffers of `params` (zeroing them first). The check compares against
// central differences.
GradCheckResult grad_check(const std::function<double(bool compute_grad)>& loss, std::span<const ParamRef> params,
                           const GradCheckOptions& options = {});

// Text checkpoint: a "tabattn-params 1 <count>" line, then one block per
// parameter: "<name> <length>" followed by hexfloat values, one per line.
void save_parameters(std::ostream& out, std::span<const ParamRef> params);
// Loads into existing blocks; names and lengths must match exactly.
void load_parameters(std::istream& in, std::span<const ParamRef> params);

}  // namespace tabattn::nn
