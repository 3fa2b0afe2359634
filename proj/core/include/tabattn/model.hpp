#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabattn/data.hpp"
#include "tabattn/nn.hpp"
#include "tabattn/views.hpp"

namespace tabattn {

enum class Variant { Small, Large };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

struct ModelConfig {
    // Local branch: input -> hidden1 (relu, norm) -> hidden2 (relu) -> 1 (sigmoid).
    std::size_t local_hidden1 = 32;
    std::size_t local_hidden2 = 16;
    // Global branch: input -> hidden (relu, norm) -> embed (relu).
    std::size_t global_hidden = 64;
    std::size_t global_embed = 8;
    // When false the concatenated vector feeds the output head directly.
    bool attention = true;
    // Weight of the summed local-view cross-entropies in the loss.
    double aux_loss_weight = 1.0;
    // Large doubles the hidden widths and normalizes every non-output layer.
    Variant variant = Variant::Small;
    // Inverted dropout on the first hidden layer of every branch, training only.
    double dropout = 0.2;
    double norm_epsilon = 1e-5;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct LocalBranch {
    nn::DenseLayer input;
    nn::NormLayer norm;
    nn::DenseLayer hidden;
    std::optional<nn::NormLayer> hidden_norm;
    nn::DenseLayer output;
};

struct GlobalBranch {
    nn::DenseLayer input;
    nn::NormLayer norm;
    nn::DenseLayer embed;
    std::optional<nn::NormLayer> embed_norm;
};

struct Model {
    ModelConfig config;
    std::vector<LocalBranch> locals;
    GlobalBranch global;
    // Square maps over the concatenated width; unused without attention.
    nn::DenseLayer query, key, value;
    nn::DenseLayer head;

    std::size_t concat_width() const { return global.embed.out_width() + locals.size(); }
    std::vector<nn::ParamRef> parameters();
    std::size_t parameter_count() const;
    void zero_grad();
};

Model init_model(const ViewSet& views, const ModelConfig& config, std::uint64_t seed);

struct BranchTrace {
    Matrix input;
    Matrix act1;  // relu(W1 x + b1)
    nn::NormLayer::Cache norm1;
    Matrix f1;  // normalized, after dropout when training
    Matrix dropout_mask;
    Matrix act2;  // relu(W2 f1 + b2)
    nn::NormLayer::Cache norm2;
    Matrix f2;  // act2, normalized in the large variant
    Matrix prob;  // local branches only: sigmoid(W3 f2 + b3)
};

struct ForwardTrace {
    std::vector<BranchTrace> locals;
    BranchTrace global;
    Matrix concat;  // F*: [global embed | local predictions]
    Matrix q, k, v;
    std::vector<Matrix> attention;  // one row-stochastic matrix per sample
    Matrix attended;  // A V per sample
    Matrix final_prob;
};

struct ForwardResult {
    std::vector<std::vector<double>> local_preds;
    std::vector<double> final_pred;
    ForwardTrace trace;
};

// `dropout_rng` enables training-mode dropout when the config asks for it.
ForwardResult forward(const Model& model, const ViewSet& views, const Matrix& features, Rng* dropout_rng = nullptr);

struct LossGrads {
    double total = 0.0;
    double final_loss = 0.0;
    std::vector<double> local_losses;
    std::vector<double> d_final;                // d total / d final probability
    std::vector<std::vector<double>> d_local;  // d total / d local probability (aux term only)
};

// bce(final) + aux_loss_weight * sum_i bce(local_i).
LossGrads loss(const std::vector<std::vector<double>>& local_preds, const std::vector<double>& final_pred,
               std::span<const int> labels, double aux_loss_weight);

// Accumulates into the model's gradient buffers.
void backward(Model& model, const ForwardTrace& trace, const LossGrads& grads);

struct Prediction {
    std::vector<int> labels;
    std::vector<double> scores;
};

// Label 1 iff score >= threshold.
Prediction predict(const Model& model, const ViewSet& views, const Matrix& features, double threshold = 0.5);

// First line: JSON header {format, version, config, views, view_digest};
// the rest is the nn parameter checkpoint.
void save_checkpoint(std::ostream& out, Model& model, const ViewSet& views);
std::pair<Model, ViewSet> load_checkpoint(std::istream& in);

}  // namespace tabattn
