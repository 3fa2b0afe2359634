#include "tabattn/model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tabattn {

namespace {

// Shared front half of every branch: F1 = Norm(Relu(W1 x + b1)), then dropout.
void branch_front(const nn::DenseLayer& layer, const nn::NormLayer& norm, BranchTrace& t, double dropout, Rng* rng) {
    t.act1 = nn::relu(layer.forward(t.input));
    t.f1 = norm.forward(t.act1, &t.norm1);
    if (rng && dropout > 0.0) {
        t.dropout_mask = Matrix(t.f1.rows(), t.f1.cols());
        const double keep = 1.0 - dropout;
        auto mask = t.dropout_mask.values();
        auto f1 = t.f1.values();
        for (std::size_t i = 0; i < mask.size(); ++i) {
            mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
            f1[i] *= mask[i];
        }
    }
}

void branch_middle(const nn::DenseLayer& layer, const std::optional<nn::NormLayer>& norm, BranchTrace& t) {
    t.act2 = nn::relu(layer.forward(t.f1));
    t.f2 = norm ? norm->forward(t.act2, &t.norm2) : t.act2;
}

// Backward through branch_middle and branch_front; the input gradient is dropped.
void branch_backward(nn::DenseLayer& in, nn::NormLayer& norm, nn::DenseLayer& mid,
                     std::optional<nn::NormLayer>& mid_norm, const BranchTrace& t, Matrix d_f2) {
    Matrix d_act2 = mid_norm ? mid_norm->backward(t.norm2, d_f2) : std::move(d_f2);
    Matrix d_pre2 = nn::relu_backward(t.act2, d_act2);
    Matrix d_f1 = mid.backward(t.f1, d_pre2);
    if (!t.dropout_mask.empty()) {
        auto g = d_f1.values();
        auto m = t.dropout_mask.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
    }
    Matrix d_act1 = norm.backward(t.norm1, d_f1);
    Matrix d_pre1 = nn::relu_backward(t.act1, d_act1);
    in.backward(t.input, d_pre1);
}

std::vector<double> column(const Matrix& m, std::size_t c) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
    return out;
}

void check_views(const Model& model, const ViewSet& views, const Matrix& features) {
    if (views.locals.size() != model.locals.size())
        throw std::invalid_argument("model has " + std::to_string(model.locals.size()) + " local branches, view set has " +
                                    std::to_string(views.locals.size()));
    if (views.global.indices.size() != model.global.input.in_width())
        throw std::invalid_argument("global view width does not match the global branch");
    for (std::size_t i = 0; i < views.locals.size(); ++i)
        if (views.locals[i].indices.size() != model.locals[i].input.in_width())
            throw std::invalid_argument("local view " + std::to_string(i) + " width does not match its branch");
    auto covered = [&](const FeatureView& v) {
        return v.indices.empty() || v.indices.back() < features.cols();
    };
    bool ok = covered(views.global);
    for (const auto& v : views.locals) ok = ok && covered(v);
    if (!ok) throw std::invalid_argument("batch does not cover every view index");
}

}  // namespace

std::string_view to_string(Variant v) { return v == Variant::Small ? "small" : "large"; }

Variant variant_from_string(std::string_view s) {
    if (s == "small") return Variant::Small;
    if (s == "large") return Variant::Large;
    throw std::invalid_argument("unknown model variant: " + std::string(s));
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"local_hidden", {c.local_hidden1, c.local_hidden2}},
         {"global_hidden", c.global_hidden},
         {"global_embed", c.global_embed},
         {"attention", c.attention},
         {"aux_loss_weight", c.aux_loss_weight},
         {"variant", std::string(to_string(c.variant))},
         {"dropout", c.dropout},
         {"norm_epsilon", c.norm_epsilon}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    const auto local = j.at("local_hidden").get<std::vector<std::size_t>>();
    if (local.size() != 2) throw std::runtime_error("model config: local_hidden needs two widths");
    c.local_hidden1 = local[0];
    c.local_hidden2 = local[1];
    c.global_hidden = j.at("global_hidden").get<std::size_t>();
    c.global_embed = j.at("global_embed").get<std::size_t>();
    c.attention = j.at("attention").get<bool>();
    c.aux_loss_weight = j.at("aux_loss_weight").get<double>();
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.dropout = j.value("dropout", 0.2);
    c.norm_epsilon = j.value("norm_epsilon", 1e-5);
}

std::vector<nn::ParamRef> Model::parameters() {
    std::vector<nn::ParamRef> out;
    for (std::size_t i = 0; i < locals.size(); ++i) {
        const std::string p = "local" + std::to_string(i);
        auto& b = locals[i];
        b.input.append_params(p + ".input", out);
        b.norm.append_params(p + ".norm", out);
        b.hidden.append_params(p + ".hidden", out);
        if (b.hidden_norm) b.hidden_norm->append_params(p + ".hidden_norm", out);
        b.output.append_params(p + ".output", out);
    }
    global.input.append_params("global.input", out);
    global.norm.append_params("global.norm", out);
    global.embed.append_params("global.embed", out);
    if (global.embed_norm) global.embed_norm->append_params("global.embed_norm", out);
    if (config.attention) {
        query.append_params("attention.query", out);
        key.append_params("attention.key", out);
        value.append_params("attention.value", out);
    }
    head.append_params("head", out);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : const_cast<Model*>(this)->parameters()) n += p.value.size();
    return n;
}

void Model::zero_grad() {
    for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

Model init_model(const ViewSet& views, const ModelConfig& config, std::uint64_t seed) {
    if (config.local_hidden1 == 0 || config.local_hidden2 == 0 || config.global_hidden == 0 || config.global_embed == 0)
        throw std::invalid_argument("init_model: widths must be positive");
    if (views.global.indices.empty()) throw std::invalid_argument("init_model: empty global view");
    const std::size_t scale = config.variant == Variant::Large ? 2 : 1;
    const bool large = config.variant == Variant::Large;
    Rng rng = make_rng(seed, Stream::Init);

    Model m;
    m.config = config;
    for (const auto& view : views.locals) {
        if (view.indices.empty()) throw std::invalid_argument("init_model: empty local view");
        LocalBranch b{nn::DenseLayer(view.indices.size(), config.local_hidden1 * scale),
                      nn::NormLayer(config.local_hidden1 * scale, config.norm_epsilon),
                      nn::DenseLayer(config.local_hidden1 * scale, config.local_hidden2 * scale),
                      std::nullopt,
                      nn::DenseLayer(config.local_hidden2 * scale, 1)};
        if (large) b.hidden_norm = nn::NormLayer(config.local_hidden2 * scale, config.norm_epsilon);
        b.input.init_glorot(rng);
        b.hidden.init_glorot(rng);
        b.output.init_glorot(rng);
        m.locals.push_back(std::move(b));
    }
    m.global.input = nn::DenseLayer(views.global.indices.size(), config.global_hidden * scale);
    m.global.norm = nn::NormLayer(config.global_hidden * scale, config.norm_epsilon);
    m.global.embed = nn::DenseLayer(config.global_hidden * scale, config.global_embed);
    if (large) m.global.embed_norm = nn::NormLayer(config.global_embed, config.norm_epsilon);
    m.global.input.init_glorot(rng);
    m.global.embed.init_glorot(rng);

    const std::size_t width = m.concat_width();
    if (config.attention) {
        m.query = nn::DenseLayer(width, width);
        m.key = nn::DenseLayer(width, width);
        m.value = nn::DenseLayer(width, width);
        m.query.init_glorot(rng);
        m.key.init_glorot(rng);
        m.value.init_glorot(rng);
    }
    m.head = nn::DenseLayer(width, 1);
    m.head.init_glorot(rng);
    return m;
}

ForwardResult forward(const Model& model, const ViewSet& views, const Matrix& features, Rng* dropout_rng) {
    check_views(model, views, features);
    const std::size_t batch = features.rows();
    const double dropout = model.config.dropout;
    ForwardResult res;
    ForwardTrace& t = res.trace;

    t.global.input = gather_cols(features, views.global.indices);
    branch_front(model.global.input, model.global.norm, t.global, dropout, dropout_rng);
    branch_middle(model.global.embed, model.global.embed_norm, t.global);

    t.locals.resize(model.locals.size());
    for (std::size_t i = 0; i < model.locals.size(); ++i) {
        const auto& b = model.locals[i];
        auto& lt = t.locals[i];
        lt.input = gather_cols(features, views.locals[i].indices);
        branch_front(b.input, b.norm, lt, dropout, dropout_rng);
        branch_middle(b.hidden, b.hidden_norm, lt);
        lt.prob = nn::sigmoid(b.output.forward(lt.f2));
        res.local_preds.push_back(column(lt.prob, 0));
    }

    const std::size_t embed = model.global.embed.out_width();
    const std::size_t width = model.concat_width();
    t.concat = Matrix(batch, width);
    for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t j = 0; j < embed; ++j) t.concat(r, j) = t.global.f2(r, j);
        for (std::size_t i = 0; i < model.locals.size(); ++i) t.concat(r, embed + i) = t.locals[i].prob(r, 0);
    }

    const Matrix* head_input = &t.concat;
    if (model.config.attention) {
        t.q = model.query.forward(t.concat);
        t.k = model.key.forward(t.concat);
        t.v = model.value.forward(t.concat);
        t.attended = Matrix(batch, width);
        t.attention.reserve(batch);
        for (std::size_t r = 0; r < batch; ++r) {
            // Every slot of F* is a token: scores are the outer product q k^T.
            Matrix scores(width, width);
            for (std::size_t i = 0; i < width; ++i)
                for (std::size_t j = 0; j < width; ++j) scores(i, j) = t.q(r, i) * t.k(r, j);
            Matrix a = nn::softmax_rows(scores);
            for (std::size_t i = 0; i < width; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < width; ++j) s += a(i, j) * t.v(r, j);
                t.attended(r, i) = s;
            }
            t.attention.push_back(std::move(a));
        }
        head_input = &t.attended;
    }
    t.final_prob = nn::sigmoid(model.head.forward(*head_input));
    res.final_pred = column(t.final_prob, 0);
    return res;
}

LossGrads loss(const std::vector<std::vector<double>>& local_preds, const std::vector<double>& final_pred,
               std::span<const int> labels, double aux_loss_weight) {
    LossGrads g;
    auto fin = nn::bce_loss(final_pred, labels);
    g.final_loss = fin.loss;
    g.total = fin.loss;
    g.d_final = std::move(fin.grad);
    for (const auto& pred : local_preds) {
        auto l = nn::bce_loss(pred, labels);
        g.local_losses.push_back(l.loss);
        g.total += aux_loss_weight * l.loss;
        for (double& v : l.grad) v *= aux_loss_weight;
        g.d_local.push_back(std::move(l.grad));
    }
    return g;
}

void backward(Model& model, const ForwardTrace& t, const LossGrads& grads) {
    const std::size_t batch = t.final_prob.rows();
    const std::size_t width = model.concat_width();
    const std::size_t embed = model.global.embed.out_width();

    Matrix d_final(batch, 1, grads.d_final);
    Matrix d_logit = nn::sigmoid_backward(t.final_prob, d_final);

    Matrix d_concat;
    if (model.config.attention) {
        Matrix d_att = model.head.backward(t.attended, d_logit);
        Matrix dq(batch, width), dk(batch, width), dv(batch, width);
        Matrix d_a(width, width);
        for (std::size_t r = 0; r < batch; ++r) {
            const Matrix& a = t.attention[r];
            for (std::size_t i = 0; i < width; ++i) {
                const double go = d_att(r, i);
                for (std::size_t j = 0; j < width; ++j) {
                    d_a(i, j) = go * t.v(r, j);
                    dv(r, j) += a(i, j) * go;
                }
            }
            Matrix d_scores = nn::softmax_rows_backward(a, d_a);
            for (std::size_t i = 0; i < width; ++i) {
                for (std::size_t j = 0; j < width; ++j) {
                    const double ds = d_scores(i, j);
                    dq(r, i) += ds * t.k(r, j);
                    dk(r, j) += ds * t.q(r, i);
                }
            }
        }
        d_concat = model.query.backward(t.concat, dq);
        Matrix from_k = model.key.backward(t.concat, dk);
        Matrix from_v = model.value.backward(t.concat, dv);
        auto dc = d_concat.values();
        auto fk = from_k.values();
        auto fv = from_v.values();
        for (std::size_t i = 0; i < dc.size(); ++i) dc[i] += fk[i] + fv[i];
    } else {
        d_concat = model.head.backward(t.concat, d_logit);
    }

    for (std::size_t i = 0; i < model.locals.size(); ++i) {
        auto& b = model.locals[i];
        const auto& lt = t.locals[i];
        Matrix d_prob(batch, 1);
        for (std::size_t r = 0; r < batch; ++r) d_prob(r, 0) = d_concat(r, embed + i) + grads.d_local[i][r];
        Matrix d_logit3 = nn::sigmoid_backward(lt.prob, d_prob);
        Matrix d_f2 = b.output.backward(lt.f2, d_logit3);
        branch_backward(b.input, b.norm, b.hidden, b.hidden_norm, lt, std::move(d_f2));
    }

    Matrix d_embed(batch, embed);
    for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < embed; ++j) d_embed(r, j) = d_concat(r, j);
    branch_backward(model.global.input, model.global.norm, model.global.embed, model.global.embed_norm, t.global,
                    std::move(d_embed));
}

Prediction predict(const Model& model, const ViewSet& views, const Matrix& features, double threshold) {
    Prediction p;
    constexpr std::size_t kChunk = 512;
    for (std::size_t start = 0; start < features.rows(); start += kChunk) {
        const std::size_t end = std::min(features.rows(), start + kChunk);
        std::vector<std::size_t> rows(end - start);
        std::iota(rows.begin(), rows.end(), start);
        auto res = forward(model, views, gather_rows(features, rows));
        for (double s : res.final_pred) {
            p.scores.push_back(s);
            p.labels.push_back(s >= threshold ? 1 : 0);
        }
    }
    return p;
}

void save_checkpoint(std::ostream& out, Model& model, const ViewSet& views) {
    nlohmann::json header = {{"format", "tabattn-model"},
                             {"version", 1},
                             {"config", model.config},
                             {"views", views},
                             {"view_digest", views.digest()}};
    out << header.dump() << '\n';
    nn::save_parameters(out, model.parameters());
}

std::pair<Model, ViewSet> load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: empty stream");
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "tabattn-model" || header.value("version", 0) != 1)
        throw std::runtime_error("checkpoint: unrecognized header");
    auto config = header.at("config").get<ModelConfig>();
    auto views = header.at("views").get<ViewSet>();
    if (views.digest() != header.at("view_digest").get<std::string>())
        throw std::runtime_error("checkpoint: view set digest mismatch");
    Model model = init_model(views, config, 0);
    nn::load_parameters(in, model.parameters());
    return {std::move(model), std::move(views)};
}

}  // namespace tabattn
