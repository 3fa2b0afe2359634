#include "tabattn/trainer.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tabattn/metrics.hpp"

namespace tabattn {

std::string_view to_string(MonitorMetric m) {
    switch (m) {
        case MonitorMetric::F1Default: return "f1";
        case MonitorMetric::Auc: return "auc";
        case MonitorMetric::Acc: return "acc";
    }
    return "?";
}

MonitorMetric monitor_from_string(std::string_view s) {
    if (s == "f1") return MonitorMetric::F1Default;
    if (s == "auc") return MonitorMetric::Auc;
    if (s == "acc") return MonitorMetric::Acc;
    throw std::invalid_argument("unknown monitor metric: " + std::string(s) + " (expected f1, auc or acc)");
}

void to_json(nlohmann::json& j, const TrainReport& r) {
    std::vector<double> loss, monitor, lr;
    for (const auto& e : r.history) {
        loss.push_back(e.loss);
        monitor.push_back(e.monitor);
        lr.push_back(e.lr);
    }
    j = {{"monitor", std::string(to_string(r.monitor))},
         {"loss", loss},
         {"monitor_score", monitor},
         {"lr", lr},
         {"best_score", r.best_score},
         {"best_epoch", r.best_epoch},
         {"epochs_run", r.epochs_run},
         {"lr_reductions", r.lr_reductions},
         {"stop_reason", r.stop_reason == StopReason::Stagnation ? "stagnation" : "max_epochs"}};
}

double monitor_score(const Model& model, const ViewSet& views, const Dataset& data, MonitorMetric monitor) {
    const auto pred = predict(model, views, data.features);
    switch (monitor) {
        case MonitorMetric::Auc:
            return metrics::auc(pred.scores, data.labels);
        case MonitorMetric::Acc:
            return metrics::accuracy(metrics::confusion(data.labels, pred.labels));
        case MonitorMetric::F1Default:
            break;
    }
    return metrics::precision_recall_f1(metrics::confusion(data.labels, pred.labels), 1).f1;
}

TrainReport train(Model& model, const ViewSet& views, const Dataset& train_data, MonitorMetric monitor,
                  const TrainConfig& config) {
    const std::size_t pos = train_data.positives();
    if (pos == 0 || pos == train_data.rows()) throw std::invalid_argument("train: training data needs both classes");
    if (config.patience_stop <= config.patience_lr)
        throw std::invalid_argument("train: patience_stop must exceed patience_lr");
    if (config.batch_size == 0 || !(config.initial_lr > 0.0) || config.max_epochs == 0)
        throw std::invalid_argument("train: batch size, learning rate and max_epochs must be positive");

    Dataset fit_set, monitor_set;
    const Dataset* fit = &train_data;
    const Dataset* watch = &train_data;
    if (config.holdout) {
        SplitSpec spec{config.seed ^ 0x686f6c646f7574ULL, 1.0 - config.holdout_fraction, true};
        auto [a, b] = split(train_data, spec);
        fit_set = std::move(a);
        monitor_set = std::move(b);
        fit = &fit_set;
        watch = &monitor_set;
    }

    TrainState state;
    state.learning_rate = config.initial_lr;
    // Epoch 1 always becomes the first snapshot, even at a score of 0.
    state.best_score = -std::numeric_limits<double>::infinity();
    nn::AdamState adam;
    adam.weight_decay = config.weight_decay;
    auto params = model.parameters();
    Rng dropout_rng = make_rng(config.seed, Stream::Dropout);
    Rng* dropout = model.config.dropout > 0.0 ? &dropout_rng : nullptr;

    TrainReport report;
    report.monitor = monitor;
    Model best = model;

    for (state.epoch = 1; state.epoch <= config.max_epochs; ++state.epoch) {
        adam.learning_rate = state.learning_rate;
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (const auto& batch : batches(*fit, config.batch_size, config.seed, state.epoch)) {
            model.zero_grad();
            auto out = forward(model, views, batch.features, dropout);
            auto grads = loss(out.local_preds, out.final_pred, batch.labels, model.config.aux_loss_weight);
            backward(model, out.trace, grads);
            nn::adam_step(params, adam);
            loss_sum += grads.total * static_cast<double>(batch.labels.size());
            seen += batch.labels.size();
        }
        const double score = monitor_score(model, views, *watch, monitor);
        state.history.push_back({loss_sum / static_cast<double>(seen), score, state.learning_rate});

        if (score > state.best_score) {
            state.best_score = score;
            state.stagnation_epochs = 0;
            best = model;
            report.best_epoch = state.epoch;
        } else {
            ++state.stagnation_epochs;
            if (state.stagnation_epochs == config.patience_lr) {
                state.learning_rate *= config.lr_factor;
                ++report.lr_reductions;
            }
        }
        report.best_history.push_back(state.best_score);
        if (state.stagnation_epochs >= config.patience_stop) {
            report.stop_reason = StopReason::Stagnation;
            break;
        }
    }
    report.epochs_run = state.history.size();
    report.history = std::move(state.history);
    report.best_score = state.best_score;
    model = std::move(best);
    return report;
}

BaselineDnn make_baseline_dnn(std::size_t n_features, ModelConfig config, std::uint64_t seed) {
    BaselineDnn dnn;
    dnn.views.global.strategy = Strategy::GLOBAL;
    dnn.views.global.indices.resize(n_features);
    std::iota(dnn.views.global.indices.begin(), dnn.views.global.indices.end(), 0);
    config.attention = false;
    dnn.model = init_model(dnn.views, config, seed);
    return dnn;
}

TrainReport train_baseline_dnn(BaselineDnn& dnn, const Dataset& train_data, MonitorMetric monitor,
                               const TrainConfig& config) {
    return train(dnn.model, dnn.views, train_data, monitor, config);
}

}  // namespace tabattn
