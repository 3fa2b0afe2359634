#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabattn/data.hpp"
#include "tabattn/model.hpp"
#include "tabattn/views.hpp"

namespace tabattn {

enum class MonitorMetric { F1Default, Auc, Acc };

std::string_view to_string(MonitorMetric m);
MonitorMetric monitor_from_string(std::string_view s);

struct TrainConfig {
    std::size_t batch_size = 30;
    double initial_lr = 0.01;
    // Stagnant epochs before the learning rate drops by 10x, and before stopping.
    std::size_t patience_lr = 10;
    std::size_t patience_stop = 20;
    std::size_t max_epochs = 500;
    double lr_factor = 0.1;
    // L2 penalty folded into every Adam gradient, biases and norm gains included.
    double weight_decay = 0.01;
    // Monitor on a stratified 20% slice of the training data instead of all of it.
    bool holdout = false;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    double loss = 0.0;     // mean batch loss over the epoch
    double monitor = 0.0;  // monitor score after the epoch
    double lr = 0.0;       // learning rate used during the epoch
};

enum class StopReason { Stagnation, MaxEpochs };

struct TrainState {
    double learning_rate = 0.01;
    double best_score = 0.0;
    std::size_t stagnation_epochs = 0;
    std::size_t epoch = 0;
    std::vector<EpochRecord> history;
};

struct TrainReport {
    std::vector<EpochRecord> history;
    std::vector<double> best_history;  // best score after each epoch
    StopReason stop_reason = StopReason::MaxEpochs;
    std::size_t epochs_run = 0;
    // 0 when no epoch ever beat the initial best score; the initial
    // parameters are returned in that case.
    std::size_t best_epoch = 0;
    double best_score = 0.0;
    std::size_t lr_reductions = 0;
    MonitorMetric monitor = MonitorMetric::F1Default;
};

void to_json(nlohmann::json& j, const TrainReport& r);

// Score of `model` on `data` under `monitor` at threshold 0.5.
double monitor_score(const Model& model, const ViewSet& views, const Dataset& data, MonitorMetric monitor);

// Adam with the monitor-driven schedule: an epoch whose score strictly
// beats the best resets the stagnation count; after `patience_lr` stagnant
// epochs the rate is multiplied by `lr_factor` once, after `patience_stop`
// training stops. `model` ends holding the best-scoring epoch's parameters.
TrainReport train(Model& model, const ViewSet& views, const Dataset& train_data, MonitorMetric monitor,
                  const TrainConfig& config);

struct BaselineDnn {
    Model model;
    ViewSet views;  // global view only
};

// The global branch plus output head, no local views and no attention,
// trained under the same schedule.
BaselineDnn make_baseline_dnn(std::size_t n_features, ModelConfig config, std::uint64_t seed);
TrainReport train_baseline_dnn(BaselineDnn& dnn, const Dataset& train_data, MonitorMetric monitor,
                               const TrainConfig& config);

}  // namespace tabattn
