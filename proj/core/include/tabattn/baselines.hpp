#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "tabattn/data.hpp"
#include "tabattn/metrics.hpp"
#include "tabattn/model.hpp"
#include "tabattn/trainer.hpp"
#include "tabattn/trees.hpp"

namespace tabattn {

enum class BaselineKind { LR, DT, RF, GBDT, AdaBoost, DNN };

std::string_view to_string(BaselineKind k);
BaselineKind baseline_from_string(std::string_view s);

struct BaselineSpec {
    BaselineKind kind = BaselineKind::LR;
    int max_depth = 10;
    std::size_t n_estimators = 50;
    double C = 0.1;
    double shrinkage = 0.1;
    std::size_t min_samples = 2;
    ModelConfig dnn{};
    TrainConfig train{};
    MonitorMetric monitor = MonitorMetric::F1Default;
    std::uint64_t seed = 0;
};

// Discrete two-class AdaBoost over weighted entropy trees.
struct AdaBoostModel {
    std::vector<trees::GainTree> trees;
    std::vector<double> alphas;

    // sum_t alpha_t * h_t(x), h in {-1, +1}.
    double decision(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const;
};

struct AdaBoostFit {
    AdaBoostModel model;
    // Sample weights after each stage (each sums to 1).
    std::vector<std::vector<double>> weight_history;
};

AdaBoostFit fit_adaboost(const Dataset& data, std::size_t n_estimators, int max_depth, std::size_t min_samples);

struct BaselineResult {
    std::vector<double> scores;
    std::vector<int> labels;
    metrics::MetricsReport report;
};

BaselineResult fit_predict(const BaselineSpec& spec, const Dataset& train, const Dataset& test);

}  // namespace tabattn
