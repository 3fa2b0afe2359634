#include "tabattn/baselines.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tabattn/logistic.hpp"
#include "tabattn/nn.hpp"

namespace tabattn {

std::string_view to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::LR: return "lr";
        case BaselineKind::DT: return "dt";
        case BaselineKind::RF: return "rf";
        case BaselineKind::GBDT: return "gbdt";
        case BaselineKind::AdaBoost: return "adaboost";
        case BaselineKind::DNN: return "dnn";
    }
    return "?";
}

BaselineKind baseline_from_string(std::string_view s) {
    for (auto k : {BaselineKind::LR, BaselineKind::DT, BaselineKind::RF, BaselineKind::GBDT, BaselineKind::AdaBoost,
                   BaselineKind::DNN})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown baseline: " + std::string(s) + " (expected lr, dt, rf, gbdt, adaboost or dnn)");
}

double AdaBoostModel::decision(std::span<const double> x) const {
    double f = 0.0;
    for (std::size_t t = 0; t < trees.size(); ++t) f += alphas[t] * (trees[t].predict(x) == 1 ? 1.0 : -1.0);
    return f;
}

double AdaBoostModel::predict_proba(std::span<const double> x) const { return nn::sigmoid(2.0 * decision(x)); }

AdaBoostFit fit_adaboost(const Dataset& data, std::size_t n_estimators, int max_depth, std::size_t min_samples) {
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("fit_adaboost: empty dataset");
    AdaBoostFit fit;
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    trees::TreeParams tp{max_depth, min_samples, 0};
    Rng unused(0);

    for (std::size_t t = 0; t < n_estimators; ++t) {
        auto tree = trees::fit_gain_tree(data.features, data.labels, rows, w, tp, unused).tree;
        double err = 0.0;
        std::vector<bool> miss(n);
        for (std::size_t i = 0; i < n; ++i) {
            miss[i] = tree.predict(data.features.row(i)) != data.labels[i];
            if (miss[i]) err += w[i];
        }
        if (err <= 0.0) {
            // A perfect learner ends boosting; it gets unit weight like scikit-learn's.
            fit.model.trees.push_back(std::move(tree));
            fit.model.alphas.push_back(1.0);
            fit.weight_history.push_back(w);
            break;
        }
        if (err >= 0.5) {
            if (fit.model.trees.empty()) {
                fit.model.trees.push_back(std::move(tree));
                fit.model.alphas.push_back(0.0);
                fit.weight_history.push_back(w);
            }
            break;
        }
        const double alpha = 0.5 * std::log((1.0 - err) / err);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= std::exp(miss[i] ? alpha : -alpha);
            total += w[i];
        }
        for (double& v : w) v /= total;
        fit.model.trees.push_back(std::move(tree));
        fit.model.alphas.push_back(alpha);
        fit.weight_history.push_back(w);
    }
    return fit;
}

BaselineResult fit_predict(const BaselineSpec& spec, const Dataset& train, const Dataset& test) {
    const std::size_t pos = train.positives();
    if (pos == 0 || pos == train.rows())
        throw std::invalid_argument("fit_predict: training data contains a single class");
    if (test.cols() != train.cols()) throw std::invalid_argument("fit_predict: train/test feature count mismatch");

    BaselineResult res;
    auto score_all = [&](auto&& proba) {
        for (std::size_t i = 0; i < test.rows(); ++i) res.scores.push_back(proba(test.features.row(i)));
    };

    switch (spec.kind) {
        case BaselineKind::LR: {
            LogisticParams p;
            p.C = spec.C;
            auto m = fit_logistic(train, p);
            score_all([&](auto x) { return m.predict_proba(x); });
            break;
        }
        case BaselineKind::DT: {
            Rng rng(spec.seed);
            auto fit = trees::fit_gain_tree(train, {spec.max_depth, spec.min_samples, 0}, rng);
            score_all([&](auto x) { return fit.tree.predict_proba(x); });
            break;
        }
        case BaselineKind::RF: {
            trees::ForestParams p;
            p.n_trees = spec.n_estimators;
            p.tree = {spec.max_depth, spec.min_samples, 0};
            auto fit = trees::fit_random_forest(train, p, spec.seed);
            score_all([&](auto x) { return fit.forest.predict_proba(x); });
            break;
        }
        case BaselineKind::GBDT: {
            trees::GbdtParams p;
            p.n_trees = spec.n_estimators;
            p.max_depth = spec.max_depth;
            p.min_samples = spec.min_samples;
            p.shrinkage = spec.shrinkage;
            auto fit = trees::fit_gbdt(train, p, spec.seed);
            score_all([&](auto x) { return fit.model.predict_proba(x); });
            break;
        }
        case BaselineKind::AdaBoost: {
            auto fit = fit_adaboost(train, spec.n_estimators, spec.max_depth, spec.min_samples);
            score_all([&](auto x) { return fit.model.predict_proba(x); });
            break;
        }
        case BaselineKind::DNN: {
            TrainConfig tc = spec.train;
            tc.seed = spec.seed;
            auto dnn = make_baseline_dnn(train.cols(), spec.dnn, spec.seed);
            auto report = train_baseline_dnn(dnn, train, spec.monitor, tc);
            auto pred = predict(dnn.model, dnn.views, test.features);
            res.scores = pred.scores;
            res.report.epochs = static_cast<double>(report.epochs_run);
            res.report.best_epoch = static_cast<double>(report.best_epoch);
            break;
        }
    }
    for (double s : res.scores) res.labels.push_back(s >= 0.5 ? 1 : 0);
    const double epochs = res.report.epochs, best = res.report.best_epoch;
    res.report = metrics::evaluate(res.scores, test.labels, res.labels);
    res.report.epochs = epochs;
    res.report.best_epoch = best;
    return res;
}

}  // namespace tabattn
