#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "tabattn/baselines.hpp"

using namespace tabattn;

namespace {

const BaselineKind kAll[] = {BaselineKind::LR, BaselineKind::DT, BaselineKind::RF, BaselineKind::GBDT,
                             BaselineKind::AdaBoost, BaselineKind::DNN};

BaselineSpec spec_for(BaselineKind k, std::uint64_t seed = 0) {
    BaselineSpec s;
    s.kind = k;
    s.seed = seed;
    s.n_estimators = 10;
    s.train.max_epochs = 8;
    s.dnn.global_hidden = 8;
    s.dnn.global_embed = 4;
    return s;
}

}  // namespace

TEST_CASE("baseline names") {
    for (auto k : kAll) CHECK(baseline_from_string(to_string(k)) == k);
    CHECK_THROWS(baseline_from_string("xgboost"));
}

TEST_CASE("every baseline is deterministic and scores in [0,1]") {
    auto d = oracle::synthetic(400, 5, 14, 2, 0.15);
    auto [train, test] = split(d, {0, 0.75, true});
    for (auto k : kAll) {
        INFO(to_string(k));
        auto a = fit_predict(spec_for(k, 3), train, test);
        auto b = fit_predict(spec_for(k, 3), train, test);
        CHECK(a.scores == b.scores);
        CHECK(a.scores.size() == test.rows());
        for (double s : a.scores) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        CHECK(a.report.auc > 0.6);
    }
}

TEST_CASE("deep tree fits separable training data") {
    auto d = oracle::synthetic(80, 3, 2, 2, 0.0);
    d.labels[0] = d.features(0, 0) + d.features(0, 1) > 1.0;
    d.labels[1] = d.features(1, 0) + d.features(1, 1) > 1.0;
    auto r = fit_predict(spec_for(BaselineKind::DT), d, d);
    CHECK(r.report.acc == 1.0);
}

TEST_CASE("adaboost weights stay a distribution") {
    auto d = oracle::synthetic(90, 4, 33, 2, 0.2);
    auto fit = fit_adaboost(d, 15, 2, 2);
    CHECK(!fit.weight_history.empty());
    for (const auto& w : fit.weight_history) {
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        CHECK(std::abs(s - 1.0) <= 1e-9);
        for (double v : w) CHECK(v > 0.0);
    }
    CHECK(fit.model.trees.size() == fit.model.alphas.size());
    for (double a : fit.model.alphas) CHECK(a > 0.0);
}

TEST_CASE("adaboost stops on a perfect learner") {
    auto d = oracle::synthetic(40, 2, 3, 1, 0.0);
    d.labels[0] = d.features(0, 0) > 0.5;
    d.labels[1] = d.features(1, 0) > 0.5;
    auto fit = fit_adaboost(d, 50, 3, 2);
    CHECK(fit.model.trees.size() == 1);
    CHECK(fit.model.alphas[0] == 1.0);
}

TEST_CASE("single-class training data is rejected") {
    auto d = oracle::synthetic(30, 3, 1);
    std::fill(d.labels.begin(), d.labels.end(), 1);
    for (auto k : kAll) CHECK_THROWS(fit_predict(spec_for(k), d, d));
}

TEST_CASE("logistic baseline on statlog is in a sensible regime") {
    auto data = preprocess(load_csv(oracle::data_file("statlog.csv"), "default"));
    auto [train, test] = split(data, {0, 0.8, true});
    auto r = fit_predict(spec_for(BaselineKind::LR), train, test);
    CHECK(r.report.auc > 0.7);
    CHECK(r.report.acc > 0.65);
}
