#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "tabattn/trainer.hpp"

using namespace tabattn;

namespace {

ModelConfig tiny() {
    ModelConfig c;
    c.local_hidden1 = 6;
    c.local_hidden2 = 4;
    c.global_hidden = 8;
    c.global_embed = 3;
    return c;
}

struct Replay {
    std::vector<double> lr;
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
    StopReason stop = StopReason::MaxEpochs;
};

// The schedule rules applied to a recorded monitor trace.
Replay replay(const std::vector<double>& scores, const TrainConfig& c) {
    Replay r;
    double lr = c.initial_lr, best = -std::numeric_limits<double>::infinity();
    std::size_t stagnant = 0;
    for (std::size_t e = 0; e < scores.size() && e < c.max_epochs; ++e) {
        r.lr.push_back(lr);
        ++r.epochs;
        if (scores[e] > best) {
            best = scores[e];
            stagnant = 0;
            r.best_epoch = e + 1;
        } else if (++stagnant == c.patience_lr) {
            lr *= c.lr_factor;
        }
        if (stagnant >= c.patience_stop) {
            r.stop = StopReason::Stagnation;
            break;
        }
    }
    return r;
}

void check_schedule(const TrainReport& rep, const TrainConfig& c) {
    std::vector<double> scores;
    for (const auto& e : rep.history) scores.push_back(e.monitor);
    auto r = replay(scores, c);
    CHECK(r.epochs == rep.epochs_run);
    CHECK(r.best_epoch == rep.best_epoch);
    CHECK(r.stop == rep.stop_reason);
    for (std::size_t i = 0; i < r.lr.size(); ++i) CHECK(r.lr[i] == rep.history[i].lr);
    for (std::size_t i = 1; i < rep.history.size(); ++i) {
        const double a = rep.history[i - 1].lr, b = rep.history[i].lr;
        CHECK((b == a || b == a * c.lr_factor));
        CHECK(rep.best_history[i] >= rep.best_history[i - 1]);
    }
    CHECK(rep.epochs_run <= c.max_epochs);
}

}  // namespace

TEST_CASE("monitor names") {
    CHECK(monitor_from_string("f1") == MonitorMetric::F1Default);
    CHECK(monitor_from_string("auc") == MonitorMetric::Auc);
    CHECK(monitor_from_string("acc") == MonitorMetric::Acc);
    CHECK(to_string(MonitorMetric::Auc) == "auc");
    CHECK_THROWS(monitor_from_string("loss"));
}

TEST_CASE("schedule follows the stagnation rules for every monitor") {
    auto d = oracle::synthetic(90, 8, 3, 3, 0.25);
    auto vs = build_view_set(d, {}, 0);
    for (auto mon : {MonitorMetric::F1Default, MonitorMetric::Auc, MonitorMetric::Acc}) {
        auto m = init_model(vs, tiny(), 1);
        TrainConfig c;
        c.max_epochs = 60;
        c.seed = 4;
        auto rep = train(m, vs, d, mon, c);
        check_schedule(rep, c);
        // The kept parameters reproduce the best score.
        CHECK(std::abs(monitor_score(m, vs, d, mon) - rep.best_score) <= 1e-12);
        CHECK(rep.monitor == mon);
    }
}

TEST_CASE("perfect first epoch stops after 20 stagnant epochs with epoch-1 parameters") {
    Dataset d = oracle::synthetic(120, 4, 8, 1, 0.0);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        d.labels[r] = d.features(r, 0) > 0.5 ? 1 : 0;
        d.features(r, 0) = d.labels[r];
    }
    auto vs = build_view_set(d, {}, 0);
    TrainConfig c;
    c.initial_lr = 0.05;
    c.batch_size = 10;
    c.seed = 2;
    auto m = init_model(vs, tiny(), 2);
    auto rep = train(m, vs, d, MonitorMetric::F1Default, c);
    REQUIRE(rep.history.front().monitor == 1.0);
    CHECK(rep.best_epoch == 1);
    CHECK(rep.epochs_run == 21);
    CHECK(rep.lr_reductions == 1);
    CHECK(rep.stop_reason == StopReason::Stagnation);
    // Epochs 2..11 stagnate, so epoch 12 is the first at the reduced rate.
    CHECK(rep.history[10].lr == 0.05);
    CHECK(rep.history[11].lr == doctest::Approx(0.005).epsilon(1e-15));

    TrainConfig one = c;
    one.max_epochs = 1;
    auto m1 = init_model(vs, tiny(), 2);
    auto rep1 = train(m1, vs, d, MonitorMetric::F1Default, one);
    CHECK(rep1.stop_reason == StopReason::MaxEpochs);
    auto a = m.parameters();
    auto b = m1.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::equal(a[i].value.begin(), a[i].value.end(), b[i].value.begin()));
}

TEST_CASE("training is bit-reproducible") {
    auto d = oracle::synthetic(70, 6, 5, 2, 0.2);
    auto vs = build_view_set(d, {}, 1);
    TrainConfig c;
    c.max_epochs = 15;
    c.holdout = true;
    auto m1 = init_model(vs, tiny(), 7);
    auto m2 = init_model(vs, tiny(), 7);
    auto r1 = train(m1, vs, d, MonitorMetric::F1Default, c);
    auto r2 = train(m2, vs, d, MonitorMetric::F1Default, c);
    CHECK(nlohmann::json(r1).dump() == nlohmann::json(r2).dump());
    CHECK(forward(m1, vs, d.features).final_pred == forward(m2, vs, d.features).final_pred);
}

TEST_CASE("train report json") {
    auto d = oracle::synthetic(40, 5, 6);
    auto vs = build_view_set(d, {}, 1);
    auto m = init_model(vs, tiny(), 1);
    TrainConfig c;
    c.max_epochs = 3;
    auto rep = train(m, vs, d, MonitorMetric::Acc, c);
    nlohmann::json j = rep;
    CHECK(j["loss"].size() == 3);
    CHECK(j["monitor_score"].size() == 3);
    CHECK(j["lr"].size() == 3);
    CHECK(j["epochs_run"] == 3);
    CHECK(j["stop_reason"] == "max_epochs");
    CHECK(j["monitor"] == "acc");
}

TEST_CASE("train rejects bad inputs") {
    auto d = oracle::synthetic(30, 5, 6);
    auto vs = build_view_set(d, {}, 1);
    auto m = init_model(vs, tiny(), 1);
    TrainConfig c;
    c.patience_stop = 10;
    CHECK_THROWS(train(m, vs, d, MonitorMetric::F1Default, c));
    Dataset single = d;
    std::fill(single.labels.begin(), single.labels.end(), 0);
    CHECK_THROWS(train(m, vs, single, MonitorMetric::F1Default, TrainConfig{}));
}

TEST_CASE("f1 monitor is zero when nothing is predicted positive") {
    auto d = oracle::synthetic(30, 5, 6);
    auto vs = build_view_set(d, {}, 1);
    auto m = init_model(vs, tiny(), 1);
    m.head.weight.fill(0.0);
    m.head.bias[0] = -50.0;
    if (m.config.attention) {
        m.value.weight.fill(0.0);
    }
    CHECK(monitor_score(m, vs, d, MonitorMetric::F1Default) == 0.0);
}

TEST_CASE("baseline dnn trains under the same schedule") {
    auto d = oracle::synthetic(60, 6, 9, 2, 0.1);
    auto dnn = make_baseline_dnn(6, tiny(), 2);
    TrainConfig c;
    c.max_epochs = 40;
    auto rep = train_baseline_dnn(dnn, d, MonitorMetric::F1Default, c);
    check_schedule(rep, c);
    CHECK(std::abs(monitor_score(dnn.model, dnn.views, d, MonitorMetric::F1Default) - rep.best_score) <= 1e-12);
}
