// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tabattn/experiment.hpp"
#include "tabattn/metrics.hpp"
#include "tabattn/model.hpp"
#include "tabattn/nn.hpp"
#include "tabattn/trees.hpp"
#include "tabattn/views.hpp"

using namespace tabattn;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kMetricTol = 1e-9;
constexpr double kGainTol = 1e-12;
constexpr double kTableTol = 0.06;
constexpr double kEpochRatio = 0.75;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

// Random local views of six indices over `cols` features.
ViewSet random_views(std::size_t cols, std::uint64_t seed) {
    Rng rng(seed, 0xa11);
    ViewSet vs;
    vs.global.strategy = Strategy::GLOBAL;
    vs.global.indices.resize(cols);
    std::iota(vs.global.indices.begin(), vs.global.indices.end(), 0);
    const Strategy tags[] = {Strategy::DT, Strategy::GBDT, Strategy::RF, Strategy::LR, Strategy::KMEANS,
                             Strategy::PEARSON};
    for (auto tag : tags) {
        std::vector<std::size_t> all = vs.global.indices;
        rng.shuffle(all);
        all.resize(6);
        std::sort(all.begin(), all.end());
        vs.locals.push_back({tag, all});
    }
    return vs;
}

Outcome gradients() {
    double worst = 0.0;
    std::size_t checked = 0;
    std::string where;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = oracle::synthetic(16, 20, seed, 3, 0.2);
        const auto vs = random_views(20, seed);
        ModelConfig mc;
        mc.aux_loss_weight = 0.7;
        Model m = init_model(vs, mc, seed);
        // Move biases and norm parameters off their initial constants.
        Rng rng(seed, 99);
        for (auto& p : m.parameters())
            if (p.name.find(".bias") != std::string::npos || p.name.find("norm") != std::string::npos)
                for (double& v : p.value) v += rng.uniform(-0.3, 0.3);
        auto fn = [&](bool grad) {
            auto out = forward(m, vs, d.features);
            auto g = loss(out.local_preds, out.final_pred, d.labels, m.config.aux_loss_weight);
            if (grad) {
                m.zero_grad();
                backward(m, out.trace, g);
            }
            return g.total;
        };
        auto params = m.parameters();
        const auto r = oracle::finite_difference(fn, params);
        checked += r.checked;
        if (r.max_relative_error > worst) {
            worst = r.max_relative_error;
            where = r.worst;
        }
    }
    return {worst < kGradTol, "max relative error " + fmt("%.3g", worst) + " at " + where + " over " +
                                  std::to_string(checked) + " parameters, tol 1e-4"};
}

Outcome metric_oracles() {
    Rng rng(2024, 0xacc);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const bool coarse = trial % 2 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse ? static_cast<double>(rng.below(10)) / 9.0 : rng.uniform();
            y[i] = rng.uniform() < 0.3 ? 1 : 0;
        }
        // Both classes present.
        const std::size_t i = rng.below(n);
        y[i] = 1;
        y[(i + 1) % n] = 0;
        worst = std::max(worst, std::abs(metrics::auc(s, y) - oracle::auc(s, y)));
        worst = std::max(worst, std::abs(metrics::ks(s, y) - oracle::ks(s, y)));
    }
    return {worst <= kMetricTol, "max deviation " + fmt("%.3g", worst) + " over 100 score sets, tol 1e-9"};
}

Outcome importance_oracle() {
    std::size_t nodes = 0, mismatches = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng gen(seed, 0x7ee);
        Dataset d;
        d.features = Matrix(32, 4);
        for (std::size_t r = 0; r < 32; ++r) {
            for (std::size_t c = 0; c < 4; ++c)
                d.features(r, c) = seed % 2 == 0 ? static_cast<double>(gen.below(5)) / 4.0 : gen.uniform();
            int y = d.features(r, 0) + 0.5 * d.features(r, 1) > 0.7 ? 1 : 0;
            if (gen.uniform() < 0.2) y = 1 - y;
            d.labels.push_back(y);
        }
        d.feature_names = {"a", "b", "c", "d"};
        Rng rng(seed);
        const auto fit = trees::fit_gain_tree(d, {}, rng);
        const auto ref = oracle::build_tree(d.features, d.labels, 10, 2);
        if (fit.tree.nodes.size() != ref.nodes.size()) {
            ++mismatches;
            continue;
        }
        for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
            const auto& a = fit.tree.nodes[i];
            const auto& b = ref.nodes[i];
            ++nodes;
            if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
                a.label != b.label || a.weight != b.weight || std::abs(a.gain - b.gain) > kGainTol)
                ++mismatches;
        }
        for (std::size_t f = 0; f < 4; ++f)
            if (std::abs(fit.importance[f] - ref.importance[f]) > kGainTol) ++mismatches;
    }
    return {mismatches == 0, std::to_string(nodes) + " nodes compared, " + std::to_string(mismatches) + " mismatches"};
}

struct Target {
    const char* name;
    double metrics::MetricsReport::*field;
    double value;
};

Outcome reproduction(const metrics::Aggregate& agg, const std::vector<double>& target) {
    const Target targets[] = {{"Acc", &metrics::MetricsReport::acc, target[0]},
                              {"AUC", &metrics::MetricsReport::auc, target[1]},
                              {"KS", &metrics::MetricsReport::ks, target[2]},
                              {"P1", &metrics::MetricsReport::precision1, target[3]},
                              {"R1", &metrics::MetricsReport::recall1, target[4]},
                              {"f1_1", &metrics::MetricsReport::f1_1, target[5]}};
    bool ok = true;
    std::string detail;
    for (const auto& t : targets) {
        const double got = agg.mean.*t.field;
        const bool in = std::abs(got - t.value) <= kTableTol;
        ok = ok && in;
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s%s %.4f vs %.2f%s", detail.empty() ? "" : ", ", t.name, got, t.value,
                      in ? "" : " OUT");
        detail += buf;
    }
    return {ok, detail + " (tol 0.06, " + std::to_string(agg.runs) + " seeds)"};
}

metrics::Aggregate aggregate_of(const std::vector<SeedResult>& rs) {
    std::vector<metrics::MetricsReport> reports;
    for (const auto& r : rs) reports.push_back(r.report);
    return metrics::aggregate(reports);
}

// Invariant checks; returns the number of violated cases.
std::size_t invariants(const std::vector<SeedResult>& trained, std::string& detail) {
    std::size_t bad = 0;

    std::size_t pearson_bad = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto d = oracle::synthetic(60, 6, seed, 2, 0.2);
        const auto base = pearson_importance(d).scores;
        Rng rng(seed, 11);
        auto moved = d;
        for (std::size_t c = 0; c < d.cols(); ++c) {
            const double a = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 20.0);
            const double b = rng.uniform(-5.0, 5.0);
            for (std::size_t r = 0; r < d.rows(); ++r) moved.features(r, c) = a * d.features(r, c) + b;
        }
        const auto after = pearson_importance(moved).scores;
        for (std::size_t c = 0; c < base.size(); ++c)
            if (std::abs(after[c] - base[c]) > 1e-9 * std::max(1.0, base[c])) ++pearson_bad;
        if (top_fraction(pearson_importance(d)).indices != top_fraction(pearson_importance(moved)).indices) ++pearson_bad;
    }

    std::size_t softmax_bad = 0;
    Rng srng(5, 0x50f);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix x(1 + srng.below(6), 1 + srng.below(15));
        for (auto& v : x.values()) v = srng.uniform(-30.0, 30.0);
        const auto s = nn::softmax_rows(x);
        for (std::size_t r = 0; r < s.rows(); ++r) {
            double sum = 0.0;
            for (double v : s.row(r)) {
                if (v < 0.0 || v > 1.0) ++softmax_bad;
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12) ++softmax_bad;
        }
    }

    std::size_t lr_bad = 0;
    for (const auto& r : trained) {
        const auto& h = r.train.history;
        if (h.empty() || h.front().lr != TrainConfig{}.initial_lr) ++lr_bad;
        std::size_t drops = 0;
        for (std::size_t i = 1; i < h.size(); ++i) {
            if (h[i].lr == h[i - 1].lr) continue;
            ++drops;
            if (h[i].lr != h[i - 1].lr * TrainConfig{}.lr_factor) ++lr_bad;
        }
        if (drops != r.train.lr_reductions) ++lr_bad;
    }

    std::size_t gain_bad = 0;
    Rng grng(8, 0x9a1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + grng.below(60);
        std::vector<int> y(n), branch(n);
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = grng.uniform() < 0.4 ? 1 : 0;
            x[i] = grng.uniform();
            branch[i] = static_cast<int>(grng.below(3));
        }
        const double h = trees::entropy(y);
        const double g = trees::info_gain(y, branch);
        const double gt = trees::info_gain(x, y, grng.uniform());
        if (h < 0.0 || h > 1.0 + 1e-12) ++gain_bad;
        if (g < -1e-12 || g > h + 1e-12) ++gain_bad;
        if (gt < -1e-12 || gt > h + 1e-12) ++gain_bad;
    }

    std::size_t auc_bad = 0;
    Rng arng(17, 0xa0c);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + arng.below(150);
        std::vector<double> s(n), neg(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial % 2 == 0 ? static_cast<double>(arng.below(8)) : arng.uniform();
            neg[i] = -s[i];
            y[i] = arng.uniform() < 0.3 ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        if (std::abs(metrics::auc(s, y) + metrics::auc(neg, y) - 1.0) > 1e-12) ++auc_bad;
    }

    bad = pearson_bad + softmax_bad + lr_bad + gain_bad + auc_bad;
    detail = "pearson " + std::to_string(pearson_bad) + ", softmax " + std::to_string(softmax_bad) + ", lr " +
             std::to_string(lr_bad) + " (" + std::to_string(trained.size()) + " trained runs), gain " +
             std::to_string(gain_bad) + ", auc complement " + std::to_string(auc_bad) + " violations";
    return bad;
}

}  // namespace

int main() {
    report(1, "gradient check", gradients);
    report(2, "auc/ks oracles", metric_oracles);
    report(3, "tree importance oracle", importance_oracle);

    ExperimentConfig statlog;
    statlog.dataset = oracle::data_file("statlog.csv");
    ExperimentConfig german = statlog;
    german.dataset = oracle::data_file("south_german.csv");

    std::vector<SeedResult> full, by_acc, no_views, no_attention;
    auto run = [](const ExperimentConfig& c) {
        const auto data = load_experiment_data(c);
        return run_seeds(c, [&](std::uint64_t s) { return run_seed(data, c, s); });
    };

    report(4, "statlog reproduction", [&] {
        full = run(statlog);
        return reproduction(aggregate_of(full), {0.75, 0.77, 0.46, 0.60, 0.55, 0.57});
    });
    report(5, "south german reproduction", [&] {
        return reproduction(aggregate_of(run(german)), {0.75, 0.75, 0.43, 0.60, 0.50, 0.54});
    });
    report(6, "monitor ablation epochs", [&] {
        ExperimentConfig c = statlog;
        c.monitor = MonitorMetric::Acc;
        by_acc = run(c);
        const double f1 = aggregate_of(full).mean.epochs, acc = aggregate_of(by_acc).mean.epochs;
        const bool ok = !full.empty() && f1 <= kEpochRatio * acc;
        return Outcome{ok, "f1 " + fmt("%.2f", f1) + " vs acc " + fmt("%.2f", acc) + " epochs, ratio " +
                               fmt("%.3f", f1 / acc) + ", need <= 0.75"};
    });
    report(7, "view ablation ks", [&] {
        ExperimentConfig c = statlog;
        c.views = 0;
        no_views = run(c);
        const double six = aggregate_of(full).mean.ks, zero = aggregate_of(no_views).mean.ks;
        return Outcome{!full.empty() && six > zero,
                       "ks 6 views " + fmt("%.4f", six) + " vs 0 views " + fmt("%.4f", zero) + ", delta " +
                           fmt("%+.4f", six - zero)};
    });
    report(8, "attention ablation recall", [&] {
        ExperimentConfig c = statlog;
        c.attention = false;
        no_attention = run(c);
        const double with = aggregate_of(full).mean.recall1, without = aggregate_of(no_attention).mean.recall1;
        return Outcome{!full.empty() && with >= without,
                       "recall1 full " + fmt("%.4f", with) + " vs no attention " + fmt("%.4f", without) +
                           ", delta " + fmt("%+.4f", with - without)};
    });
    report(9, "invariant suite", [&] {
        std::vector<SeedResult> trained = full;
        trained.insert(trained.end(), by_acc.begin(), by_acc.end());
        std::string detail;
        const auto bad = invariants(trained, detail);
        return Outcome{bad == 0 && !trained.empty(), detail};
    });

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
