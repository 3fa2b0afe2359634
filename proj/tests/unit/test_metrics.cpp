#include <cmath>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "tabattn/metrics.hpp"

using namespace tabattn;
using namespace tabattn::metrics;

TEST_CASE("confusion counts") {
    std::vector<int> y{1, 1, 0, 0};
    std::vector<int> p{1, 0, 1, 0};
    auto c = confusion(y, p);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);
    CHECK(c.tn == 1);
    auto perfect = confusion(y, y);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);
    std::vector<int> zeros(4, 0);
    auto none = confusion(y, zeros);
    CHECK(none.tp == 0);
    CHECK(none.fp == 0);
}

TEST_CASE("precision recall f1 and zero conventions") {
    Confusion half{1, 1, 1, 1};
    auto pr = precision_recall_f1(half);
    CHECK(pr.precision == 0.5);
    CHECK(pr.recall == 0.5);
    CHECK(pr.f1 == 0.5);

    Confusion missed{0, 3, 5, 2};
    CHECK(precision_recall_f1(missed).precision == 0.0);
    CHECK(precision_recall_f1(missed).f1 == 0.0);

    Confusion empty{0, 0, 4, 0};
    CHECK(precision_recall_f1(empty).f1 == 0.0);
    CHECK(precision_recall_f1(empty, 0).precision == 1.0);

    // Class-0 view swaps the roles: tp0 = tn, fp0 = fn.
    Confusion c{6, 4, 7, 3};
    auto zero = precision_recall_f1(c, 0);
    CHECK(zero.precision == doctest::Approx(7.0 / 10.0));
    CHECK(zero.recall == doctest::Approx(7.0 / 11.0));
    CHECK(accuracy(c) == doctest::Approx(13.0 / 20.0));

    // Precision 0.60 and recall 0.55 give f1 0.574.
    const double f1 = 2 * 0.6 * 0.55 / (0.6 + 0.55);
    CHECK(f1 == doctest::Approx(0.574).epsilon(1e-3));
}

TEST_CASE("auc and ks hand cases") {
    std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    std::vector<int> y{0, 0, 1, 1};
    CHECK(auc(s, y) == 0.75);
    CHECK(oracle::auc(s, y) == 0.75);
    CHECK(ks(s, y) == 0.5);
    CHECK(oracle::ks(s, y) == 0.5);

    std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
    CHECK(auc(sep, y) == 1.0);
    CHECK(ks(sep, y) == 1.0);

    std::vector<double> flat(4, 0.3);
    CHECK(auc(flat, y) == 0.5);
    CHECK(ks(flat, y) == 0.0);

    std::vector<int> one_class{1, 1, 1, 1};
    CHECK(auc(s, one_class) == 0.5);
}

TEST_CASE("auc and ks agree with the brute-force oracles") {
    tabattn::Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(150);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse scores to force ties.
            s[i] = static_cast<double>(rng.below(12)) / 11.0;
            y[i] = rng.uniform() < 0.35 ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(std::abs(auc(s, y) - oracle::auc(s, y)) <= 1e-9);
        CHECK(std::abs(ks(s, y) - oracle::ks(s, y)) <= 1e-9);
    }
}

TEST_CASE("evaluate builds a full report") {
    std::vector<double> s{0.9, 0.2, 0.6, 0.4, 0.5};
    std::vector<int> y{1, 0, 0, 1, 1};
    auto r = evaluate(s, y);
    // Labels at 0.5: [1,0,1,0,1].
    CHECK(r.acc == doctest::Approx(0.6));
    CHECK(r.precision1 == doctest::Approx(2.0 / 3.0));
    CHECK(r.recall1 == doctest::Approx(2.0 / 3.0));
    CHECK(r.precision0 == doctest::Approx(0.5));
    CHECK(r.recall0 == doctest::Approx(0.5));
    CHECK(r.auc == oracle::auc(s, y));
    CHECK(r.ks == oracle::ks(s, y));
}

TEST_CASE("aggregate uses the population standard deviation") {
    MetricsReport a, b;
    a.acc = 0.4;
    b.acc = 0.6;
    std::vector<MetricsReport> two{a, b};
    auto agg = aggregate(two);
    CHECK(agg.mean.acc == doctest::Approx(0.5));
    CHECK(agg.std.acc == doctest::Approx(0.1));
    CHECK(agg.runs == 2);

    std::vector<MetricsReport> one{a};
    CHECK(aggregate(one).std.acc == 0.0);
    std::vector<MetricsReport> same{a, a};
    CHECK(aggregate(same).std.acc == 0.0);
    CHECK(aggregate(same).mean.acc == 0.4);
}

TEST_CASE("report serialisation") {
    MetricsReport r;
    r.acc = 0.75;
    r.auc = 0.5;
    r.f1_1 = 1.0 / 3.0;
    r.epochs = 56;
    nlohmann::json j = r;
    CHECK(j.get<MetricsReport>().f1_1 == r.f1_1);
    auto values = field_values(r);
    CHECK(values.size() == field_names().size());
    CHECK(from_values(values).epochs == 56);
    CHECK(csv_header().rfind("run,", 0) == 0);
    CHECK(csv_row("0", r).rfind("0,0.75,", 0) == 0);

    std::vector<MetricsReport> rs{r, r};
    nlohmann::json ja = aggregate(rs);
    CHECK(ja.get<Aggregate>().mean.acc == 0.75);
}
