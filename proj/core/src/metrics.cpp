#include "tabattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tabattn::metrics {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace

Confusion confusion(std::span<const int> labels, std::span<const int> preds) {
    check_lengths(labels.size(), preds.size(), "confusion");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual = labels[i] == 1, predicted = preds[i] == 1;
        if (actual && predicted) ++c.tp;
        else if (!actual && predicted) ++c.fp;
        else if (actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

PrecisionRecall precision_recall_f1(const Confusion& c, int positive_class) {
    // Swapping roles turns class 0 into the positive class.
    const std::size_t tp = positive_class == 1 ? c.tp : c.tn;
    const std::size_t fp = positive_class == 1 ? c.fp : c.fn;
    const std::size_t fn = positive_class == 1 ? c.fn : c.fp;
    PrecisionRecall r;
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    const double denom = r.precision + r.recall;
    r.f1 = denom > 0.0 ? 2.0 * r.precision * r.recall / denom : 0.0;
    return r;
}

double accuracy(const Confusion& c) { return ratio(c.tp + c.tn, c.total()); }

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size(), "auc");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Average ranks over tie groups, then the Mann-Whitney U statistic.
    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                pos_rank_sum += avg_rank;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0) return 0.5;
    const double dp = static_cast<double>(pos), dn = static_cast<double>(neg);
    return (pos_rank_sum - dp * (dp + 1.0) / 2.0) / (dp * dn);
}

double ks(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size(), "ks");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t pos = 0;
    for (int y : labels) pos += y == 1;
    const std::size_t neg = labels.size() - pos;
    // Walking down from the highest score, each tie group completes one threshold.
    std::size_t tp = 0, fp = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tp : fp) += 1;
            ++j;
        }
        best = std::max(best, ratio(tp, pos) - ratio(fp, neg));
        i = j;
    }
    return best;
}

MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, std::span<const int> preds) {
    const auto c = confusion(labels, preds);
    const auto p0 = precision_recall_f1(c, 0);
    const auto p1 = precision_recall_f1(c, 1);
    MetricsReport r;
    r.acc = accuracy(c);
    r.auc = auc(scores, labels);
    r.ks = ks(scores, labels);
    r.precision0 = p0.precision;
    r.recall0 = p0.recall;
    r.f1_0 = p0.f1;
    r.precision1 = p1.precision;
    r.recall1 = p1.recall;
    r.f1_1 = p1.f1;
    return r;
}

MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
    std::vector<int> preds(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] >= threshold ? 1 : 0;
    return evaluate(scores, labels, preds);
}

const std::vector<std::string>& field_names() {
    static const std::vector<std::string> names = {"acc",     "auc",        "ks",         "precision0",
                                                   "recall0", "f1_0",       "precision1", "recall1",
                                                   "f1_1",    "epochs",     "best_epoch"};
    return names;
}

std::vector<double> field_values(const MetricsReport& r) {
    return {r.acc,        r.auc,     r.ks,   r.precision0, r.recall0,   r.f1_0,
            r.precision1, r.recall1, r.f1_1, r.epochs,     r.best_epoch};
}

MetricsReport from_values(std::span<const double> v) {
    if (v.size() != field_names().size()) throw std::invalid_argument("from_values: wrong field count");
    MetricsReport r;
    r.acc = v[0];
    r.auc = v[1];
    r.ks = v[2];
    r.precision0 = v[3];
    r.recall0 = v[4];
    r.f1_0 = v[5];
    r.precision1 = v[6];
    r.recall1 = v[7];
    r.f1_1 = v[8];
    r.epochs = v[9];
    r.best_epoch = v[10];
    return r;
}

Aggregate aggregate(std::span<const MetricsReport> reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    const std::size_t fields = field_names().size();
    std::vector<double> mean(fields, 0.0), var(fields, 0.0);
    const double n = static_cast<double>(reports.size());
    for (const auto& r : reports) {
        auto v = field_values(r);
        for (std::size_t f = 0; f < fields; ++f) mean[f] += v[f];
    }
    for (double& m : mean) m /= n;
    for (const auto& r : reports) {
        auto v = field_values(r);
        for (std::size_t f = 0; f < fields; ++f) var[f] += (v[f] - mean[f]) * (v[f] - mean[f]);
    }
    for (double& s : var) s = std::sqrt(s / n);
    return {from_values(mean), from_values(var), reports.size()};
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = nlohmann::json::object();
    const auto& names = field_names();
    const auto values = field_values(r);
    for (std::size_t f = 0; f < names.size(); ++f) j[names[f]] = values[f];
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
    std::vector<double> values;
    for (const auto& name : field_names()) values.push_back(j.value(name, 0.0));
    r = from_values(values);
}

void to_json(nlohmann::json& j, const Aggregate& a) {
    j = {{"mean", a.mean}, {"std", a.std}, {"runs", a.runs}};
}

void from_json(const nlohmann::json& j, Aggregate& a) {
    a.mean = j.at("mean").get<MetricsReport>();
    a.std = j.at("std").get<MetricsReport>();
    a.runs = j.at("runs").get<std::size_t>();
}

std::string csv_header() {
    std::string out = "run";
    for (const auto& n : field_names()) out += "," + n;
    return out;
}

std::string csv_row(const std::string& key, const MetricsReport& r) {
    std::string out = key;
    char buf[40];
    for (double v : field_values(r)) {
        std::snprintf(buf, sizeof buf, ",%.10g", v);
        out += buf;
    }
    return out;
}

}  // namespace tabattn::metrics
