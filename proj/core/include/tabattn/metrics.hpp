#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tabattn::metrics {

// Class 1 (default) is the positive class.
struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

Confusion confusion(std::span<const int> labels, std::span<const int> preds);

// Scores for `positive_class` (0 or 1); any 0/0 ratio is reported as 0.
PrecisionRecall precision_recall_f1(const Confusion& c, int positive_class = 1);

double accuracy(const Confusion& c);

// Mann-Whitney AUC, ties counted as one half.
double auc(std::span<const double> scores, std::span<const int> labels);

// max(TPR - FPR) over the thresholds "score >= t" for every distinct score.
double ks(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
    double acc = 0.0, auc = 0.0, ks = 0.0;
    double precision0 = 0.0, recall0 = 0.0, f1_0 = 0.0;
    double precision1 = 0.0, recall1 = 0.0, f1_1 = 0.0;
    // Total epochs run, and the epoch whose parameters were kept.
    double epochs = 0.0;
    double best_epoch = 0.0;
};

// Threshold-0.5 labels are derived from `scores` unless given explicitly.
MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, std::span<const int> preds);
MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

// Field names in report order, shared by the CSV and table writers.
const std::vector<std::string>& field_names();
std::vector<double> field_values(const MetricsReport& r);
MetricsReport from_values(std::span<const double> values);

struct Aggregate {
    MetricsReport mean;
    MetricsReport std;  // population standard deviation
    std::size_t runs = 0;
};

Aggregate aggregate(std::span<const MetricsReport> reports);

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);
void to_json(nlohmann::json& j, const Aggregate& a);
void from_json(const nlohmann::json& j, Aggregate& a);

std::string csv_header();
std::string csv_row(const std::string& key, const MetricsReport& r);

}  // namespace tabattn::metrics
