#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tabattn/baselines.hpp"
#include "tabattn/data.hpp"
#include "tabattn/metrics.hpp"
#include "tabattn/model.hpp"
#include "tabattn/trainer.hpp"
#include "tabattn/views.hpp"

namespace tabattn {

// Everything one experiment command needs. Parsed from a flat key=value
// file; see apply_setting() for the keys.
struct ExperimentConfig {
    std::filesystem::path dataset;  // CSV, or a cache written by `prepare`
    std::string target = "default";
    std::vector<std::string> id_columns;
    std::optional<std::string> positive_label;
    double train_fraction = 0.8;
    bool stratified = true;

    std::vector<std::uint64_t> seeds = default_seeds();
    MonitorMetric monitor = MonitorMetric::F1Default;
    std::size_t views = 6;  // leading local views used; 0 is the plain DNN
    bool attention = true;

    ModelConfig model{};
    TrainConfig train{};
    ViewConfig view_config{};
    std::vector<BaselineKind> baselines = {BaselineKind::LR, BaselineKind::DT, BaselineKind::RF,
                                           BaselineKind::GBDT, BaselineKind::AdaBoost, BaselineKind::DNN};

    std::filesystem::path out = "results";
    std::size_t jobs = 0;  // 0 = hardware concurrency

    static std::vector<std::uint64_t> default_seeds();
};

// Applies one `key=value` setting; throws on unknown keys or bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// "0-19", "3", or "0,2,5".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

Dataset load_experiment_data(const ExperimentConfig& config);

struct SeedResult {
    std::uint64_t seed = 0;
    metrics::MetricsReport report;
    TrainReport train;
    ViewSet views;
};

// split -> views (training part) -> model -> train -> test metrics.
SeedResult run_seed(const Dataset& data, const ExperimentConfig& config, std::uint64_t seed);
SeedResult run_baseline_seed(const Dataset& data, const ExperimentConfig& config, BaselineKind kind,
                             std::uint64_t seed);

// Runs `fn(seed)` for every configured seed on `config.jobs` threads;
// results keep seed order.
std::vector<SeedResult> run_seeds(const ExperimentConfig& config,
                                  const std::function<SeedResult(std::uint64_t)>& fn);

// Writes <dir>/<seed>.json, aggregate.csv, aggregate.json and report.md.
metrics::Aggregate write_results(const std::filesystem::path& dir, const std::string& label,
                                 const std::vector<SeedResult>& results);

struct ReportColumn {
    std::string name;
    metrics::Aggregate aggregate;
};

// Metric rows x configuration columns with "mean ± std" cells.
std::string render_markdown_table(const std::vector<ReportColumn>& columns);
std::string render_csv_table(const std::vector<ReportColumn>& columns);

std::filesystem::path cmd_prepare(const ExperimentConfig& config);
std::filesystem::path cmd_train(const ExperimentConfig& config);
std::filesystem::path cmd_ablate_views(const ExperimentConfig& config);
std::filesystem::path cmd_ablate_monitor(const ExperimentConfig& config);
std::filesystem::path cmd_baseline(const ExperimentConfig& config);
// Renders report.md/report.csv for a results directory; throws without
// writing anything when it holds no results.
std::filesystem::path cmd_report(const std::filesystem::path& dir);

// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace tabattn
