// tabattn: experiment driver.
//
//   tabattn prepare        --dataset data/statlog.csv
//   tabattn train          --config configs/statlog.conf
//   tabattn ablate-views   --config configs/statlog.conf
//   tabattn ablate-monitor --config configs/statlog.conf
//   tabattn baseline       --config configs/statlog.conf
//   tabattn report         results/ablate-monitor

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tabattn/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string dataset;
    std::string target;
    std::string seeds;
    std::string monitor;
    std::optional<std::size_t> views;
    bool no_attention = false;
    bool holdout = false;
    std::string variant;
    std::string out;
    std::optional<std::size_t> jobs;
    std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key=value experiment config file");
    cmd->add_option("--dataset", f.dataset, "CSV file or dataset cache");
    cmd->add_option("--target", f.target, "label column of the CSV (default: default)");
    cmd->add_option("--seeds", f.seeds, "seed list, e.g. 0-19 or 0,3,7");
    cmd->add_option("--monitor", f.monitor, "training monitor: f1, auc or acc")
        ->check(CLI::IsMember({"f1", "auc", "acc"}));
    cmd->add_option("--views", f.views, "number of local views (0-6)")->check(CLI::Range(0, 6));
    cmd->add_flag("--no-attention", f.no_attention, "feed the concatenated vector straight to the output head");
    cmd->add_flag("--holdout", f.holdout, "monitor on a stratified 20% slice of the training data");
    cmd->add_option("--variant", f.variant, "model variant: small or large")
        ->check(CLI::IsMember({"small", "large"}));
    cmd->add_option("--out", f.out, "output directory (default: results)");
    cmd->add_option("--jobs", f.jobs, "worker threads for the seed loop (0 = all cores)");
    cmd->add_option("--set", f.settings, "extra key=value config overrides")->take_all();
}

tabattn::ExperimentConfig resolve(const CommonFlags& f) {
    tabattn::ExperimentConfig c;
    if (!f.config.empty()) c = tabattn::load_config(f.config);
    for (const auto& kv : f.settings) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        tabattn::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!f.dataset.empty()) c.dataset = f.dataset;
    if (!f.target.empty()) c.target = f.target;
    if (!f.seeds.empty()) c.seeds = tabattn::parse_seed_list(f.seeds);
    if (!f.monitor.empty()) c.monitor = tabattn::monitor_from_string(f.monitor);
    if (f.views) c.views = *f.views;
    if (f.no_attention) c.attention = false;
    if (f.holdout) c.train.holdout = true;
    if (!f.variant.empty()) c.model.variant = tabattn::variant_from_string(f.variant);
    if (!f.out.empty()) c.out = f.out;
    if (f.jobs) c.jobs = *f.jobs;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tab-Attention experiment driver"};
    app.require_subcommand(1);

    CommonFlags prepare_flags, train_flags, views_flags, monitor_flags, baseline_flags;
    auto* prepare = app.add_subcommand("prepare", "preprocess a CSV, cache it and write the seed's view set");
    add_common(prepare, prepare_flags);
    auto* train = app.add_subcommand("train", "train and evaluate over every seed");
    add_common(train, train_flags);
    auto* ablate_views = app.add_subcommand("ablate-views", "evaluate with 0..6 local views");
    add_common(ablate_views, views_flags);
    auto* ablate_monitor =
        app.add_subcommand("ablate-monitor", "compare f1/AUC/Acc monitors and the no-attention variant");
    add_common(ablate_monitor, monitor_flags);
    auto* baseline = app.add_subcommand("baseline", "run the comparison models (LR, DT, RF, GBDT, AdaBoost, DNN)");
    add_common(baseline, baseline_flags);
    std::string kinds;
    baseline->add_option("--models", kinds, "comma-separated subset, e.g. lr,rf");
    auto* report = app.add_subcommand("report", "render report.md/report.csv for a results directory");
    std::string report_dir;
    report->add_option("dir", report_dir, "results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::path written;
        if (*prepare) {
            written = tabattn::cmd_prepare(resolve(prepare_flags));
        } else if (*train) {
            written = tabattn::cmd_train(resolve(train_flags));
        } else if (*ablate_views) {
            written = tabattn::cmd_ablate_views(resolve(views_flags));
        } else if (*ablate_monitor) {
            written = tabattn::cmd_ablate_monitor(resolve(monitor_flags));
        } else if (*baseline) {
            auto c = resolve(baseline_flags);
            if (!kinds.empty()) tabattn::apply_setting(c, "baselines", kinds);
            written = tabattn::cmd_baseline(c);
        } else if (*report) {
            written = tabattn::cmd_report(report_dir);
        }
        std::cout << "wrote " << written.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "tabattn: " << e.what() << '\n';
        return EXIT_FAILURE;
    }
    return EXIT_SUCCESS;
}
