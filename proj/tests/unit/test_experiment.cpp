#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "tabattn/experiment.hpp"

using namespace tabattn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tabattn_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig quick(const fs::path& out) {
    ExperimentConfig c;
    c.dataset = oracle::data_file("statlog.csv");
    c.seeds = {0};
    c.jobs = 1;
    c.out = out;
    c.train.max_epochs = 3;
    c.model.local_hidden1 = 8;
    c.model.local_hidden2 = 4;
    c.model.global_hidden = 8;
    return c;
}

metrics::Aggregate fixture(double acc) {
    metrics::MetricsReport r;
    r.acc = acc;
    r.auc = 0.77;
    r.ks = 0.46;
    r.epochs = 56;
    std::vector<metrics::MetricsReport> rs{r};
    return metrics::aggregate(rs);
}

}  // namespace

TEST_CASE("seed lists") {
    CHECK(parse_seed_list("0-3") == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(parse_seed_list("5") == std::vector<std::uint64_t>{5});
    CHECK(parse_seed_list("0,2,7") == std::vector<std::uint64_t>{0, 2, 7});
    CHECK_THROWS(parse_seed_list(""));
    CHECK_THROWS(parse_seed_list("3-1"));
    CHECK_THROWS(parse_seed_list("a"));
    CHECK(ExperimentConfig::default_seeds().size() == 20);
}

TEST_CASE("config file parsing") {
    std::istringstream in(R"(# statlog
dataset = data/statlog.csv
target=default
seeds=0-4
monitor = acc
views=3
attention=false
variant=large
lambda=0.5
batch_size=30
initial_lr=0.02
holdout=true
id_columns=id,row
baselines=lr,rf
)");
    auto c = parse_config(in);
    CHECK(c.dataset == "data/statlog.csv");
    CHECK(c.seeds.size() == 5);
    CHECK(c.monitor == MonitorMetric::Acc);
    CHECK(c.views == 3);
    CHECK_FALSE(c.attention);
    CHECK(c.model.variant == Variant::Large);
    CHECK(c.model.aux_loss_weight == 0.5);
    CHECK(c.train.batch_size == 30);
    CHECK(c.train.initial_lr == 0.02);
    CHECK(c.train.holdout);
    CHECK(c.id_columns == std::vector<std::string>{"id", "row"});
    CHECK(c.baselines == std::vector<BaselineKind>{BaselineKind::LR, BaselineKind::RF});
}

TEST_CASE("config defaults and errors") {
    ExperimentConfig c;
    CHECK(c.train.batch_size == 30);
    CHECK(c.train.initial_lr == 0.01);
    CHECK(c.views == 6);
    CHECK(c.monitor == MonitorMetric::F1Default);
    CHECK_THROWS(apply_setting(c, "no_such_key", "1"));
    CHECK_THROWS(apply_setting(c, "views", "7"));
    CHECK_THROWS(apply_setting(c, "batch_size", "-3"));
    CHECK_THROWS(apply_setting(c, "monitor", "loss"));
    std::istringstream bad("just a line\n");
    CHECK_THROWS(parse_config(bad));
    CHECK_THROWS(load_config("/no/such/file.conf"));
    ExperimentConfig none;
    CHECK_THROWS(load_experiment_data(none));
}

TEST_CASE("a seed gives the same result alone and inside a batch") {
    auto c = quick(scratch("iso"));
    auto data = load_experiment_data(c);
    auto alone = run_seed(data, c, 2);
    c.seeds = {0, 1, 2, 3};
    c.jobs = 2;
    auto batch = run_seeds(c, [&](std::uint64_t s) { return run_seed(data, c, s); });
    REQUIRE(batch.size() == 4);
    CHECK(batch[2].seed == 2);
    CHECK(metrics::field_values(batch[2].report) == metrics::field_values(alone.report));
}

TEST_CASE("zero views equals the dnn baseline") {
    auto c = quick(scratch("v0"));
    c.views = 0;
    auto data = load_experiment_data(c);
    for (std::uint64_t seed : {0, 1}) {
        auto a = run_seed(data, c, seed);
        auto b = run_baseline_seed(data, c, BaselineKind::DNN, seed);
        CHECK(metrics::field_values(a.report) == metrics::field_values(b.report));
    }
}

TEST_CASE("train writes per-seed and aggregate outputs deterministically") {
    auto out = scratch("train");
    auto c = quick(out);
    auto dir = cmd_train(c);
    CHECK(fs::exists(dir / "0.json"));
    CHECK(fs::exists(dir / "aggregate.csv"));
    CHECK(fs::exists(dir / "aggregate.json"));
    CHECK(fs::exists(dir / "report.md"));
    auto agg = nlohmann::json::parse(slurp(dir / "aggregate.json")).get<metrics::Aggregate>();
    CHECK(agg.runs == 1);
    CHECK(agg.std.acc == 0.0);
    auto seed_json = nlohmann::json::parse(slurp(dir / "0.json"));
    CHECK(seed_json.contains("train"));
    CHECK(seed_json.contains("views"));

    const auto first = slurp(dir / "aggregate.csv");
    cmd_train(c);
    CHECK(slurp(dir / "aggregate.csv") == first);
    fs::remove_all(out);
}

TEST_CASE("prepare writes a cache that trains identically") {
    auto out = scratch("prep");
    auto c = quick(out);
    auto dir = cmd_prepare(c);
    CHECK(fs::exists(dir / "dataset.tds"));
    auto views = nlohmann::json::parse(slurp(dir / "views.json")).get<ViewSet>();
    CHECK(views.locals.size() == 6);

    auto from_csv = load_experiment_data(c);
    c.dataset = dir / "dataset.tds";
    CHECK(load_experiment_data(c) == from_csv);
    fs::remove_all(out);
}

TEST_CASE("report rendering") {
    std::vector<ReportColumn> one{{"f1", fixture(0.75)}};
    auto md = render_markdown_table(one);
    CHECK(md.find("| Metric | f1 |") != std::string::npos);
    CHECK(md.find("| Acc | 0.75 ± 0.00 |") != std::string::npos);
    CHECK(md.find("| epoch | 56 ± 0 |") != std::string::npos);

    std::vector<ReportColumn> four{{"f1", fixture(0.75)}, {"AUC", fixture(0.74)}, {"Acc", fixture(0.73)},
                                   {"Tab*", fixture(0.72)}};
    auto md4 = render_markdown_table(four);
    CHECK(md4.find("| Metric | f1 | AUC | Acc | Tab* |") != std::string::npos);
    CHECK(md4.find("| Acc | 0.75 ± 0.00 | 0.74 ± 0.00 | 0.73 ± 0.00 | 0.72 ± 0.00 |") != std::string::npos);
    auto csv = render_csv_table(four);
    CHECK(csv.rfind("metric,", 0) == 0);
}

TEST_CASE("report regenerates a table from fixture json") {
    auto dir = scratch("report");
    const std::vector<std::pair<std::string, double>> cols{{"f1", 0.75}, {"auc", 0.74}, {"acc", 0.73}, {"tab_star", 0.7}};
    nlohmann::json manifest{{"experiment", "ablate-monitor"}, {"configurations", nlohmann::json::array()}};
    for (const auto& [name, acc] : cols) {
        fs::create_directories(dir / name);
        std::ofstream(dir / name / "aggregate.json") << nlohmann::json(fixture(acc)).dump();
        manifest["configurations"].push_back({{"name", name}, {"dir", name}});
    }
    std::ofstream(dir / "manifest.json") << manifest.dump();
    cmd_report(dir);
    const auto md = slurp(dir / "report.md");
    CHECK(md.find("| Metric | f1 | auc | acc | tab_star |") != std::string::npos);
    CHECK(md.find("| Acc | 0.75 ± 0.00 | 0.74 ± 0.00 | 0.73 ± 0.00 | 0.70 ± 0.00 |") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("report on an empty directory fails without writing") {
    auto dir = scratch("empty");
    fs::create_directories(dir);
    CHECK_THROWS(cmd_report(dir));
    CHECK(fs::is_empty(dir));
    CHECK_THROWS(cmd_report(scratch("missing")));
    fs::remove_all(dir);
}

TEST_CASE("atomic writes replace the whole file") {
    auto dir = scratch("atomic");
    fs::create_directories(dir);
    write_file_atomic(dir / "x.txt", "first");
    write_file_atomic(dir / "x.txt", "second");
    CHECK(slurp(dir / "x.txt") == "second");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
    CHECK(files == 1);
    fs::remove_all(dir);
}

TEST_CASE("shipped config files parse") {
    const auto root = oracle::data_file("").parent_path().parent_path();
    for (const char* name : {"statlog.conf", "south_german.conf"}) {
        INFO(name);
        auto c = load_config(root / "configs" / name);
        CHECK(c.seeds.size() == 20);
        CHECK(c.train.batch_size == 30);
        CHECK(c.views == 6);
    }
}
