#include "tabattn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace tabattn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument(key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    return d;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
        if (!v.empty() && v[0] != '-') n = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty())
        throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(n);
}

std::string seed_file_name(std::uint64_t seed) { return std::to_string(seed) + ".json"; }

json seed_json(const std::string& label, const SeedResult& r) {
    return {{"configuration", label},
            {"seed", r.seed},
            {"metrics", r.report},
            {"train", r.train},
            {"views", r.views}};
}

std::vector<ReportColumn> collect_columns(const fs::path& dir) {
    auto read_aggregate = [](const fs::path& file) {
        std::ifstream in(file);
        if (!in) throw std::runtime_error("cannot read " + file.string());
        return json::parse(in).get<metrics::Aggregate>();
    };
    std::vector<ReportColumn> cols;
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        const auto m = json::parse(in);
        for (const auto& c : m.at("configurations")) {
            const auto sub = dir / c.at("dir").get<std::string>() / "aggregate.json";
            if (fs::exists(sub)) cols.push_back({c.at("name").get<std::string>(), read_aggregate(sub)});
        }
        return cols;
    }
    if (fs::exists(dir / "aggregate.json")) {
        cols.push_back({dir.filename().string(), read_aggregate(dir / "aggregate.json")});
        return cols;
    }
    std::vector<fs::path> subs;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_directory() && fs::exists(e.path() / "aggregate.json")) subs.push_back(e.path());
    std::sort(subs.begin(), subs.end());
    for (const auto& s : subs) cols.push_back({s.filename().string(), read_aggregate(s / "aggregate.json")});
    return cols;
}

void write_manifest(const fs::path& dir, const std::string& experiment,
                    const std::vector<std::pair<std::string, std::string>>& configs) {
    json m = {{"experiment", experiment}, {"configurations", json::array()}};
    for (const auto& [name, sub] : configs) m["configurations"].push_back({{"name", name}, {"dir", sub}});
    write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

void write_report_files(const fs::path& dir, const std::vector<ReportColumn>& cols) {
    write_file_atomic(dir / "report.md", render_markdown_table(cols));
    write_file_atomic(dir / "report.csv", render_csv_table(cols));
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::default_seeds() {
    std::vector<std::uint64_t> s(20);
    for (std::uint64_t i = 0; i < 20; ++i) s[i] = i;
    return s;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& part : split_list(text)) {
        const auto dash = part.find('-');
        if (dash != std::string::npos && dash > 0) {
            const auto lo = parse_count("seeds", trim(part.substr(0, dash)));
            const auto hi = parse_count("seeds", trim(part.substr(dash + 1)));
            if (hi < lo) throw std::invalid_argument("seeds: empty range '" + part + "'");
            for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        } else {
            seeds.push_back(parse_count("seeds", part));
        }
    }
    if (seeds.empty()) throw std::invalid_argument("seeds: no seeds given");
    return seeds;
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string v = trim(raw_value);
    if (key == "dataset") c.dataset = v;
    else if (key == "target") c.target = v;
    else if (key == "id_columns") c.id_columns = split_list(v);
    else if (key == "positive_label") c.positive_label = v;
    else if (key == "train_fraction") c.train_fraction = parse_double(key, v);
    else if (key == "stratified") c.stratified = parse_bool(key, v);
    else if (key == "seeds") c.seeds = parse_seed_list(v);
    else if (key == "monitor") c.monitor = monitor_from_string(v);
    else if (key == "views") {
        c.views = parse_count(key, v);
        if (c.views > 6) throw std::invalid_argument("views: at most 6 local views");
    }
    else if (key == "attention") c.attention = parse_bool(key, v);
    else if (key == "variant") c.model.variant = variant_from_string(v);
    else if (key == "lambda") c.model.aux_loss_weight = parse_double(key, v);
    else if (key == "dropout") c.model.dropout = parse_double(key, v);
    else if (key == "local_hidden") {
        auto w = split_list(v);
        if (w.size() != 2) throw std::invalid_argument("local_hidden: expected two widths");
        c.model.local_hidden1 = parse_count(key, w[0]);
        c.model.local_hidden2 = parse_count(key, w[1]);
    }
    else if (key == "global_hidden") c.model.global_hidden = parse_count(key, v);
    else if (key == "global_embed") c.model.global_embed = parse_count(key, v);
    else if (key == "batch_size") c.train.batch_size = parse_count(key, v);
    else if (key == "initial_lr") c.train.initial_lr = parse_double(key, v);
    else if (key == "max_epochs") c.train.max_epochs = parse_count(key, v);
    else if (key == "patience_lr") c.train.patience_lr = parse_count(key, v);
    else if (key == "patience_stop") c.train.patience_stop = parse_count(key, v);
    else if (key == "weight_decay") c.train.weight_decay = parse_double(key, v);
    else if (key == "holdout") c.train.holdout = parse_bool(key, v);
    else if (key == "view_fraction") c.view_config.fraction = parse_double(key, v);
    else if (key == "baselines") {
        c.baselines.clear();
        for (const auto& b : split_list(v)) c.baselines.push_back(baseline_from_string(b));
    }
    else if (key == "out") c.out = v;
    else if (key == "jobs") c.jobs = parse_count(key, v);
    else throw std::invalid_argument("unknown config key: " + key);
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
        apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    return parse_config(in, std::move(base));
}

Dataset load_experiment_data(const ExperimentConfig& config) {
    if (config.dataset.empty()) throw std::invalid_argument("no dataset given (set dataset= or --dataset)");
    std::ifstream probe(config.dataset, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open dataset: " + config.dataset.string());
    char magic[8] = {};
    probe.read(magic, sizeof magic);
    if (probe && std::string(magic, 7) == "TABDSET") return load_dataset(config.dataset);
    PreprocessOptions opts;
    opts.id_columns = config.id_columns;
    opts.positive_label = config.positive_label;
    return preprocess(load_csv(config.dataset, config.target), opts);
}

SeedResult run_seed(const Dataset& data, const ExperimentConfig& config, std::uint64_t seed) {
    auto [train_set, test_set] = split(data, {seed, config.train_fraction, config.stratified});
    SeedResult r;
    r.seed = seed;
    if (config.views > 0) {
        r.views = build_view_set(train_set, config.view_config, seed).first_locals(config.views);
    } else {
        r.views.global.strategy = Strategy::GLOBAL;
        r.views.global.indices.resize(data.cols());
        std::iota(r.views.global.indices.begin(), r.views.global.indices.end(), 0);
    }
    ModelConfig mc = config.model;
    // Without local views there is nothing to stack: the plain DNN.
    mc.attention = config.attention && config.views > 0;
    Model model = init_model(r.views, mc, seed);
    TrainConfig tc = config.train;
    tc.seed = seed;
    r.train = train(model, r.views, train_set, config.monitor, tc);
    const auto pred = predict(model, r.views, test_set.features);
    r.report = metrics::evaluate(pred.scores, test_set.labels, pred.labels);
    r.report.epochs = static_cast<double>(r.train.epochs_run);
    r.report.best_epoch = static_cast<double>(r.train.best_epoch);
    return r;
}

SeedResult run_baseline_seed(const Dataset& data, const ExperimentConfig& config, BaselineKind kind,
                             std::uint64_t seed) {
    auto [train_set, test_set] = split(data, {seed, config.train_fraction, config.stratified});
    BaselineSpec spec;
    spec.kind = kind;
    spec.dnn = config.model;
    spec.train = config.train;
    spec.monitor = config.monitor;
    spec.seed = seed;
    SeedResult r;
    r.seed = seed;
    r.report = fit_predict(spec, train_set, test_set).report;
    return r;
}

std::vector<SeedResult> run_seeds(const ExperimentConfig& config,
                                  const std::function<SeedResult(std::uint64_t)>& fn) {
    const auto& seeds = config.seeds;
    std::vector<SeedResult> results(seeds.size());
    std::size_t jobs = config.jobs ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                results[i] = fn(seeds[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

metrics::Aggregate write_results(const fs::path& dir, const std::string& label, const std::vector<SeedResult>& results) {
    fs::create_directories(dir);
    std::vector<metrics::MetricsReport> reports;
    std::string csv = metrics::csv_header() + "\n";
    for (const auto& r : results) {
        write_file_atomic(dir / seed_file_name(r.seed), seed_json(label, r).dump(2) + "\n");
        reports.push_back(r.report);
        csv += metrics::csv_row(std::to_string(r.seed), r.report) + "\n";
    }
    const auto agg = metrics::aggregate(reports);
    csv += metrics::csv_row("mean", agg.mean) + "\n";
    csv += metrics::csv_row("std", agg.std) + "\n";
    write_file_atomic(dir / "aggregate.csv", csv);
    write_file_atomic(dir / "aggregate.json", json(agg).dump(2) + "\n");
    write_report_files(dir, {{label, agg}});
    return agg;
}

std::string render_markdown_table(const std::vector<ReportColumn>& columns) {
    static const std::vector<std::pair<std::string, std::string>> rows = {
        {"acc", "Acc"},          {"auc", "AUC"},       {"ks", "KS"},
        {"precision0", "Precision_0"}, {"recall0", "Recall_0"}, {"f1_0", "f1_0"},
        {"precision1", "Precision_1"}, {"recall1", "Recall_1"}, {"f1_1", "f1_1"},
        {"epochs", "epoch"},
    };
    const auto& names = metrics::field_names();
    auto index_of = [&](const std::string& f) {
        return static_cast<std::size_t>(std::find(names.begin(), names.end(), f) - names.begin());
    };
    std::string out = "| Metric |";
    for (const auto& c : columns) out += " " + c.name + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
    out += "\n";
    char buf[64];
    for (const auto& [field, title] : rows) {
        out += "| " + title + " |";
        const auto f = index_of(field);
        for (const auto& c : columns) {
            const double m = metrics::field_values(c.aggregate.mean)[f];
            const double s = metrics::field_values(c.aggregate.std)[f];
            if (field == "epochs")
                std::snprintf(buf, sizeof buf, " %.0f ± %.0f |", m, s);
            else
                std::snprintf(buf, sizeof buf, " %.2f ± %.2f |", m, s);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::string render_csv_table(const std::vector<ReportColumn>& columns) {
    std::string out = "metric";
    for (const auto& c : columns) out += "," + c.name + "_mean," + c.name + "_std";
    out += "\n";
    const auto& names = metrics::field_names();
    char buf[64];
    for (std::size_t f = 0; f < names.size(); ++f) {
        out += names[f];
        for (const auto& c : columns) {
            std::snprintf(buf, sizeof buf, ",%.10g,%.10g", metrics::field_values(c.aggregate.mean)[f],
                          metrics::field_values(c.aggregate.std)[f]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

fs::path cmd_prepare(const ExperimentConfig& config) {
    const Dataset data = load_experiment_data(config);
    const fs::path dir = config.out / "prepare";
    fs::create_directories(dir);
    const fs::path cache = dir / "dataset.tds";
    fs::path tmp = cache;
    tmp += ".tmp";
    save_dataset(tmp, data);
    fs::rename(tmp, cache);

    const auto seed = config.seeds.front();
    auto [train_set, test_set] = split(data, {seed, config.train_fraction, config.stratified});
    const ViewSet views = build_view_set(train_set, config.view_config, seed);
    write_file_atomic(dir / "views.json", json(views).dump(2) + "\n");
    json summary = {{"rows", data.rows()},
                    {"features", data.cols()},
                    {"positives", data.positives()},
                    {"imbalance_ratio", imbalance_ratio(data)},
                    {"feature_names", data.feature_names},
                    {"views_seed", seed},
                    {"train_rows", train_set.rows()},
                    {"test_rows", test_set.rows()}};
    write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
    return dir;
}

fs::path cmd_train(const ExperimentConfig& config) {
    const Dataset data = load_experiment_data(config);
    const fs::path dir = config.out / "train";
    auto results = run_seeds(config, [&](std::uint64_t s) { return run_seed(data, config, s); });
    write_results(dir, "Tab-Attention", results);
    return dir;
}

fs::path cmd_ablate_views(const ExperimentConfig& config) {
    const Dataset data = load_experiment_data(config);
    const fs::path dir = config.out / "ablate-views";
    std::vector<std::pair<std::string, std::string>> configs;
    for (std::size_t k = 0; k <= 6; ++k) {
        ExperimentConfig c = config;
        c.views = k;
        auto results = run_seeds(c, [&](std::uint64_t s) { return run_seed(data, c, s); });
        const std::string sub = "views_" + std::to_string(k);
        const std::string name = "View=" + std::to_string(k);
        write_results(dir / sub, name, results);
        configs.emplace_back(name, sub);
    }
    write_manifest(dir, "ablate-views", configs);
    write_report_files(dir, collect_columns(dir));
    return dir;
}

fs::path cmd_ablate_monitor(const ExperimentConfig& config) {
    const Dataset data = load_experiment_data(config);
    const fs::path dir = config.out / "ablate-monitor";
    struct Variant {
        std::string name, sub;
        MonitorMetric monitor;
        bool attention;
    };
    const std::vector<Variant> variants = {{"f1", "f1", MonitorMetric::F1Default, true},
                                           {"AUC", "auc", MonitorMetric::Auc, true},
                                           {"Acc", "acc", MonitorMetric::Acc, true},
                                           {"Tab*", "tab_star", MonitorMetric::F1Default, false}};
    std::vector<std::pair<std::string, std::string>> configs;
    for (const auto& v : variants) {
        ExperimentConfig c = config;
        c.monitor = v.monitor;
        c.attention = v.attention;
        auto results = run_seeds(c, [&](std::uint64_t s) { return run_seed(data, c, s); });
        write_results(dir / v.sub, v.name, results);
        configs.emplace_back(v.name, v.sub);
    }
    write_manifest(dir, "ablate-monitor", configs);
    write_report_files(dir, collect_columns(dir));
    return dir;
}

fs::path cmd_baseline(const ExperimentConfig& config) {
    const Dataset data = load_experiment_data(config);
    const fs::path dir = config.out / "baseline";
    std::vector<std::pair<std::string, std::string>> configs;
    for (auto kind : config.baselines) {
        auto results = run_seeds(config, [&](std::uint64_t s) { return run_baseline_seed(data, config, kind, s); });
        const std::string sub(to_string(kind));
        std::string name = sub;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
        if (kind == BaselineKind::AdaBoost) name = "AdaBoost";
        write_results(dir / sub, name, results);
        configs.emplace_back(name, sub);
    }
    write_manifest(dir, "baseline", configs);
    write_report_files(dir, collect_columns(dir));
    return dir;
}

fs::path cmd_report(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("report: not a directory: " + dir.string());
    const auto cols = collect_columns(dir);
    if (cols.empty()) throw std::runtime_error("report: no results found under " + dir.string());
    write_report_files(dir, cols);
    return dir / "report.md";
}

}  // namespace tabattn
