#include "tabattn/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tabattn/rng.hpp"

namespace tabattn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw std::runtime_error("csv line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?";
}

std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Most frequent value; ties go to the smaller value.
double mode_of(const std::vector<double>& values) {
    std::map<double, std::size_t> counts;
    for (double v : values) ++counts[v];
    double best = 0.0;
    std::size_t best_count = 0;
    for (const auto& [v, n] : counts) {
        if (n > best_count) {
            best = v;
            best_count = n;
        }
    }
    return best;
}

template <class T>
void write_pod(std::ostream& out, T v) {
    static_assert(std::endian::native == std::endian::little, "cache format assumes little-endian host");
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("dataset cache: truncated file");
    return v;
}

constexpr char kCacheMagic[8] = {'T', 'A', 'B', 'D', 'S', 'E', 'T', '\0'};
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

std::size_t RawTable::column_index(const std::string& name) const {
    auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) throw std::runtime_error("column not found: " + name);
    return static_cast<std::size_t>(it - column_names.begin());
}

std::size_t Dataset::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

RawTable parse_csv(std::istream& in, const std::string& target_column) {
    std::string line;
    std::size_t line_no = 0;
    RawTable table;
    std::vector<std::vector<std::string>> text;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line, line_no);
        if (table.column_names.empty()) {
            for (auto& f : fields) table.column_names.push_back(trim(f));
            text.resize(fields.size());
            continue;
        }
        if (fields.size() != table.column_names.size()) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(table.column_names.size()) + " fields, found " +
                                     std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) text[c].push_back(trim(std::move(fields[c])));
    }
    if (table.column_names.empty()) throw std::runtime_error("csv: missing header row");
    if (text.front().empty()) throw std::runtime_error("csv: no data rows");
    table.column_index(target_column);
    table.target_column = target_column;

    table.columns.resize(text.size());
    for (std::size_t c = 0; c < text.size(); ++c) {
        bool numeric = true;
        for (const auto& s : text[c]) {
            if (!is_missing_token(s) && !parse_number(s)) {
                numeric = false;
                break;
            }
        }
        auto& col = table.columns[c];
        col.reserve(text[c].size());
        for (auto& s : text[c]) {
            if (is_missing_token(s))
                col.emplace_back(Missing{});
            else if (numeric)
                col.emplace_back(*parse_number(s));
            else
                col.emplace_back(std::move(s));
        }
    }
    return table;
}

RawTable load_csv(const std::filesystem::path& path, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open csv file: " + path.string());
    try {
        return parse_csv(in, target_column);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Dataset preprocess(const RawTable& table, const PreprocessOptions& options) {
    const std::size_t n = table.row_count();
    if (n == 0) throw std::runtime_error("preprocess: empty table");
    const std::size_t target = table.column_index(table.target_column);
    const auto& target_cells = table.columns[target];

    // Target -> {0,1}.
    std::vector<Cell> distinct;
    for (const auto& cell : target_cells) {
        if (std::holds_alternative<Missing>(cell))
            throw std::runtime_error("preprocess: target column '" + table.target_column + "' has missing values");
        if (std::find(distinct.begin(), distinct.end(), cell) == distinct.end()) distinct.push_back(cell);
    }
    if (distinct.size() != 2)
        throw std::runtime_error("preprocess: target column must have exactly two distinct values, found " +
                                 std::to_string(distinct.size()));
    Cell positive;
    if (options.positive_label) {
        const auto& label = *options.positive_label;
        Cell wanted = std::holds_alternative<double>(distinct[0])
                          ? (parse_number(label) ? Cell(*parse_number(label)) : Cell(label))
                          : Cell(label);
        if (std::find(distinct.begin(), distinct.end(), wanted) == distinct.end())
            throw std::runtime_error("preprocess: positive label '" + label + "' not present in target column");
        positive = wanted;
    } else if (std::holds_alternative<double>(distinct[0])) {
        positive = Cell(std::max(std::get<double>(distinct[0]), std::get<double>(distinct[1])));
    } else {
        throw std::runtime_error("preprocess: text target column needs an explicit positive label");
    }

    Dataset out;
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.labels[i] = target_cells[i] == positive ? 1 : 0;

    for (const auto& id : options.id_columns) table.column_index(id);

    std::vector<std::vector<double>> kept;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& name = table.column_names[c];
        if (c == target) continue;
        if (std::find(options.id_columns.begin(), options.id_columns.end(), name) != options.id_columns.end())
            continue;
        const auto& cells = table.columns[c];
        std::size_t missing = 0;
        for (const auto& cell : cells) missing += std::holds_alternative<Missing>(cell);
        if (static_cast<double>(missing) > options.max_missing_fraction * static_cast<double>(n)) continue;

        std::vector<double> values(n, 0.0);
        std::vector<double> present;
        std::vector<std::string> categories;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& cell = cells[i];
            if (const auto* d = std::get_if<double>(&cell)) {
                values[i] = *d;
            } else if (const auto* s = std::get_if<std::string>(&cell)) {
                auto it = std::find(categories.begin(), categories.end(), *s);
                if (it == categories.end()) {
                    categories.push_back(*s);
                    it = categories.end() - 1;
                }
                values[i] = static_cast<double>(it - categories.begin());
            } else {
                continue;
            }
            present.push_back(values[i]);
        }
        if (missing > 0) {
            const double fill = mode_of(present);
            for (std::size_t i = 0; i < n; ++i)
                if (std::holds_alternative<Missing>(cells[i])) values[i] = fill;
        }
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        const double min = *lo;
        const double range = *hi - *lo;
        for (double& v : values) v = range > 0.0 ? (v - min) / range : 0.0;

        out.feature_names.push_back(name);
        kept.push_back(std::move(values));
    }
    if (kept.empty()) throw std::runtime_error("preprocess: every feature column was dropped");

    out.features = Matrix(n, kept.size());
    for (std::size_t c = 0; c < kept.size(); ++c)
        for (std::size_t i = 0; i < n; ++i) out.features(i, c) = kept[c][i];
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const std::vector<int>& labels,
                                                                           const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must lie in (0,1)");
    const std::size_t n = labels.size();
    Rng rng = make_rng(spec.seed, Stream::Split);
    std::vector<std::size_t> train, test;

    if (spec.stratified) {
        std::array<std::vector<std::size_t>, 2> by_class;
        for (std::size_t i = 0; i < n; ++i) by_class[labels[i] == 1].push_back(i);
        const auto total = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
        // Largest-remainder apportionment of the training quota across classes.
        std::array<double, 2> exact{};
        std::array<std::size_t, 2> quota{};
        std::size_t assigned = 0;
        for (int c = 0; c < 2; ++c) {
            exact[c] = spec.train_fraction * static_cast<double>(by_class[c].size());
            quota[c] = static_cast<std::size_t>(std::floor(exact[c]));
            assigned += quota[c];
        }
        while (assigned < total) {
            int c = (exact[1] - std::floor(exact[1]) > exact[0] - std::floor(exact[0])) ? 1 : 0;
            // Leave at least one sample of a class to the test part when possible.
            auto cap = [&](int k) { return by_class[k].size() - (by_class[k].size() > 1 ? 1 : 0); };
            if (quota[c] >= cap(c)) c = 1 - c;
            if (quota[c] >= cap(c)) break;
            ++quota[c];
            exact[c] = std::floor(exact[c]);  // each class receives at most one extra
            ++assigned;
        }
        for (int c = 0; c < 2; ++c) {
            rng.shuffle(by_class[c]);
            train.insert(train.end(), by_class[c].begin(), by_class[c].begin() + quota[c]);
            test.insert(test.end(), by_class[c].begin() + quota[c], by_class[c].end());
        }
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const auto cut = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
        train.assign(order.begin(), order.begin() + cut);
        test.assign(order.begin() + cut, order.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());

    auto has_both = [&](const std::vector<std::size_t>& part) {
        bool pos = false, neg = false;
        for (auto i : part) (labels[i] == 1 ? pos : neg) = true;
        return pos && neg;
    };
    if (!has_both(train) || !has_both(test))
        throw std::runtime_error("split: a partition lost a class (seed " + std::to_string(spec.seed) + ")");
    return {std::move(train), std::move(test)};
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
    Dataset out;
    out.features = gather_rows(data.features, rows);
    out.labels.reserve(rows.size());
    for (auto r : rows) out.labels.push_back(data.labels[r]);
    out.feature_names = data.feature_names;
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec) {
    auto [train, test] = split_indices(data.labels, spec);
    return {subset(data, train), subset(data, test)};
}

double imbalance_ratio(const Dataset& data) {
    const std::size_t pos = data.positives();
    const std::size_t neg = data.rows() - pos;
    if (pos == 0 || neg == 0) throw std::runtime_error("imbalance_ratio: both classes must be present");
    return static_cast<double>(std::max(pos, neg)) / static_cast<double>(std::min(pos, neg));
}

std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be positive");
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, Stream::Batches, epoch);
    rng.shuffle(order);

    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        std::span<const std::size_t> idx(order.data() + start, std::min(batch_size, order.size() - start));
        Batch b;
        b.features = gather_rows(data.features, idx);
        for (auto i : idx) b.labels.push_back(data.labels[i]);
        out.push_back(std::move(b));
    }
    return out;
}

void write_csv(std::ostream& out, const Dataset& data, const std::string& target_column) {
    for (const auto& name : data.feature_names) out << name << ',';
    out << target_column << '\n';
    char buf[32];
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < data.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
            out << buf << ',';
        }
        out << data.labels[i] << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset cache: " + path.string());
    out.write(kCacheMagic, sizeof kCacheMagic);
    write_pod<std::uint32_t>(out, kCacheVersion);
    write_pod<std::uint64_t>(out, data.rows());
    write_pod<std::uint64_t>(out, data.cols());
    for (const auto& name : data.feature_names) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (int y : data.labels) write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(y));
    for (std::size_t j = 0; j < data.cols(); ++j)
        for (std::size_t i = 0; i < data.rows(); ++i) write_pod<double>(out, data.features(i, j));
    if (!out) throw std::runtime_error("failed writing dataset cache: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset cache: " + path.string());
    char magic[sizeof kCacheMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0)
        throw std::runtime_error(path.string() + ": not a dataset cache");
    if (auto v = read_pod<std::uint32_t>(in); v != kCacheVersion)
        throw std::runtime_error(path.string() + ": unsupported cache version " + std::to_string(v));
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Dataset data;
    for (std::uint64_t j = 0; j < cols; ++j) {
        auto len = read_pod<std::uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        data.feature_names.push_back(std::move(name));
    }
    data.labels.resize(rows);
    for (auto& y : data.labels) y = read_pod<std::uint8_t>(in);
    data.features = Matrix(rows, cols);
    for (std::uint64_t j = 0; j < cols; ++j)
        for (std::uint64_t i = 0; i < rows; ++i) data.features(i, j) = read_pod<double>(in);
    return data;
}

}  // namespace tabattn
