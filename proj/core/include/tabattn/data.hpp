#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tabattn/matrix.hpp"

namespace tabattn {

struct Missing {
    bool operator==(const Missing&) const = default;
};
using Cell = std::variant<Missing, double, std::string>;

// Column-oriented table as read from disk, before any cleaning.
struct RawTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<Cell>> columns;
    std::string target_column;

    std::size_t row_count() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t column_index(const std::string& name) const;
};

// Cleaned, fully numeric data. Labels are 1 for default, 0 otherwise.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;

    std::size_t rows() const { return features.rows(); }
    std::size_t cols() const { return features.cols(); }
    std::size_t positives() const;

    bool operator==(const Dataset&) const = default;
};

struct SplitSpec {
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    bool stratified = true;
};

struct PreprocessOptions {
    std::vector<std::string> id_columns;
    // Target value treated as the default class. When unset, a numeric
    // target uses its larger value.
    std::optional<std::string> positive_label;
    double max_missing_fraction = 0.6;
};

struct Batch {
    Matrix features;
    std::vector<int> labels;
};

RawTable parse_csv(std::istream& in, const std::string& target_column);
RawTable load_csv(const std::filesystem::path& path, const std::string& target_column);

Dataset preprocess(const RawTable& table, const PreprocessOptions& options = {});

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec);
// Index form of split(); both index lists are ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const std::vector<int>& labels,
                                                                           const SplitSpec& spec);

Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

// Majority count over minority count (the r in 1:r).
double imbalance_ratio(const Dataset& data);

std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch);

// Writes features then a `default` label column; doubles printed with 17
// significant digits so re-reading is exact.
void write_csv(std::ostream& out, const Dataset& data, const std::string& target_column = "default");

// Binary column-major cache. Layout (little-endian):
//   "TABDSET\0" | u32 version=1 | u64 rows | u64 cols
//   cols x (u32 len, bytes) feature names
//   rows x u8 labels
//   cols x rows x f64 features, column by column
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace tabattn
