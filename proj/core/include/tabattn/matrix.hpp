#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabattn {

// Dense row-major matrix of doubles. Rows are samples wherever a matrix
// carries a batch.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                        " does not match " + std::to_string(rows_) + "x" +
                                        std::to_string(cols_));
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Rows `rows` of `m` restricted to columns `cols`, in the given orders.
Matrix gather(const Matrix& m, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);
Matrix gather_cols(const Matrix& m, std::span<const std::size_t> cols);

}  // namespace tabattn
