#include "tabattn/matrix.hpp"

#include <algorithm>

namespace tabattn {

Matrix gather(const Matrix& m, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    Matrix out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = m.row(rows[i]);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < cols.size(); ++j) dst[j] = src[cols[j]];
    }
    return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix gather_cols(const Matrix& m, std::span<const std::size_t> cols) {
    Matrix out(m.rows(), cols.size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto src = m.row(i);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < cols.size(); ++j) dst[j] = src[cols[j]];
    }
    return out;
}

}  // namespace tabattn
