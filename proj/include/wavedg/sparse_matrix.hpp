#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavedg {

using Vector = std::vector<double>;

/// Raised when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Compressed-row sparse matrix in canonical form: column indices strictly
/// increasing within each row, duplicates merged at construction.
///
/// Immutable after construction. The `symmetric` flag is a hint for the
/// solver; `from_triplets` verifies it when requested.
class SparseMatrix {
public:
    SparseMatrix() = default;

    /// Builds a canonical CSR matrix. Entries with equal (row, col) are summed.
    /// Explicit zeros are kept so the sparsity pattern only depends on the input
    /// pattern, not on cancellation.
    static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                      std::vector<Triplet> entries,
                                      bool symmetric = false)
    {
        for (const auto& t : entries) {
            if (t.row >= n_rows || t.col >= n_cols) {
                throw DimensionError("triplet (" + std::to_string(t.row) + ", " +
                                     std::to_string(t.col) + ") outside " +
                                     std::to_string(n_rows) + "x" + std::to_string(n_cols));
            }
        }
        // Stable sort keeps the input order of duplicates, so merged sums are
        // reproducible for a given assembly order.
        std::stable_sort(entries.begin(), entries.end(), [](const Triplet& l, const Triplet& r) {
            return l.row != r.row ? l.row < r.row : l.col < r.col;
        });

        SparseMatrix m;
        m.n_rows_ = n_rows;
        m.n_cols_ = n_cols;
        m.row_offsets_.assign(n_rows + 1, 0);
        for (std::size_t i = 0; i < entries.size();) {
            std::size_t j = i;
            double sum = 0.0;
            while (j < entries.size() && entries[j].row == entries[i].row &&
                   entries[j].col == entries[i].col) {
                sum += entries[j].value;
                ++j;
            }
            m.col_indices_.push_back(entries[i].col);
            m.values_.push_back(sum);
            ++m.row_offsets_[entries[i].row + 1];
            i = j;
        }
        std::partial_sum(m.row_offsets_.begin(), m.row_offsets_.end(), m.row_offsets_.begin());

        if (symmetric) {
            if (n_rows != n_cols) {
                throw DimensionError("symmetric flag on a non-square matrix");
            }
            const double tol = 1e-14 * m.max_abs();
            for (std::size_t r = 0; r < n_rows; ++r) {
                for (std::size_t p = m.row_offsets_[r]; p < m.row_offsets_[r + 1]; ++p) {
                    if (std::abs(m.values_[p] - m.at(m.col_indices_[p], r)) > tol) {
                        throw std::invalid_argument("matrix flagged symmetric is not symmetric");
                    }
                }
            }
            m.symmetric_ = true;
        }
        return m;
    }

    static SparseMatrix identity(std::size_t n)
    {
        std::vector<Triplet> t;
        t.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            t.push_back({i, i, 1.0});
        }
        return from_triplets(n, n, std::move(t), true);
    }

    /// Constant-coefficient tridiagonal matrix tridiag(lower, diag, upper).
    static SparseMatrix tridiagonal(std::size_t n, double lower, double diag, double upper)
    {
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) t.push_back({i, i - 1, lower});
            t.push_back({i, i, diag});
            if (i + 1 < n) t.push_back({i, i + 1, upper});
        }
        return from_triplets(n, n, std::move(t), lower == upper);
    }

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }
    std::size_t nnz() const { return values_.size(); }
    bool symmetric() const { return symmetric_; }

    std::span<const std::size_t> row_offsets() const { return row_offsets_; }
    std::span<const std::size_t> col_indices() const { return col_indices_; }
    std::span<const double> values() const { return values_; }

    /// Stored value at (r, c), zero when not in the pattern.
    double at(std::size_t r, std::size_t c) const
    {
        const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r]);
        const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r + 1]);
        const auto it = std::lower_bound(first, last, c);
        if (it == last || *it != c) return 0.0;
        return values_[static_cast<std::size_t>(it - col_indices_.begin())];
    }

    double max_abs() const
    {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    double frobenius_norm() const
    {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return std::sqrt(s);
    }

    /// Row-major dense copy; intended for tests and tiny systems.
    std::vector<double> to_dense() const
    {
        std::vector<double> d(n_rows_ * n_cols_, 0.0);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
                d[r * n_cols_ + col_indices_[p]] = values_[p];
            }
        }
        return d;
    }

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
    bool symmetric_ = false;
};

/// y = m x. Each row is summed left to right in column order.
inline Vector matvec(const SparseMatrix& m, std::span<const double> x)
{
    if (x.size() != m.n_cols()) {
        throw DimensionError("matvec: x has " + std::to_string(x.size()) + " entries, matrix has " +
                             std::to_string(m.n_cols()) + " columns");
    }
    const auto offsets = m.row_offsets();
    const auto cols = m.col_indices();
    const auto vals = m.values();
    Vector y(m.n_rows(), 0.0);
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        double s = 0.0;
        for (std::size_t p = offsets[r]; p < offsets[r + 1]; ++p) {
            s += vals[p] * x[cols[p]];
        }
        y[r] = s;
    }
    return y;
}

inline double dot(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        throw DimensionError("dot: sizes " + std::to_string(x.size()) + " and " +
                             std::to_string(y.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

/// xᵀ m y
inline double quadratic_form(const SparseMatrix& m, std::span<const double> x,
                             std::span<const double> y)
{
    if (x.size() != m.n_rows()) {
        throw DimensionError("quadratic_form: x has " + std::to_string(x.size()) +
                             " entries, matrix has " + std::to_string(m.n_rows()) + " rows");
    }
    return dot(x, matvec(m, y));
}

/// One block of a BlockSystem: scale * source. An empty entry is a zero block.
struct Block {
    double scale = 0.0;
    const SparseMatrix* source = nullptr;
};

/// Grid of scaled references to sparse matrices. Sources must outlive the
/// BlockSystem; `materialize` copies their values.
class BlockSystem {
public:
    BlockSystem(std::size_t n_block_rows, std::size_t n_block_cols)
        : n_block_rows_(n_block_rows), n_block_cols_(n_block_cols),
          blocks_(n_block_rows * n_block_cols)
    {
    }

    std::size_t n_block_rows() const { return n_block_rows_; }
    std::size_t n_block_cols() const { return n_block_cols_; }

    BlockSystem& set(std::size_t br, std::size_t bc, double scale, const SparseMatrix& source)
    {
        if (br >= n_block_rows_ || bc >= n_block_cols_) {
            throw DimensionError("block index out of range");
        }
        blocks_[br * n_block_cols_ + bc] = Block{scale, &source};
        return *this;
    }

    const Block& block(std::size_t br, std::size_t bc) const
    {
        return blocks_[br * n_block_cols_ + bc];
    }

    /// Sum of scaled blocks at their offsets. Every block row and block column
    /// needs at least one nonempty block to fix its size.
    SparseMatrix materialize() const
    {
        std::vector<std::size_t> row_size(n_block_rows_, npos);
        std::vector<std::size_t> col_size(n_block_cols_, npos);
        for (std::size_t br = 0; br < n_block_rows_; ++br) {
            for (std::size_t bc = 0; bc < n_block_cols_; ++bc) {
                const Block& b = block(br, bc);
                if (b.source == nullptr) continue;
                fix_size(row_size[br], b.source->n_rows(), "block row", br);
                fix_size(col_size[bc], b.source->n_cols(), "block column", bc);
            }
        }
        auto offsets = [](const std::vector<std::size_t>& sizes, const char* what) {
            std::vector<std::size_t> off(sizes.size() + 1, 0);
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                if (sizes[i] == npos) {
                    throw DimensionError(std::string(what) + " " + std::to_string(i) +
                                         " has no nonempty block");
                }
                off[i + 1] = off[i] + sizes[i];
            }
            return off;
        };
        const auto row_off = offsets(row_size, "block row");
        const auto col_off = offsets(col_size, "block column");

        std::vector<Triplet> t;
        for (std::size_t br = 0; br < n_block_rows_; ++br) {
            for (std::size_t bc = 0; bc < n_block_cols_; ++bc) {
                const Block& b = block(br, bc);
                if (b.source == nullptr) continue;
                const auto ro = b.source->row_offsets();
                const auto ci = b.source->col_indices();
                const auto va = b.source->values();
                for (std::size_t r = 0; r < b.source->n_rows(); ++r) {
                    for (std::size_t p = ro[r]; p < ro[r + 1]; ++p) {
                        t.push_back({row_off[br] + r, col_off[bc] + ci[p], b.scale * va[p]});
                    }
                }
            }
        }
        return SparseMatrix::from_triplets(row_off.back(), col_off.back(), std::move(t));
    }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    static void fix_size(std::size_t& slot, std::size_t n, const char* what, std::size_t idx)
    {
        if (slot == npos) {
            slot = n;
        } else if (slot != n) {
            throw DimensionError(std::string(what) + " " + std::to_string(idx) +
                                 " has blocks of different sizes");
        }
    }

    std::size_t n_block_rows_;
    std::size_t n_block_cols_;
    std::vector<Block> blocks_;
};

} // namespace wavedg
