#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "wavedg/sparse_matrix.hpp"

namespace wavedg {

/// Linear solve failed: singular or indefinite matrix, or the residual bound
/// was not met. Carries the residual norm that was achieved (infinite when
/// the factorization itself failed).
class SolveError : public std::runtime_error {
public:
    SolveError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual)
    {
    }
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Factorize once, solve many. The SPD hint selects an LDLᵀ factorization,
/// otherwise a sparse LU with partial pivoting is used. Either way every
/// solution satisfies
///     ‖m x − b‖₂ ≤ 1e-12 (‖b‖₂ + ‖m‖_F ‖x‖₂)
/// or a SolveError is thrown.
class LinearSolver {
public:
    static constexpr double kResidualTolerance = 1e-12;

    LinearSolver(const SparseMatrix& m, bool spd_hint)
        : matrix_(m), frobenius_(m.frobenius_norm())
    {
        if (m.n_rows() != m.n_cols()) {
            throw DimensionError("solve: matrix is " + std::to_string(m.n_rows()) + "x" +
                                 std::to_string(m.n_cols()) + ", expected square");
        }
        const EigenMatrix em = to_eigen(m);
        if (spd_hint) {
            auto& f = factor_.emplace<Cholesky>();
            f.compute(em);
            if (f.info() != Eigen::Success || !positive_pivots(f)) {
                throw SolveError("LDLT factorization failed: matrix not SPD",
                                 std::numeric_limits<double>::infinity());
            }
        } else {
            auto& f = factor_.emplace<LU>();
            f.analyzePattern(em);
            f.factorize(em);
            if (f.info() != Eigen::Success) {
                throw SolveError("LU factorization failed: " + f.lastErrorMessage(),
                                 std::numeric_limits<double>::infinity());
            }
        }
    }

    std::size_t size() const { return matrix_.n_rows(); }

    Vector solve(std::span<const double> b) const
    {
        if (b.size() != size()) {
            throw DimensionError("solve: right side has " + std::to_string(b.size()) +
                                 " entries, system has " + std::to_string(size()));
        }
        Vector x = apply_inverse(b);
        const double b_norm = norm2(b);
        // Always one refinement sweep: time steppers call this thousands of
        // times and the direct solve alone leaves a defect that accumulates.
        // Further sweeps only run while the residual bound is not met.
        for (int sweep = 0;; ++sweep) {
            Vector r = matvec(matrix_, x);
            for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
            const double res = norm2(r);
            if (!std::isfinite(res)) {
                throw SolveError("solve produced non-finite values", res);
            }
            if (sweep >= 1 && res <= kResidualTolerance * (b_norm + frobenius_ * norm2(x))) {
                return x;
            }
            if (sweep == 4) {
                throw SolveError("residual bound not met", res);
            }
            const Vector dx = apply_inverse(r);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
        }
    }

private:
    using EigenMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
    using Cholesky = Eigen::SimplicialLDLT<EigenMatrix>;
    using LU = Eigen::SparseLU<EigenMatrix, Eigen::COLAMDOrdering<int>>;

    static EigenMatrix to_eigen(const SparseMatrix& m)
    {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(m.nnz());
        const auto ro = m.row_offsets();
        const auto ci = m.col_indices();
        const auto va = m.values();
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            for (std::size_t p = ro[r]; p < ro[r + 1]; ++p) {
                t.emplace_back(static_cast<int>(r), static_cast<int>(ci[p]), va[p]);
            }
        }
        EigenMatrix em(static_cast<int>(m.n_rows()), static_cast<int>(m.n_cols()));
        em.setFromTriplets(t.begin(), t.end());
        return em;
    }

    static bool positive_pivots(const Cholesky& f)
    {
        const auto d = f.vectorD();
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (!(d[i] > 0.0)) return false;
        }
        return true;
    }

    Vector apply_inverse(std::span<const double> b) const
    {
        const Eigen::Map<const Eigen::VectorXd> eb(b.data(), static_cast<Eigen::Index>(b.size()));
        Eigen::VectorXd ex = std::visit(
            [&](const auto& f) -> Eigen::VectorXd {
                if constexpr (std::is_same_v<std::decay_t<decltype(f)>, std::monostate>) {
                    return Eigen::VectorXd();
                } else {
                    return f.solve(eb);
                }
            },
            factor_);
        return Vector(ex.data(), ex.data() + ex.size());
    }

    SparseMatrix matrix_;
    double frobenius_;
    // SparseLU is neither copyable nor movable, hence the variant is held by
    // value inside a solver that is itself pinned in place.
    std::variant<std::monostate, Cholesky, LU> factor_;

public:
    LinearSolver(const LinearSolver&) = delete;
    LinearSolver& operator=(const LinearSolver&) = delete;
};

/// One-shot solve of m x = b.
inline Vector solve(const SparseMatrix& m, std::span<const double> b, bool spd_hint = false)
{
    if (m.n_rows() == m.n_cols() && b.size() != m.n_rows()) {
        throw DimensionError("solve: right side has " + std::to_string(b.size()) +
                             " entries, system has " + std::to_string(m.n_rows()));
    }
    return LinearSolver(m, spd_hint).solve(b);
}

inline Vector solve(const BlockSystem& system, std::span<const double> b, bool spd_hint = false)
{
    return solve(system.materialize(), b, spd_hint);
}

} // namespace wavedg
