#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wavedg/linear_solver.hpp"
#include "wavedg/quadrature.hpp"
#include "wavedg/space_discretization.hpp"
#include "wavedg/sparse_matrix.hpp"

namespace wavedg {

enum class Scheme { dG0, dG1 };

inline int degree(Scheme s) { return s == Scheme::dG0 ? 0 : 1; }

inline std::string_view to_string(Scheme s) { return s == Scheme::dG0 ? "dg0" : "dg1"; }

inline Scheme parse_scheme(std::string_view name)
{
    if (name == "dg0") return Scheme::dG0;
    if (name == "dg1") return Scheme::dG1;
    throw std::invalid_argument("unsupported scheme '" + std::string(name) +
                                "' (expected dg0 or dg1)");
}

/// Temporal mesh 0 = t_0 < t_1 < ... < t_N = T.
class TimePartition {
public:
    explicit TimePartition(std::vector<double> nodes) : t_(std::move(nodes))
    {
        if (t_.size() < 2) {
            throw std::invalid_argument("TimePartition: need at least one interval");
        }
        for (std::size_t n = 1; n < t_.size(); ++n) {
            if (!(t_[n] > t_[n - 1])) {
                throw std::invalid_argument("TimePartition: nodes not strictly increasing at index " +
                                            std::to_string(n));
            }
        }
    }

    static TimePartition uniform(double t_final, std::size_t n_intervals)
    {
        if (!(t_final > 0.0) || n_intervals == 0) {
            throw std::invalid_argument("TimePartition::uniform: need T > 0 and N >= 1");
        }
        std::vector<double> t(n_intervals + 1);
        for (std::size_t n = 0; n <= n_intervals; ++n) {
            t[n] = t_final * static_cast<double>(n) / static_cast<double>(n_intervals);
        }
        t.back() = t_final;
        return TimePartition(std::move(t));
    }

    std::size_t n_intervals() const { return t_.size() - 1; }
    /// t_n for n = 0..N.
    double t(std::size_t n) const { return t_[n]; }
    std::span<const double> nodes() const { return t_; }
    double t_final() const { return t_.back(); }
    /// k_n = t_n − t_{n−1} for n = 1..N.
    double k(std::size_t n) const { return t_[n] - t_[n - 1]; }

    double k_max() const
    {
        double k = 0.0;
        for (std::size_t n = 1; n < t_.size(); ++n) k = std::max(k, this->k(n));
        return k;
    }

private:
    std::vector<double> t_;
};

/// Left limits (U_{1,n}^-, U_{2,n}^-) at a time node.
struct DgState {
    Vector u1;
    Vector u2;
};

/// Solution on one interval I_n = (t_{n−1}, t_n): right limits at t_{n−1}
/// and left limits at t_n. For dG(0) both pairs hold the same constant.
struct DgInterval {
    Vector u1_plus;
    Vector u1_minus;
    Vector u2_plus;
    Vector u2_minus;

    DgState end_state() const { return {u1_minus, u2_minus}; }
};

/// Time-interval mass matrix of the nodal linear basis
/// Ψ¹ = (t_n − t)/k, Ψ² = (t − t_{n−1})/k: ω^{pr} = ∫ Ψ^r Ψ^p dt.
struct Dg1Weights {
    double omega[2][2];

    static Dg1Weights for_step(double k)
    {
        return {{{k / 3.0, k / 6.0}, {k / 6.0, k / 3.0}}};
    }
    /// ω_n^{pr} with 1-based p, r as they appear in the block system.
    double operator()(int p, int r) const { return omega[p - 1][r - 1]; }
};

/// Nodal linear basis on [t0, t1]; index 1 is one at t0, index 2 at t1.
inline double dg1_basis(int p, double t, double t0, double t1)
{
    const double s = (t - t0) / (t1 - t0);
    return p == 1 ? 1.0 - s : s;
}

/// Quadrature orders in time.
inline constexpr int kDg0LoadPoints = 2;
inline constexpr int kDg1LoadPoints = 3;

/// ∫_{I} (f, φ_i) dt with 2-point Gauss in time.
inline Vector dg0_load(const FeSpace& space, const SpaceTimeFunction& f, double t0, double t1)
{
    Vector b(space.n_dof(), 0.0);
    if (!f) return b;
    const auto& q = gauss_legendre(kDg0LoadPoints);
    for (std::size_t g = 0; g < q.size(); ++g) {
        const double t = q.point(g, t0, t1);
        const double w = q.weight(g, t0, t1);
        const Vector bg = assemble_load(space, [&](double x) { return f(x, t); });
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += w * bg[i];
    }
    return b;
}

/// (f_{n1}, f_{n2}) with f_{np} = ∫_{I} (f, φ_i) Ψ^p dt by 3-point Gauss in time.
struct Dg1Moments {
    Vector first;
    Vector second;
};

inline Dg1Moments dg1_moments(const FeSpace& space, const SpaceTimeFunction& f, double t0,
                              double t1)
{
    Dg1Moments m{Vector(space.n_dof(), 0.0), Vector(space.n_dof(), 0.0)};
    if (!f) return m;
    const auto& q = gauss_legendre(kDg1LoadPoints);
    for (std::size_t g = 0; g < q.size(); ++g) {
        const double t = q.point(g, t0, t1);
        const double w = q.weight(g, t0, t1);
        const double w1 = w * dg1_basis(1, t, t0, t1);
        const double w2 = w * dg1_basis(2, t, t0, t1);
        const Vector bg = assemble_load(space, [&](double x) { return f(x, t); });
        for (std::size_t i = 0; i < bg.size(); ++i) {
            m.first[i] += w1 * bg[i];
            m.second[i] += w2 * bg[i];
        }
    }
    return m;
}

/// dG(0) step matrix [[A, −kA], [kA, M]].
inline BlockSystem dg0_block_system(const SparseMatrix& M, const SparseMatrix& A, double k)
{
    BlockSystem s(2, 2);
    s.set(0, 0, 1.0, A).set(0, 1, -k, A).set(1, 0, k, A).set(1, 1, 1.0, M);
    return s;
}

/// dG(1) step matrix for unknowns (U_{1,n}^-, U_{1,n−1}^+, U_{2,n}^-, U_{2,n−1}^+):
///
///   [ A/2    A/2   −ω¹²A  −ω¹¹A ]
///   [ A/2   −A/2   −ω²²A  −ω²¹A ]
///   [ ω¹²A   ω¹¹A   M/2    M/2  ]
///   [ ω²²A   ω²¹A   M/2   −M/2  ]
inline BlockSystem dg1_block_system(const SparseMatrix& M, const SparseMatrix& A, double k)
{
    const auto w = Dg1Weights::for_step(k);
    BlockSystem s(4, 4);
    s.set(0, 0, 0.5, A).set(0, 1, 0.5, A).set(0, 2, -w(1, 2), A).set(0, 3, -w(1, 1), A);
    s.set(1, 0, 0.5, A).set(1, 1, -0.5, A).set(1, 2, -w(2, 2), A).set(1, 3, -w(2, 1), A);
    s.set(2, 0, w(1, 2), A).set(2, 1, w(1, 1), A).set(2, 2, 0.5, M).set(2, 3, 0.5, M);
    s.set(3, 0, w(2, 2), A).set(3, 1, w(2, 1), A).set(3, 2, 0.5, M).set(3, 3, -0.5, M);
    return s;
}

/// Advances (M, A) one interval at a time. The block matrix is factorized
/// for a step length and reused until a different k is requested.
class DgStepper {
public:
    DgStepper(Scheme scheme, const SparseMatrix& M, const SparseMatrix& A)
        : scheme_(scheme), M_(M), A_(A)
    {
        if (M.n_rows() != M.n_cols() || A.n_rows() != A.n_cols() || M.n_rows() != A.n_rows()) {
            throw DimensionError("DgStepper: M and A must be square of equal size");
        }
    }

    Scheme scheme() const { return scheme_; }
    std::size_t n_dof() const { return M_.n_rows(); }

    /// dG(0): solves [[A, −kA], [kA, M]] (U1, U2) = (A U1_prev, M U2_prev + f_load).
    DgState step_dg0(const DgState& prev, double k, std::span<const double> f_load)
    {
        check_state(prev);
        check_load(f_load);
        const std::size_t n = n_dof();
        Vector rhs(2 * n);
        const Vector a_u1 = matvec(A_, prev.u1);
        const Vector m_u2 = matvec(M_, prev.u2);
        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] = a_u1[i];
            rhs[n + i] = m_u2[i] + f_load[i];
        }
        const Vector x = solver_for(k).solve(rhs);
        return {Vector(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)),
                Vector(x.begin() + static_cast<std::ptrdiff_t>(n), x.end())};
    }

    /// dG(1): right side (A U1_prev, 0, M U2_prev + f_{n1}, f_{n2}); only the
    /// previous left limits carry history.
    DgInterval step_dg1(const DgState& prev, double k, const Dg1Moments& f)
    {
        check_state(prev);
        check_load(f.first);
        check_load(f.second);
        const std::size_t n = n_dof();
        Vector rhs(4 * n, 0.0);
        const Vector a_u1 = matvec(A_, prev.u1);
        const Vector m_u2 = matvec(M_, prev.u2);
        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] = a_u1[i];
            rhs[2 * n + i] = m_u2[i] + f.first[i];
            rhs[3 * n + i] = f.second[i];
        }
        const Vector x = solver_for(k).solve(rhs);
        auto part = [&](std::size_t b) {
            return Vector(x.begin() + static_cast<std::ptrdiff_t>(b * n),
                          x.begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
        };
        return {part(1), part(0), part(3), part(2)};
    }

private:
    void check_state(const DgState& s) const
    {
        if (s.u1.size() != n_dof() || s.u2.size() != n_dof()) {
            throw DimensionError("DgStepper: state size does not match the system");
        }
    }
    void check_load(std::span<const double> f) const
    {
        if (f.size() != n_dof()) {
            throw DimensionError("DgStepper: load size does not match the system");
        }
    }

    const LinearSolver& solver_for(double k)
    {
        if (!(k > 0.0)) {
            throw std::invalid_argument("DgStepper: step length must be positive");
        }
        if (!solver_ || k != cached_k_) {
            // Both block matrices are nonsymmetric: always the general path.
            const BlockSystem system = scheme_ == Scheme::dG0 ? dg0_block_system(M_, A_, k)
                                                              : dg1_block_system(M_, A_, k);
            solver_.reset();
            solver_ = std::make_unique<LinearSolver>(system.materialize(), false);
            cached_k_ = k;
        }
        return *solver_;
    }

    Scheme scheme_;
    const SparseMatrix& M_;
    const SparseMatrix& A_;
    std::unique_ptr<LinearSolver> solver_;
    double cached_k_ = 0.0;
};

inline DgState step_dg0(const SparseMatrix& M, const SparseMatrix& A, const DgState& prev,
                        double k, std::span<const double> f_load)
{
    return DgStepper(Scheme::dG0, M, A).step_dg0(prev, k, f_load);
}

inline DgInterval step_dg1(const SparseMatrix& M, const SparseMatrix& A, const DgState& prev,
                           double k, const Dg1Moments& f_moments)
{
    return DgStepper(Scheme::dG1, M, A).step_dg1(prev, k, f_moments);
}

/// U_{1,0}^- = R_h u0, U_{2,0}^- = P_h v0.
inline DgState initial_state(const FeSpace& space, const ExactField& u0, const ExactField& v0)
{
    return {ritz_project(space, u0, 0.0).coeffs(), l2_project(space, v0.value_at(0.0)).coeffs()};
}

enum class Side { left, right };

struct JumpPair {
    Vector u1;
    Vector u2;
};

/// Piecewise polynomial discrete solution with one-sided limits at the nodes.
class DgTrajectory {
public:
    DgTrajectory(Scheme scheme, TimePartition partition, DgState initial)
        : scheme_(scheme), partition_(std::move(partition)), initial_(std::move(initial))
    {
        intervals_.reserve(partition_.n_intervals());
    }

    Scheme scheme() const { return scheme_; }
    const TimePartition& partition() const { return partition_; }
    /// U_0^- (the projected initial data).
    const DgState& initial() const { return initial_; }
    /// Interval n = 1..N.
    const DgInterval& interval(std::size_t n) const { return intervals_.at(n - 1); }
    std::size_t n_completed() const { return intervals_.size(); }
    bool complete() const { return intervals_.size() == partition_.n_intervals(); }

    void push(DgInterval rec)
    {
        if (complete()) throw std::logic_error("DgTrajectory: all intervals already stored");
        intervals_.push_back(std::move(rec));
    }

    /// U_n^- for n = 0..N.
    DgState left_limit(std::size_t n) const
    {
        return n == 0 ? initial_ : interval(n).end_state();
    }

    /// (U1, U2)(t) from the given side. At t = 0 the left limit is the initial
    /// data; at t = T the right side falls back to the left limit.
    DgState eval(double t, Side side = Side::left) const
    {
        const double T = partition_.t_final();
        if (!(t >= 0.0 && t <= T)) {
            throw std::out_of_range("DgTrajectory::eval: t = " + std::to_string(t) +
                                    " outside [0, " + std::to_string(T) + "]");
        }
        if (!complete()) throw std::logic_error("DgTrajectory::eval: trajectory incomplete");
        const auto nodes = partition_.nodes();
        std::size_t n;
        if (side == Side::left) {
            if (t == 0.0) return initial_;
            // first node >= t closes the interval (t_{n−1}, t_n]
            n = static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), t) - nodes.begin());
        } else {
            if (t == T) return left_limit(partition_.n_intervals());
            n = static_cast<std::size_t>(std::upper_bound(nodes.begin(), nodes.end(), t) - nodes.begin());
        }
        return eval_in_interval(n, t);
    }

    /// Value of interval n's polynomial at t (extended by continuity to the closed interval).
    DgState eval_in_interval(std::size_t n, double t) const
    {
        const DgInterval& rec = interval(n);
        if (scheme_ == Scheme::dG0) return {rec.u1_minus, rec.u2_minus};
        const double t0 = partition_.t(n - 1);
        const double t1 = partition_.t(n);
        const double p = dg1_basis(1, t, t0, t1);
        const double m = dg1_basis(2, t, t0, t1);
        DgState s{Vector(rec.u1_plus.size()), Vector(rec.u2_plus.size())};
        for (std::size_t i = 0; i < s.u1.size(); ++i) {
            s.u1[i] = p * rec.u1_plus[i] + m * rec.u1_minus[i];
            s.u2[i] = p * rec.u2_plus[i] + m * rec.u2_minus[i];
        }
        return s;
    }

    /// [U]_n = U_n^+ − U_n^- for n = 0..N−1; [U]_0 uses the initial data.
    std::vector<JumpPair> jumps() const
    {
        if (!complete()) throw std::logic_error("DgTrajectory::jumps: trajectory incomplete");
        std::vector<JumpPair> out;
        out.reserve(partition_.n_intervals());
        for (std::size_t n = 0; n < partition_.n_intervals(); ++n) {
            const DgState minus = left_limit(n);
            const DgInterval& next = interval(n + 1);
            JumpPair j{Vector(minus.u1.size()), Vector(minus.u2.size())};
            for (std::size_t i = 0; i < j.u1.size(); ++i) {
                j.u1[i] = next.u1_plus[i] - minus.u1[i];
                j.u2[i] = next.u2_plus[i] - minus.u2[i];
            }
            out.push_back(std::move(j));
        }
        return out;
    }

private:
    Scheme scheme_;
    TimePartition partition_;
    DgState initial_;
    std::vector<DgInterval> intervals_;
};

/// Raised when a step fails inside `run`; names the interval.
class StepError : public std::runtime_error {
public:
    StepError(std::size_t interval, const std::string& cause)
        : std::runtime_error("step on interval " + std::to_string(interval) + " failed: " + cause),
          interval_(interval)
    {
    }
    std::size_t interval() const { return interval_; }

private:
    std::size_t interval_;
};

/// Marches the dG(q)-cG(1) scheme through the partition; interval n starts
/// from interval n − 1's left limit at t_{n−1}.
inline DgTrajectory run(Scheme scheme, const FeSpace& space, const SparseMatrix& M,
                        const SparseMatrix& A, const TimePartition& partition, DgState init,
                        const SpaceTimeFunction& f)
{
    if (M.n_rows() != space.n_dof() || A.n_rows() != space.n_dof()) {
        throw DimensionError("run: matrices do not match the space");
    }
    DgTrajectory traj(scheme, partition, std::move(init));
    DgStepper stepper(scheme, M, A);
    DgState prev = traj.initial();
    for (std::size_t n = 1; n <= partition.n_intervals(); ++n) {
        const double t0 = partition.t(n - 1);
        const double t1 = partition.t(n);
        try {
            if (scheme == Scheme::dG0) {
                DgState s = stepper.step_dg0(prev, t1 - t0, dg0_load(space, f, t0, t1));
                traj.push({s.u1, s.u1, s.u2, s.u2});
                prev = std::move(s);
            } else {
                DgInterval rec = stepper.step_dg1(prev, t1 - t0, dg1_moments(space, f, t0, t1));
                prev = rec.end_state();
                traj.push(std::move(rec));
            }
        } catch (const SolveError& e) {
            throw StepError(n, e.what());
        }
    }
    return traj;
}

} // namespace wavedg
