#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "wavedg/dg_time_stepper.hpp"
#include "wavedg/quadrature.hpp"
#include "wavedg/space_discretization.hpp"
#include "wavedg/sparse_matrix.hpp"

namespace wavedg {

/// ‖U1‖₁² + ‖U2‖² = U1ᵀ A U1 + U2ᵀ M U2.
inline double energy(const SparseMatrix& M, const SparseMatrix& A, const DgState& state)
{
    return quadratic_form(A, state.u1, state.u1) + quadratic_form(M, state.u2, state.u2);
}

/// Both sides of the discrete energy identity along a trajectory:
///
///   e_node[N] + jump_sum[N] = e0 + work[N]
///
/// with e_node[n] the energy of the left limit at t_n, jump_sum[n] the jump
/// energies at t_0..t_{n−1} and work[n] = 2∫_0^{t_n} (f, U2) dt. Every prefix
/// [0, t_n] satisfies the same identity.
struct EnergyLedger {
    std::vector<double> t;
    std::vector<double> e_node;
    std::vector<double> jump_energy; ///< ‖[U1]_n‖₁² + ‖[U2]_n‖², n = 0..N−1
    std::vector<double> jump_sum;    ///< cumulative, jump_sum[0] = 0
    std::vector<double> work;        ///< cumulative, work[0] = 0
    double e0 = 0.0;

    std::size_t n_intervals() const { return e_node.size() - 1; }

    double residual(std::size_t n) const { return e_node[n] + jump_sum[n] - e0 - work[n]; }
    double residual() const { return residual(n_intervals()); }

    /// |residual| relative to the largest term of the identity; zero for an
    /// all-zero ledger.
    double relative_residual() const
    {
        const std::size_t N = n_intervals();
        const double scale = std::max({e0, e_node[N], jump_sum[N], std::abs(work[N])});
        return scale > 0.0 ? std::abs(residual()) / scale : 0.0;
    }
};

/// Evaluates the energy identity. The work term uses (q+2)-point Gauss per
/// interval; since U2 is a polynomial of degree q in time with values in S_h,
/// (P_k P_h f, U2) integrates to the same value as (f, U2).
inline EnergyLedger audit(const DgTrajectory& traj, const FeSpace& space, const SparseMatrix& M,
                          const SparseMatrix& A, const SpaceTimeFunction& f)
{
    if (!traj.complete()) throw std::logic_error("audit: trajectory incomplete");
    const auto& part = traj.partition();
    const std::size_t N = part.n_intervals();
    const auto& q = gauss_legendre(degree(traj.scheme()) + 2);

    EnergyLedger L;
    L.e0 = energy(M, A, traj.initial());
    L.t.assign(part.nodes().begin(), part.nodes().end());
    L.e_node.push_back(L.e0);
    L.jump_sum.push_back(0.0);
    L.work.push_back(0.0);

    const auto jumps = traj.jumps();
    for (std::size_t n = 1; n <= N; ++n) {
        const JumpPair& j = jumps[n - 1];
        const double je = quadratic_form(A, j.u1, j.u1) + quadratic_form(M, j.u2, j.u2);
        L.jump_energy.push_back(je);
        L.jump_sum.push_back(L.jump_sum.back() + je);
        L.e_node.push_back(energy(M, A, traj.left_limit(n)));

        double w = 0.0;
        if (f) {
            const double t0 = part.t(n - 1);
            const double t1 = part.t(n);
            for (std::size_t g = 0; g < q.size(); ++g) {
                const double t = q.point(g, t0, t1);
                const Vector load = assemble_load(space, [&](double x) { return f(x, t); });
                w += q.weight(g, t0, t1) * dot(load, traj.eval_in_interval(n, t).u2);
            }
        }
        L.work.push_back(L.work.back() + 2.0 * w);
    }
    return L;
}

/// Writes the ledger as CSV: n, t, e_node, jump_sum, work, residual.
inline void write_ledger_csv(std::ostream& os, const EnergyLedger& L)
{
    os << "n,t,e_node,jump_sum,work,residual\n";
    char buf[256];
    for (std::size_t n = 0; n < L.e_node.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", n, L.t[n],
                      L.e_node[n], L.jump_sum[n], L.work[n], L.residual(n));
        os << buf;
    }
}

struct StabilityReport {
    double lhs = 0.0; ///< ‖U_{1,N}^-‖₁ + ‖U_{2,N}^-‖
    double rhs = 0.0; ///< ‖u_{h,0}‖₁ + ‖v_{h,0}‖ + ∫ ‖P_h f‖ dt
    double ratio = 0.0;
    bool degenerate = false; ///< both sides zero; ratio reported as 0
};

/// Observed constant of the stability estimate. The load enters through
/// ‖P_h f(t)‖, integrated with (q+2)-point Gauss per interval.
inline StabilityReport stability_bound_check(const DgTrajectory& traj, const FeSpace& space,
                                             const SparseMatrix& M, const SparseMatrix& A,
                                             const SpaceTimeFunction& f)
{
    if (!traj.complete()) throw std::logic_error("stability_bound_check: trajectory incomplete");
    auto a_norm = [&](const Vector& v) { return std::sqrt(quadratic_form(A, v, v)); };
    auto m_norm = [&](const Vector& v) { return std::sqrt(quadratic_form(M, v, v)); };

    const auto& part = traj.partition();
    const DgState end = traj.left_limit(part.n_intervals());
    StabilityReport r;
    r.lhs = a_norm(end.u1) + m_norm(end.u2);
    r.rhs = a_norm(traj.initial().u1) + m_norm(traj.initial().u2);
    if (f) {
        const auto& q = gauss_legendre(degree(traj.scheme()) + 2);
        const LinearSolver mass(M, true);
        for (std::size_t n = 1; n <= part.n_intervals(); ++n) {
            for (std::size_t g = 0; g < q.size(); ++g) {
                const double t = q.point(g, part.t(n - 1), part.t(n));
                const Vector ph_f = mass.solve(assemble_load(space, [&](double x) { return f(x, t); }));
                r.rhs += q.weight(g, part.t(n - 1), part.t(n)) * m_norm(ph_f);
            }
        }
    }
    if (r.rhs == 0.0 && r.lhs == 0.0) {
        r.degenerate = true;
    } else {
        r.ratio = r.lhs / r.rhs;
    }
    return r;
}

} // namespace wavedg
