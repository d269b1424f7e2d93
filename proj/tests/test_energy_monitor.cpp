#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "wavedg/convergence_lab.hpp"
#include "wavedg/energy_monitor.hpp"

using namespace wavedg;
using namespace wavedg::testing;
using Catch::Approx;
using std::numbers::pi;

namespace {

struct Run {
    FeSpace space;
    SparseMatrix M;
    SparseMatrix A;
    DgTrajectory traj;

    Run(Scheme scheme, std::size_t nx, std::size_t N, double T, const ManufacturedSolution& sol)
        : Run(scheme, FeSpace(build_uniform_mesh(sol.a, sol.b, nx)), N, T, sol)
    {
    }
    Run(Scheme scheme, FeSpace s, std::size_t N, double T, const ManufacturedSolution& sol)
        : space(std::move(s)), M(assemble_mass(space)), A(assemble_stiffness(space)),
          traj(run(scheme, space, M, A, TimePartition::uniform(T, N), initial_state(space, sol.u1, sol.u2), sol.f))
    {
    }
};

} // namespace

TEST_CASE("energy of simple states", "[energy]")
{
    const FeSpace s(build_uniform_mesh(0, pi, 256));
    const auto M = assemble_mass(s);
    const auto A = assemble_stiffness(s);
    const Vector z(s.n_dof(), 0.0);
    CHECK(energy(M, A, {z, z}) == 0.0);

    const auto sol = default_example();
    const DgState init = initial_state(s, sol.u1, sol.u2);
    const double h = s.h();
    CHECK(std::abs(energy(M, A, init) - pi / 2) <= h * h);

    std::mt19937 rng(2);
    const DgState r{random_vector(rng, s.n_dof()), random_vector(rng, s.n_dof())};
    DgState neg = r;
    for (auto& v : neg.u1) v = -v;
    for (auto& v : neg.u2) v = -v;
    CHECK(energy(M, A, neg) == energy(M, A, r));
}

TEST_CASE("unforced energy identity on every combination", "[energy][property]")
{
    const auto sol = default_example();
    for (Scheme scheme : {Scheme::dG0, Scheme::dG1}) {
        for (std::size_t nx : {16u, 64u}) {
            for (std::size_t N : {10u, 100u}) {
                const Run r(scheme, nx, N, 1.0, sol);
                const EnergyLedger L = audit(r.traj, r.space, r.M, r.A, sol.f);
                INFO(to_string(scheme) << " nx=" << nx << " N=" << N);
                CHECK(std::abs(L.e_node[N] + L.jump_sum[N] - L.e0) <= 1e-10 * L.e0);
                CHECK(L.relative_residual() <= 1e-10);
                CHECK(L.e_node[N] <= L.e0);
                for (std::size_t n = 0; n <= N; ++n) {
                    CHECK(L.e_node[n] >= 0.0);
                    CHECK(L.jump_sum[n] >= 0.0);
                    CHECK(L.work[n] == 0.0);
                    if (n > 0) {
                        CHECK(L.jump_energy[n - 1] >= 0.0);
                        CHECK(L.e_node[n] <= L.e_node[n - 1] * (1 + 1e-13));
                    }
                    // every prefix satisfies the identity
                    CHECK(std::abs(L.residual(n)) <= 1e-10 * L.e0);
                }
            }
        }
    }
}

TEST_CASE("forced energy identity and the work term", "[energy]")
{
    ManufacturedSolution sol = default_example();
    sol.f = [](double x, double t) { return std::sin(3 * x) * (0.5 + std::sin(2 * t)) + x * (pi - x); };
    for (Scheme scheme : {Scheme::dG0, Scheme::dG1}) {
        const Run r(scheme, 24, 100, 2.0, sol);
        const EnergyLedger L = audit(r.traj, r.space, r.M, r.A, sol.f);
        CHECK(L.relative_residual() <= 1e-9);

        // 2∫(f, U2) dt with 16-point Gauss in time per interval. The scheme's
        // own load uses low-order Gauss, so agreement is quadrature-limited.
        const auto& part = r.traj.partition();
        const auto& g = gauss_legendre(16);
        double work = 0.0;
        for (std::size_t n = 1; n <= part.n_intervals(); ++n) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double t = g.point(i, part.t(n - 1), part.t(n));
                const Vector b = assemble_load(r.space, [&](double x) { return sol.f(x, t); });
                work += 2.0 * g.weight(i, part.t(n - 1), part.t(n)) * dot(b, r.traj.eval_in_interval(n, t).u2);
            }
        }
        const double scale = std::max({L.e0, L.e_node.back(), L.jump_sum.back(), std::abs(work)});
        CHECK(std::abs(L.work.back() - work) <= 1e-9 * scale);
        CHECK(std::abs(L.e_node.back() + L.jump_sum.back() - L.e0 - work) <= 1e-9 * scale);
    }
}

TEST_CASE("ledger CSV", "[energy]")
{
    const auto sol = default_example();
    const Run r(Scheme::dG1, 8, 4, 1.0, sol);
    const EnergyLedger L = audit(r.traj, r.space, r.M, r.A, sol.f);
    std::ostringstream os;
    write_ledger_csv(os, L);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "n,t,e_node,jump_sum,work,residual");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::istringstream cells(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
        REQUIRE(v.size() == 6);
        CHECK(v[2] == L.e_node[rows]);
        CHECK(v[3] == L.jump_sum[rows]);
        ++rows;
    }
    CHECK(rows == 5);
}

TEST_CASE("stability ratio", "[energy][stability]")
{
    const auto sol = default_example();
    for (Scheme scheme : {Scheme::dG0, Scheme::dG1}) {
        const Run r(scheme, 32, 20, 1.0, sol);
        const auto s = stability_bound_check(r.traj, r.space, r.M, r.A, sol.f);
        CHECK(!s.degenerate);
        CHECK(s.ratio > 0.0);
        CHECK(s.ratio <= std::sqrt(2.0));

        const Run z(scheme, 8, 4, 1.0, zero_example());
        const auto d = stability_bound_check(z.traj, z.space, z.M, z.A, {});
        CHECK(d.degenerate);
        CHECK(d.lhs == 0.0);
        CHECK(d.rhs == 0.0);
    }

    // A load adds its integrated norm to the right side.
    ManufacturedSolution forced = zero_example();
    forced.f = [](double x, double) { return std::sin(x); };
    const Run f(Scheme::dG1, 64, 16, 1.0, forced);
    const auto s = stability_bound_check(f.traj, f.space, f.M, f.A, forced.f);
    CHECK(s.rhs == Approx(std::sqrt(pi / 2)).epsilon(1e-3));
}

TEST_CASE("doubling the horizon does not grow the energy", "[energy][stability]")
{
    const auto sol = default_example();
    for (Scheme scheme : {Scheme::dG0, Scheme::dG1}) {
        const Run r1(scheme, 16, 1000, 1.0, sol);
        const Run r10(scheme, 16, 10000, 10.0, sol);
        const auto L1 = audit(r1.traj, r1.space, r1.M, r1.A, sol.f);
        const auto L10 = audit(r10.traj, r10.space, r10.M, r10.A, sol.f);
        CHECK(L1.e_node.back() <= L1.e0);
        CHECK(L10.e_node.back() <= L10.e0);
        const double drift = std::abs(stability_bound_check(r10.traj, r10.space, r10.M, r10.A, sol.f).ratio -
                                      stability_bound_check(r1.traj, r1.space, r1.M, r1.A, sol.f).ratio);
        INFO(to_string(scheme) << " drift " << drift);
        CHECK(drift <= 0.01);
    }
}

TEST_CASE("audit requires a complete trajectory", "[energy]")
{
    const FeSpace s(build_uniform_mesh(0, 1, 4));
    const auto M = assemble_mass(s);
    const auto A = assemble_stiffness(s);
    const DgTrajectory partial(Scheme::dG0, TimePartition::uniform(1, 3), {Vector(3), Vector(3)});
    CHECK_THROWS_AS(audit(partial, s, M, A, {}), std::logic_error);
    CHECK_THROWS_AS(stability_bound_check(partial, s, M, A, {}), std::logic_error);
}
