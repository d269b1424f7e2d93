#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "wavedg/convergence_lab.hpp"

using namespace wavedg;
using namespace wavedg::testing;
using Catch::Approx;
using std::numbers::pi;

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(std::move(cells));
    }
    return rows;
}

StudyConfig temporal_config(Scheme scheme)
{
    StudyConfig c;
    c.scheme = scheme;
    c.nx_list = {512};
    c.nt_list = {8, 16, 32, 64, 128};
    c.t_final = 1.0;
    return c;
}

} // namespace

TEST_CASE("default example", "[manufactured]")
{
    const auto s = default_example();
    CHECK(s.a == 0.0);
    CHECK(s.b == Approx(pi));
    CHECK(s.u1.value(pi / 2, 0.0) == Approx(1.0).epsilon(1e-15));
    for (double x : {0.1, 1.0, 2.5}) {
        CHECK(s.u2.value(x, 0.0) == 0.0);
        CHECK(s.u1.value(x, 0.7) == Approx(std::sin(x) * std::cos(0.7)).epsilon(1e-15));
        CHECK(s.u2.value(x, 0.7) == Approx(-std::sin(x) * std::sin(0.7)).epsilon(1e-15));
    }
    // an empty source stands for f = 0
    CHECK((!s.f || s.f(1.0, 0.3) == 0.0));
}

TEST_CASE("manufactured solutions are self-consistent", "[manufactured][property]")
{
    std::mt19937 rng(101);
    for (const auto& s : {default_example(), sinwave_example(1.0, 3.0)}) {
        std::uniform_real_distribution<double> xs(s.a, s.b), ts(0.0, 3.0);
        const double d = 1e-4;
        for (int i = 0; i < 20; ++i) {
            const double x = xs(rng), t = ts(rng);
            const double u_t = (s.u1.value(x, t + d) - s.u1.value(x, t - d)) / (2 * d);
            const double u_tt = (s.u2.value(x, t + d) - s.u2.value(x, t - d)) / (2 * d);
            const double u_xx = (s.u1.value(x + d, t) - 2 * s.u1.value(x, t) + s.u1.value(x - d, t)) / (d * d);
            const double u_x = (s.u1.value(x + d, t) - s.u1.value(x - d, t)) / (2 * d);
            CHECK(std::abs(s.u2.value(x, t) - u_t) <= 1e-6);
            CHECK(std::abs(s.accel(x, t) - u_tt) <= 1e-6);
            CHECK(std::abs(s.u1.dx(x, t) - u_x) <= 1e-6);
            CHECK(std::abs(s.u1_xx(x, t) - u_xx) <= 1e-5);
            const double f = s.f ? s.f(x, t) : 0.0;
            CHECK(std::abs(f - (u_tt - u_xx)) <= 1e-5);
        }
        CHECK(std::abs(s.u1.value(s.a, 0.4)) <= 1e-15);
        CHECK(std::abs(s.u1.value(s.b, 0.4)) <= 1e-15);
    }
}

TEST_CASE("make_problem", "[manufactured]")
{
    const FeSpace space(build_uniform_mesh(0, 2, 8));
    CHECK(make_problem("sinwave", space).name == "sinwave");
    CHECK(make_problem("polyt", space).name == "polyt");
    CHECK(make_problem("none", space).name == "none");
    CHECK_THROWS_AS(make_problem("bogus", space), std::invalid_argument);
}

TEST_CASE("eoc", "[rates]")
{
    CHECK(eoc(1e-2, 2.5e-3, 0.1, 0.05) == Approx(2.0).epsilon(1e-14));
    CHECK(eoc(1e-2, 5e-3, 0.1, 0.05) == Approx(1.0).epsilon(1e-14));
    CHECK(std::isnan(eoc(1e-13, 1e-14, 0.1, 0.05)));
    CHECK(std::isnan(eoc(1e-3, 1e-3, 0.1, 0.1)));
}

TEST_CASE("semidiscrete reference matches per-mode closed form", "[reference]")
{
    const Vector lambda{0.5, 2.0, 9.0, 30.0};
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < lambda.size(); ++i) t.push_back({i, i, lambda[i]});
    const auto A = SparseMatrix::from_triplets(4, 4, t, true);
    const auto M = SparseMatrix::identity(4);
    const DgState init{{1.0, -0.5, 0.25, 2.0}, {0.3, 0.0, -1.0, 0.5}};
    const SemidiscreteReference ref(M, A, init);
    for (double time : {0.0, 0.3, 1.7}) {
        const DgState s = ref(time);
        for (std::size_t i = 0; i < 4; ++i) {
            const double w = std::sqrt(lambda[i]);
            const double u = init.u1[i] * std::cos(w * time) + init.u2[i] / w * std::sin(w * time);
            const double v = -init.u1[i] * w * std::sin(w * time) + init.u2[i] * std::cos(w * time);
            CHECK(std::abs(s.u1[i] - u) <= 1e-12);
            CHECK(std::abs(s.u2[i] - v) <= 1e-12);
        }
    }

    const FeSpace space(build_uniform_mesh(0, pi, 32));
    const auto Mf = assemble_mass(space);
    const auto Af = assemble_stiffness(space);
    const auto sol = default_example();
    const DgState i0 = initial_state(space, sol.u1, sol.u2);
    const SemidiscreteReference fe(Mf, Af, i0);
    const double e0 = quadratic_form(Af, i0.u1, i0.u1) + quadratic_form(Mf, i0.u2, i0.u2);
    const DgState s = fe(2.3);
    CHECK(quadratic_form(Af, s.u1, s.u1) + quadratic_form(Mf, s.u2, s.u2) == Approx(e0).epsilon(1e-12));
}

TEST_CASE("study helpers", "[study]")
{
    CHECK(spatial_steps(Scheme::dG1, 0.1, 1.0) == 10);
    CHECK(spatial_steps(Scheme::dG1, pi / 8, 1.0) == 3);
    CHECK(spatial_steps(Scheme::dG0, 0.1, 1.0) == 100);
    CHECK(spatial_steps(Scheme::dG0, 0.01, 1.0) == 2000);

    const std::size_t nx = temporal_floor_nx(Scheme::dG1, 1.0, 128, 0.0, pi);
    const double h = pi / static_cast<double>(nx);
    CHECK(h * h <= 0.01 * std::pow(1.0 / 128, 2) * (1 + 1e-12));
    const double h_coarser = pi / static_cast<double>(nx - 1);
    CHECK(h_coarser * h_coarser > 0.01 * std::pow(1.0 / 128, 2));
}

TEST_CASE("ladders need two distinct entries", "[study]")
{
    StudyConfig c = temporal_config(Scheme::dG0);
    c.nx_list = {16};
    c.nt_list = {8};
    CHECK_THROWS_AS(run_temporal_study(c), std::invalid_argument);
    c.nt_list = {8, 8};
    CHECK_THROWS_AS(run_temporal_study(c), std::invalid_argument);
    c.nx_list = {16};
    CHECK_THROWS_AS(run_spatial_study(c), std::invalid_argument);
}

TEST_CASE("temporal study rates", "[study][slow]")
{
    const RateTable t0 = run_temporal_study(temporal_config(Scheme::dG0));
    const RateTable t1 = run_temporal_study(temporal_config(Scheme::dG1));
    // column 3 is the uniform-in-time u1 L2 error
    INFO("dG0 " << t0.last_eoc(3) << " dG1 " << t1.last_eoc(3));
    CHECK(t0.last_eoc(3) >= 0.85);
    CHECK(t0.last_eoc(3) <= 1.15);
    CHECK(t1.last_eoc(3) >= 1.8);
    CHECK(t1.last_eoc(3) <= 2.6);
    for (const auto* t : {&t0, &t1}) {
        REQUIRE(t->rows.size() == 5);
        CHECK(t->monotone(3));
        CHECK(t->rows.front().resolution == 8);
        CHECK(t->rows.back().resolution == 128);
        CHECK(std::isnan(t->rows.front().eoc[3]));
        for (const auto& r : t->rows) {
            // sup over time dominates the final-time sample
            CHECK(r.err[3] >= r.err[0]);
            CHECK(r.err[4] >= r.err[1]);
            CHECK(r.err[5] >= r.err[2]);
        }
    }
}

TEST_CASE("spatial study rates", "[study][slow]")
{
    StudyConfig c;
    c.scheme = Scheme::dG1;
    c.nx_list = {64, 8, 32, 16};
    const RateTable t = run_spatial_study(c);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows.front().resolution == 8);
    INFO("L2 " << t.last_eoc(0) << " H1 " << t.last_eoc(1));
    CHECK(t.last_eoc(0) >= 1.8);
    CHECK(t.last_eoc(0) <= 2.2);
    CHECK(t.last_eoc(1) >= 0.85);
    CHECK(t.last_eoc(1) <= 1.15);
    CHECK(t.monotone(0));
    CHECK(t.monotone(1));
}

TEST_CASE("exactly reproduced solution gives no rate", "[study]")
{
    StudyConfig c;
    c.scheme = Scheme::dG1;
    c.problem = "polyt";
    c.nx_list = {16};
    c.nt_list = {4, 8, 16};
    const RateTable t = run_temporal_study(c);
    for (const auto& r : t.rows) {
        for (std::size_t col = 0; col < 6; ++col) {
            CHECK(r.err[col] <= 1e-11);
            CHECK(std::isnan(r.eoc[col]));
        }
    }
}

TEST_CASE("uniform norm sampling is adequate", "[study]")
{
    const FeSpace space(build_uniform_mesh(0, pi, 64));
    const auto M = assemble_mass(space);
    const auto A = assemble_stiffness(space);
    const auto sol = default_example();
    for (Scheme scheme : {Scheme::dG0, Scheme::dG1}) {
        const auto traj = run(scheme, space, M, A, TimePartition::uniform(1.0, 16),
                              initial_state(space, sol.u1, sol.u2), sol.f);
        const NormTriple s5 = uniform_errors(traj, space, sol, 5);
        const NormTriple s10 = uniform_errors(traj, space, sol, 10);
        CHECK(std::abs(s10.u1_l2 - s5.u1_l2) <= 0.05 * s5.u1_l2);
        CHECK(std::abs(s10.u1_h1 - s5.u1_h1) <= 0.05 * s5.u1_h1);
        CHECK(std::abs(s10.u2_l2 - s5.u2_l2) <= 0.05 * s5.u2_l2);
        CHECK_THROWS_AS(uniform_errors(traj, space, sol, 1), std::invalid_argument);

        const NormTriple nod = nodal_errors(traj, space, sol);
        CHECK(s5.u1_l2 >= nod.u1_l2);
    }

    const auto zero = zero_example();
    const auto traj = run(Scheme::dG1, space, M, A, TimePartition::uniform(1.0, 4),
                          initial_state(space, zero.u1, zero.u2), zero.f);
    const NormTriple z = uniform_errors(traj, space, zero);
    CHECK(z.u1_l2 + z.u1_h1 + z.u2_l2 == 0.0);
}

TEST_CASE("studies are independent of the thread count", "[study]")
{
    StudyConfig c;
    c.scheme = Scheme::dG1;
    c.nx_list = {32};
    c.nt_list = {4, 8, 16, 32};
    c.threads = 1;
    const RateTable serial = run_temporal_study(c);
    c.threads = 4;
    const RateTable parallel = run_temporal_study(c);
    std::ostringstream a, b;
    write_csv(a, serial);
    write_csv(b, parallel);
    CHECK(a.str() == b.str());
}

TEST_CASE("CSV, JSON and plot data agree", "[study][io]")
{
    StudyConfig c;
    c.scheme = Scheme::dG0;
    c.nx_list = {8, 16, 32};
    const RateTable t = run_spatial_study(c);
    std::ostringstream csv;
    write_csv(csv, t);
    const auto rows = parse_csv(csv.str());
    REQUIRE(rows.size() == 4);
    REQUIRE(rows[0].size() == 15);
    CHECK(rows[0][0] == "resolution");
    CHECK(rows[0][1] == "k");
    CHECK(rows[0][2] == "h");
    CHECK(rows[0][3] == "err_u1_l2_nodal");
    CHECK(rows[0][9] == "eoc_u1_l2_nodal");

    const auto j = to_json(t);
    CHECK(j["study"] == "spatial");
    CHECK(j["scheme"] == "dg0");
    for (std::size_t r = 0; r < 3; ++r) {
        const auto& jr = j["rows"][r];
        for (std::size_t col = 1; col < 15; ++col) {
            const std::string& name = rows[0][col];
            const std::string& cell = rows[r + 1][col];
            if (cell == "nan") {
                CHECK(jr[name].is_null());
                continue;
            }
            const double v = std::stod(cell);
            const double w = jr[name].get<double>();
            CHECK(std::abs(v - w) <= 1e-15 * std::abs(v));
        }
    }

    std::ostringstream plot;
    write_plot_data(plot, t);
    const std::string p = plot.str();
    std::size_t blocks = 0;
    for (std::size_t pos = p.find("# h "); pos != std::string::npos; pos = p.find("# h ", pos + 1)) ++blocks;
    CHECK(blocks == 6);
}

TEST_CASE("interpolation probe", "[probe]")
{
    auto cos_t = [](double t) { return std::cos(t); };
    for (int q : {0, 1}) {
        double prev = 0.0;
        for (std::size_t N : {8u, 16u, 32u, 64u, 128u}) {
            const auto r = interpolation_rate_probe(cos_t, TimePartition::uniform(1.0, N), q);
            CHECK(r.nodal_residual <= 1e-12);
            CHECK(r.moment_residual <= 1e-12);
            if (N > 8) {
                const double rate = std::log2(prev / r.error);
                INFO("q=" << q << " N=" << N << " eoc=" << rate);
                CHECK(rate >= q + 0.85);
                CHECK(rate <= q + 1.15);
            }
            prev = r.error;
        }
    }

    const TimePartition part({0.0, 0.2, 0.5, 0.55, 1.0});
    const auto c = interpolation_rate_probe([](double) { return 2.5; }, part, 0);
    CHECK(c.error <= 1e-15);
    const auto l = interpolation_rate_probe([](double t) { return 2.0 - 3.0 * t; }, part, 1);
    CHECK(l.error <= 1e-13);
    CHECK_THROWS_AS(interpolation_rate_probe(cos_t, part, 2), std::invalid_argument);
}
