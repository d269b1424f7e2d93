#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wavedg/dg_time_stepper.hpp"
#include "wavedg/quadrature.hpp"
#include "wavedg/space_discretization.hpp"

namespace wavedg {

/// Exact solution of ü − u″ = f with homogeneous Dirichlet data.
/// `accel` (∂t u2) and `u1_xx` are optional and only used for consistency
/// checks of the source term.
struct ManufacturedSolution {
    std::string name;
    double a = 0.0;
    double b = std::numbers::pi;
    ExactField u1;
    ExactField u2;
    SpaceTimeFunction f; ///< empty means f = 0
    SpaceTimeFunction accel;
    SpaceTimeFunction u1_xx;
};

/// u = sin(c(x − a)) cos(ct), c = π/(b − a). On (0, π) this is sin x cos t
/// with f = 0, u(x, 0) = sin x, u̇(x, 0) = 0.
inline ManufacturedSolution sinwave_example(double a = 0.0, double b = std::numbers::pi)
{
    const double c = std::numbers::pi / (b - a);
    ManufacturedSolution s;
    s.name = "sinwave";
    s.a = a;
    s.b = b;
    s.u1 = {[=](double x, double t) { return std::sin(c * (x - a)) * std::cos(c * t); },
            [=](double x, double t) { return c * std::cos(c * (x - a)) * std::cos(c * t); }};
    s.u2 = {[=](double x, double t) { return -c * std::sin(c * (x - a)) * std::sin(c * t); },
            [=](double x, double t) { return -c * c * std::cos(c * (x - a)) * std::sin(c * t); }};
    s.accel = [=](double x, double t) { return -c * c * std::sin(c * (x - a)) * std::cos(c * t); };
    s.u1_xx = [=](double x, double t) { return -c * c * std::sin(c * (x - a)) * std::cos(c * t); };
    return s;
}

inline ManufacturedSolution default_example() { return sinwave_example(); }

/// u1 = (1 + t) w, u2 = w for the P1 interpolant w of sin(c(x − a)), with
/// f = (1 + t) g where g ∈ S_h solves M g = A w. The semidiscrete solution is
/// linear in time, so dG(1) reproduces it exactly. Tied to `space`.
inline ManufacturedSolution polyt_example(const FeSpace& space)
{
    const double a = space.mesh().a();
    const double b = space.mesh().b();
    const double c = std::numbers::pi / (b - a);
    auto w = std::make_shared<FeFunction>(interpolate(space, [=](double x) { return std::sin(c * (x - a)); }));
    const SparseMatrix M = assemble_mass(space);
    const SparseMatrix A = assemble_stiffness(space);
    auto g = std::make_shared<FeFunction>(space, solve(M, matvec(A, w->coeffs()), true));

    ManufacturedSolution s;
    s.name = "polyt";
    s.a = a;
    s.b = b;
    s.u1 = {[w](double x, double t) { return (1.0 + t) * (*w)(x); },
            [w](double x, double t) { return (1.0 + t) * w->derivative(x); }};
    s.u2 = {[w](double x, double) { return (*w)(x); },
            [w](double x, double) { return w->derivative(x); }};
    s.f = [g](double x, double t) { return (1.0 + t) * (*g)(x); };
    return s;
}

/// u ≡ 0, f = 0.
inline ManufacturedSolution zero_example(double a = 0.0, double b = std::numbers::pi)
{
    ManufacturedSolution s;
    s.name = "none";
    s.a = a;
    s.b = b;
    const SpaceTimeFunction zero = [](double, double) { return 0.0; };
    s.u1 = {zero, zero};
    s.u2 = {zero, zero};
    s.accel = zero;
    s.u1_xx = zero;
    return s;
}

/// Builtin problems by name: "sinwave", "polyt", "none".
inline ManufacturedSolution make_problem(std::string_view name, const FeSpace& space)
{
    const double a = space.mesh().a();
    const double b = space.mesh().b();
    if (name == "sinwave") return sinwave_example(a, b);
    if (name == "polyt") return polyt_example(space);
    if (name == "none") return zero_example(a, b);
    throw std::invalid_argument("unknown problem '" + std::string(name) +
                                "' (expected sinwave, polyt or none)");
}

struct NormTriple {
    double u1_l2 = 0.0;
    double u1_h1 = 0.0;
    double u2_l2 = 0.0;
};

inline NormTriple state_errors(const FeSpace& space, const DgState& s,
                               const ManufacturedSolution& sol, double t)
{
    const ErrorNorms e1 = error_norms(space, s.u1, sol.u1, t);
    const ErrorNorms e2 = error_norms(space, s.u2, ExactField{sol.u2.value, {}}, t);
    return {e1.l2, e1.h1, e2.l2};
}

/// Errors of the left limits at t_N.
inline NormTriple nodal_errors(const DgTrajectory& traj, const FeSpace& space,
                               const ManufacturedSolution& sol)
{
    const std::size_t N = traj.partition().n_intervals();
    return state_errors(space, traj.left_limit(N), sol, traj.partition().t_final());
}

/// Number of interior samples per interval for the uniform-in-time norm.
inline constexpr std::size_t kDefaultUniformSamples = 5;

/// sup over (0, t_N) of the errors, sampled at `samples` equispaced interior
/// points of every interval plus both one-sided endpoint limits.
inline NormTriple uniform_errors(const DgTrajectory& traj, const FeSpace& space,
                                 const ManufacturedSolution& sol,
                                 std::size_t samples = kDefaultUniformSamples)
{
    if (samples < 2) throw std::invalid_argument("uniform_errors: need at least 2 samples");
    const auto& part = traj.partition();
    NormTriple sup;
    for (std::size_t n = 1; n <= part.n_intervals(); ++n) {
        const double t0 = part.t(n - 1);
        const double t1 = part.t(n);
        for (std::size_t j = 0; j <= samples + 1; ++j) {
            const double t = j == samples + 1 ? t1
                                              : t0 + (t1 - t0) * static_cast<double>(j) /
                                                         static_cast<double>(samples + 1);
            const NormTriple e = state_errors(space, traj.eval_in_interval(n, t), sol, t);
            sup.u1_l2 = std::max(sup.u1_l2, e.u1_l2);
            sup.u1_h1 = std::max(sup.u1_h1, e.u1_h1);
            sup.u2_l2 = std::max(sup.u2_l2, e.u2_l2);
        }
    }
    return sup;
}

/// Exact-in-time solution of the unforced semidiscrete system
/// M ü + A u = 0 from a given initial state, by the generalized eigenpairs
/// A v = λ M v. This is the solution the time discretization approximates,
/// so U − u_h is the pure temporal error. Dense; meant for n_dof in the low
/// thousands.
class SemidiscreteReference {
public:
    SemidiscreteReference(const SparseMatrix& M, const SparseMatrix& A, const DgState& init)
    {
        const auto n = static_cast<Eigen::Index>(M.n_rows());
        // Row-major dense copies read as column-major: fine, both are symmetric.
        const Eigen::MatrixXd dm = Eigen::Map<const Eigen::MatrixXd>(M.to_dense().data(), n, n);
        const Eigen::MatrixXd da = Eigen::Map<const Eigen::MatrixXd>(A.to_dense().data(), n, n);
        const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(da, dm);
        if (es.info() != Eigen::Success) {
            throw std::runtime_error("SemidiscreteReference: eigensolver failed");
        }
        modes_ = es.eigenvectors(); // M-orthonormal
        omega_ = es.eigenvalues().cwiseSqrt();
        const Eigen::Map<const Eigen::VectorXd> u0(init.u1.data(), n);
        const Eigen::Map<const Eigen::VectorXd> v0(init.u2.data(), n);
        c_ = modes_.transpose() * (dm * u0);
        d_ = modes_.transpose() * (dm * v0);
    }

    DgState operator()(double t) const
    {
        const Eigen::ArrayXd cw = (omega_.array() * t).cos();
        const Eigen::ArrayXd sw = (omega_.array() * t).sin();
        const Eigen::VectorXd u = modes_ * (c_.array() * cw + d_.array() * sw / omega_.array()).matrix();
        const Eigen::VectorXd v = modes_ * (-c_.array() * omega_.array() * sw + d_.array() * cw).matrix();
        return {Vector(u.data(), u.data() + u.size()), Vector(v.data(), v.data() + v.size())};
    }

private:
    Eigen::MatrixXd modes_;
    Eigen::VectorXd omega_;
    Eigen::VectorXd c_;
    Eigen::VectorXd d_;
};

/// Errors of `s` against `ref` in the discrete norms: u1 in the M- and
/// A-norms, u2 in the M-norm.
inline NormTriple discrete_errors(const SparseMatrix& M, const SparseMatrix& A, const DgState& s,
                                  const DgState& ref)
{
    Vector e1(s.u1.size());
    Vector e2(s.u2.size());
    for (std::size_t i = 0; i < e1.size(); ++i) {
        e1[i] = s.u1[i] - ref.u1[i];
        e2[i] = s.u2[i] - ref.u2[i];
    }
    return {std::sqrt(quadratic_form(M, e1, e1)), std::sqrt(quadratic_form(A, e1, e1)),
            std::sqrt(quadratic_form(M, e2, e2))};
}

/// Errors at or below this are treated as exact and yield no rate.
inline constexpr double kEocFloor = 1e-11;

/// log(e_prev/e_cur) / log(m_prev/m_cur); NaN when either error is at the floor.
inline double eoc(double e_prev, double e_cur, double m_prev, double m_cur)
{
    if (!(e_prev > kEocFloor) || !(e_cur > kEocFloor) || m_prev == m_cur) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return std::log(e_prev / e_cur) / std::log(m_prev / m_cur);
}

inline constexpr std::array<std::string_view, 6> kErrorColumns = {
    "err_u1_l2_nodal", "err_u1_h1_nodal", "err_u2_l2_nodal",
    "err_u1_l2_unif",  "err_u1_h1_unif",  "err_u2_l2_unif"};

struct RateRow {
    std::size_t resolution = 0; ///< N for temporal studies, nx for spatial ones
    double k = 0.0;
    double h = 0.0;
    std::array<double, 6> err{};
    std::array<double, 6> eoc{};
    bool floor_limited = false;
};

enum class StudyKind { temporal, spatial };

struct RateTable {
    StudyKind kind = StudyKind::temporal;
    Scheme scheme = Scheme::dG1;
    std::vector<RateRow> rows;

    double mesh_parameter(const RateRow& r) const { return kind == StudyKind::temporal ? r.k : r.h; }

    /// Fills per-pair EOC columns; the first row has none.
    void compute_eoc()
    {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t c = 0; c < 6; ++c) {
                rows[i].eoc[c] = i == 0 ? std::numeric_limits<double>::quiet_NaN()
                                        : eoc(rows[i - 1].err[c], rows[i].err[c],
                                              mesh_parameter(rows[i - 1]), mesh_parameter(rows[i]));
            }
            rows[i].floor_limited = std::any_of(rows[i].err.begin(), rows[i].err.end(),
                                                [](double e) { return e <= kEocFloor; });
        }
    }

    double last_eoc(std::size_t column) const { return rows.back().eoc[column]; }

    /// Column errors strictly decrease along the ladder; a floor-limited final
    /// row is exempt.
    bool monotone(std::size_t column) const
    {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (i + 1 == rows.size() && rows[i].floor_limited) break;
            if (!(rows[i].err[column] < rows[i - 1].err[column])) return false;
        }
        return true;
    }
};

struct StudyConfig {
    Scheme scheme = Scheme::dG1;
    std::vector<std::size_t> nx_list{512}; ///< temporal study uses nx_list.front()
    std::vector<std::size_t> nt_list{8, 16, 32, 64, 128};
    double t_final = 1.0;
    double a = 0.0;
    double b = std::numbers::pi;
    std::size_t samples = kDefaultUniformSamples;
    std::string problem = "sinwave";
    unsigned threads = 1;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& fn)
{
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

/// Smallest nx with h² ≤ 0.01 k^{q+1} at the finest step, so that spatial
/// error stays out of temporal rates.
inline std::size_t temporal_floor_nx(Scheme scheme, double t_final, std::size_t n_max, double a,
                                     double b)
{
    const double k = t_final / static_cast<double>(n_max);
    const double h = std::sqrt(0.01 * std::pow(k, degree(scheme) + 1));
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil((b - a) / h)));
}

/// Time steps for the spatial study: k ≈ h for dG(1), k ≈ h² for dG(0)
/// capped at 2000 steps.
inline std::size_t spatial_steps(Scheme scheme, double h, double t_final)
{
    const double k_target = scheme == Scheme::dG1 ? h : h * h;
    auto n = static_cast<std::size_t>(std::ceil(t_final / k_target - 1e-9));
    n = std::max<std::size_t>(n, 1);
    return scheme == Scheme::dG0 ? std::min<std::size_t>(n, 2000) : n;
}

/// One full solve and its six error measures.
inline RateRow measure(Scheme scheme, std::size_t nx, std::size_t nt, const StudyConfig& cfg)
{
    const FeSpace space(build_uniform_mesh(cfg.a, cfg.b, nx));
    const ManufacturedSolution sol = make_problem(cfg.problem, space);
    const SparseMatrix M = assemble_mass(space);
    const SparseMatrix A = assemble_stiffness(space);
    const auto part = TimePartition::uniform(cfg.t_final, nt);
    const DgTrajectory traj = run(scheme, space, M, A, part, initial_state(space, sol.u1, sol.u2), sol.f);
    const NormTriple nod = nodal_errors(traj, space, sol);
    const NormTriple uni = uniform_errors(traj, space, sol, cfg.samples);
    RateRow r;
    r.k = part.k_max();
    r.h = space.h();
    r.err = {nod.u1_l2, nod.u1_h1, nod.u2_l2, uni.u1_l2, uni.u1_h1, uni.u2_l2};
    return r;
}

namespace detail {

template <class T>
std::vector<T> sorted_ladder(std::vector<T> v, const char* what)
{
    if (v.size() < 2) {
        throw std::invalid_argument(std::string(what) + " ladder needs at least two entries");
    }
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
        throw std::invalid_argument(std::string(what) + " ladder has repeated entries");
    }
    return v;
}

} // namespace detail

/// Fixed nx (cfg.nx_list.front()), sweep over cfg.nt_list.
inline RateTable run_temporal_study(const StudyConfig& cfg)
{
    if (cfg.nx_list.empty()) throw std::invalid_argument("temporal study: nx missing");
    const auto nts = detail::sorted_ladder(cfg.nt_list, "nt");
    RateTable table{StudyKind::temporal, cfg.scheme, std::vector<RateRow>(nts.size())};
    parallel_for(nts.size(), cfg.threads, [&](std::size_t i) {
        table.rows[i] = measure(cfg.scheme, cfg.nx_list.front(), nts[i], cfg);
        table.rows[i].resolution = nts[i];
    });
    table.compute_eoc();
    return table;
}

/// Sweep over cfg.nx_list with k coupled to h (see spatial_steps).
inline RateTable run_spatial_study(const StudyConfig& cfg)
{
    const auto nxs = detail::sorted_ladder(cfg.nx_list, "nx");
    RateTable table{StudyKind::spatial, cfg.scheme, std::vector<RateRow>(nxs.size())};
    parallel_for(nxs.size(), cfg.threads, [&](std::size_t i) {
        const double h = (cfg.b - cfg.a) / static_cast<double>(nxs[i]);
        table.rows[i] = measure(cfg.scheme, nxs[i], spatial_steps(cfg.scheme, h, cfg.t_final), cfg);
        table.rows[i].resolution = nxs[i];
    });
    table.compute_eoc();
    return table;
}

namespace detail {

inline std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline std::string csv_header()
{
    std::string h = "resolution,k,h";
    for (auto c : kErrorColumns) h += "," + std::string(c);
    for (auto c : kErrorColumns) h += ",eoc_" + std::string(c.substr(4));
    return h;
}

/// Fixed header (see csv_header), numbers with 17 significant digits, NaN
/// EOC written as "nan".
inline void write_csv(std::ostream& os, const RateTable& t)
{
    os << csv_header() << '\n';
    for (const auto& r : t.rows) {
        os << r.resolution << ',' << detail::format_number(r.k) << ',' << detail::format_number(r.h);
        for (double e : r.err) os << ',' << detail::format_number(e);
        for (double e : r.eoc) os << ',' << detail::format_number(e);
        os << '\n';
    }
}

/// Same fields as the CSV; a missing EOC is null.
inline nlohmann::json to_json(const RateTable& t)
{
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json row;
        row["resolution"] = r.resolution;
        row["k"] = r.k;
        row["h"] = r.h;
        for (std::size_t c = 0; c < 6; ++c) {
            const std::string name(kErrorColumns[c]);
            row[name] = num(r.err[c]);
            row["eoc_" + name.substr(4)] = num(r.eoc[c]);
        }
        rows.push_back(std::move(row));
    }
    return {{"study", t.kind == StudyKind::temporal ? "temporal" : "spatial"},
            {"scheme", std::string(to_string(t.scheme))},
            {"rows", std::move(rows)}};
}

/// Two-column (mesh parameter, error) blocks, one per error column,
/// separated by two blank lines (gnuplot `index`).
inline void write_plot_data(std::ostream& os, const RateTable& t)
{
    const char* param = t.kind == StudyKind::temporal ? "k" : "h";
    for (std::size_t c = 0; c < 6; ++c) {
        if (c > 0) os << "\n\n";
        os << "# " << param << ' ' << kErrorColumns[c] << '\n';
        for (const auto& r : t.rows) {
            os << detail::format_number(t.mesh_parameter(r)) << ' ' << detail::format_number(r.err[c])
               << '\n';
        }
    }
}

/// Time interpolant Π_k of a scalar function u on one partition.
struct ProbeReport {
    std::size_t n_intervals = 0;
    double k = 0.0;
    double nodal_residual = 0.0;  ///< max_n |Π_k u(t_n^-) − u(t_n)|
    double moment_residual = 0.0; ///< max_n |∫_{I_n} (Π_k u − u) dt| (q = 1 only)
    double error = 0.0;           ///< ∫_0^T |Π_k u − u| dt
};

/// Builds Π_k u for q ∈ {0, 1}: matches u at every right endpoint and, for
/// q = 1, has the same mean as u on every interval. The error is integrated
/// with 8-point Gauss on four subintervals per interval.
inline ProbeReport interpolation_rate_probe(const std::function<double(double)>& u,
                                            const TimePartition& part, int q)
{
    if (q != 0 && q != 1) throw std::invalid_argument("interpolation_rate_probe: q must be 0 or 1");
    const auto& g8 = gauss_legendre(8);
    ProbeReport r;
    r.n_intervals = part.n_intervals();
    r.k = part.k_max();
    for (std::size_t n = 1; n <= part.n_intervals(); ++n) {
        const double t0 = part.t(n - 1);
        const double t1 = part.t(n);
        const double k = t1 - t0;
        const double end_value = u(t1);
        double slope = 0.0;
        if (q == 1) {
            // Π u = end_value + slope (t − t1); zero mean error fixes slope.
            const double mean_u = g8.integrate(u, t0, t1);
            slope = 2.0 * (end_value * k - mean_u) / (k * k);
        }
        auto pi_u = [=](double t) { return end_value + slope * (t - t1); };

        r.nodal_residual = std::max(r.nodal_residual, std::abs(pi_u(t1) - u(t1)));
        if (q == 1) {
            const double moment =
                gauss_legendre(12).integrate([&](double t) { return pi_u(t) - u(t); }, t0, t1);
            r.moment_residual = std::max(r.moment_residual, std::abs(moment));
        }
        for (int s = 0; s < 4; ++s) {
            const double a = t0 + k * s / 4.0;
            const double b = t0 + k * (s + 1) / 4.0;
            r.error += g8.integrate([&](double t) { return std::abs(pi_u(t) - u(t)); }, a, b);
        }
    }
    return r;
}

} // namespace wavedg
