#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wavedg/convergence_lab.hpp"
#include "wavedg/dg_time_stepper.hpp"
#include "wavedg/energy_monitor.hpp"
#include "wavedg/space_discretization.hpp"

namespace wavedg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Bad command line or config file; the message names the offending token.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// --help was requested; what() holds the help text.
class HelpRequested : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command = "solve"; ///< solve | audit | temporal-study | spatial-study | probe
    Scheme scheme = Scheme::dG1;
    std::vector<std::size_t> nx;
    std::vector<std::size_t> nt;
    double t_final = 1.0;
    double a = 0.0;
    double b = std::numbers::pi;
    std::string problem = "sinwave";
    std::optional<std::string> output;
    std::string format = "csv";
    std::uint64_t seed = 0;
    std::size_t samples = kDefaultUniformSamples;
    unsigned threads = 1; ///< hardware concurrency, capped by WAVEDG_THREADS
};

namespace detail {

inline void configure(CLI::App& app, RunConfig& cfg, std::string& scheme)
{
    app.add_option("command", cfg.command, "solve | audit | temporal-study | spatial-study | probe")
        ->check(CLI::IsMember({"solve", "audit", "temporal-study", "spatial-study", "probe"}));
    app.add_option("--scheme", scheme, "time discretization: dg0 or dg1")
        ->check(CLI::IsMember({"dg0", "dg1"}));
    app.add_option("--nx", cfg.nx, "spatial elements (comma-separated ladder for spatial-study)")
        ->delimiter(',');
    app.add_option("--nt", cfg.nt, "time intervals (comma-separated ladder for temporal-study/probe)")
        ->delimiter(',');
    app.add_option("--t-final", cfg.t_final, "final time T");
    app.add_option("--a", cfg.a, "left end of the domain");
    app.add_option("--b", cfg.b, "right end of the domain");
    app.add_option("--problem", cfg.problem, "builtin problem: sinwave | polyt | none")
        ->check(CLI::IsMember({"sinwave", "polyt", "none"}));
    app.add_option("-o,--output", cfg.output, "artifact path");
    app.add_option("--format", cfg.format, "artifact format: csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--seed", cfg.seed, "seed recorded with the run");
    app.add_option("--samples", cfg.samples, "samples per interval for uniform-in-time norms");
    app.set_config("--config", "", "flat key = value file; keys are the long flag names");
    app.allow_config_extras(CLI::config_extras_mode::error);
}

inline constexpr const char* kDescription =
    "dG(0)/dG(1) time stepping with P1 elements for the 1D wave equation";

inline std::string usage()
{
    RunConfig cfg;
    std::string scheme;
    CLI::App app{kDescription, "wavedg"};
    configure(app, cfg, scheme);
    return app.help();
}

} // namespace detail

/// Parses argv (without the program name). Flags override config-file values.
inline RunConfig parse_args(const std::vector<std::string>& args)
{
    if (args.empty()) throw UsageError("no arguments given\n" + detail::usage());

    RunConfig cfg;
    std::string scheme = "dg1";
    CLI::App app{detail::kDescription, "wavedg"};
    detail::configure(app, cfg, scheme);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    cfg.scheme = parse_scheme(scheme);

    if (!(cfg.t_final > 0.0)) throw UsageError("--t-final must be positive");
    if (!(cfg.b > cfg.a)) throw UsageError("--b must exceed --a");
    if (cfg.samples < 2) throw UsageError("--samples must be at least 2");

    const bool study = cfg.command == "temporal-study" || cfg.command == "spatial-study";
    if (cfg.nx.empty()) {
        if (cfg.command == "temporal-study") cfg.nx = {512};
        else if (cfg.command == "spatial-study") cfg.nx = {8, 16, 32, 64};
        else cfg.nx = {64};
    }
    if (cfg.nt.empty()) {
        if (cfg.command == "temporal-study" || cfg.command == "probe") cfg.nt = {8, 16, 32, 64, 128};
        else if (cfg.command != "spatial-study") cfg.nt = {32};
    }
    for (auto n : cfg.nx) {
        if (n < 2) throw UsageError("--nx entries must be at least 2, got " + std::to_string(n));
    }
    for (auto n : cfg.nt) {
        if (n < 1) throw UsageError("--nt entries must be at least 1");
    }
    if (!study && cfg.command != "probe" && (cfg.nx.size() != 1 || cfg.nt.size() != 1)) {
        throw UsageError(cfg.command + " takes a single --nx and --nt value");
    }
    if (cfg.command == "temporal-study" && cfg.nx.size() != 1) {
        throw UsageError("temporal-study takes a single --nx value");
    }
    if ((cfg.command == "temporal-study" || cfg.command == "probe") && cfg.nt.size() < 2) {
        throw UsageError(cfg.command + " needs an --nt ladder with at least two entries");
    }
    if (cfg.command == "spatial-study" && cfg.nx.size() < 2) {
        throw UsageError("spatial-study needs an --nx ladder with at least two entries");
    }

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    cfg.threads = hw;
    if (const char* env = std::getenv("WAVEDG_THREADS")) {
        try {
            cfg.threads = std::clamp<unsigned>(static_cast<unsigned>(std::stoul(env)), 1u, hw);
        } catch (const std::exception&) {
            throw UsageError(std::string("WAVEDG_THREADS is not a number: ") + env);
        }
    }
    return cfg;
}

/// Writes to a temporary sibling and renames on commit. Opening happens in
/// the constructor so an unwritable path fails before any computation.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path target)
        : target_(std::move(target)), temp_(target_.string() + ".tmp")
    {
        std::ofstream probe(temp_, std::ios::trunc);
        if (!probe) throw std::runtime_error("cannot write output path " + target_.string());
    }
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;
    ~AtomicFile()
    {
        if (!committed_) {
            std::error_code ec;
            std::filesystem::remove(temp_, ec);
        }
    }

    void commit(const std::string& content)
    {
        {
            std::ofstream os(temp_, std::ios::trunc | std::ios::binary);
            os << content;
            if (!os.flush()) throw std::runtime_error("write failed for " + temp_.string());
        }
        std::filesystem::rename(temp_, target_);
        committed_ = true;
    }

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    bool committed_ = false;
};

namespace detail {

inline std::string num(double v) { return wavedg::detail::format_number(v); }

/// Built in place: the polyt problem keeps a pointer to `space`.
struct Problem {
    explicit Problem(const RunConfig& cfg)
        : space(build_uniform_mesh(cfg.a, cfg.b, cfg.nx.front())),
          sol(make_problem(cfg.problem, space)),
          M(assemble_mass(space)),
          A(assemble_stiffness(space))
    {
    }
    Problem(const Problem&) = delete;
    Problem& operator=(const Problem&) = delete;

    FeSpace space;
    ManufacturedSolution sol;
    SparseMatrix M;
    SparseMatrix A;
};

inline StudyConfig study_config(const RunConfig& cfg)
{
    StudyConfig s;
    s.scheme = cfg.scheme;
    s.nx_list = cfg.nx;
    s.nt_list = cfg.nt;
    s.t_final = cfg.t_final;
    s.a = cfg.a;
    s.b = cfg.b;
    s.samples = cfg.samples;
    s.problem = cfg.problem;
    s.threads = cfg.threads;
    return s;
}

inline bool in_band(double v, double lo, double hi) { return v >= lo && v <= hi; }

} // namespace detail

/// Runs one command. Prints a one-line summary to `out`, writes artifacts
/// atomically, returns 0 (ok), 1 (usage or I/O) or 2 (numerical check failed).
inline int execute(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    const bool json = cfg.format == "json";
    std::optional<AtomicFile> artifact;
    std::optional<AtomicFile> plot;
    try {
        if (cfg.output) {
            artifact.emplace(*cfg.output);
            if (cfg.command == "temporal-study" || cfg.command == "spatial-study") {
                plot.emplace(*cfg.output + ".plot.dat");
            }
        }
    } catch (const std::exception& e) {
        err << "wavedg: " << e.what() << '\n';
        return kExitUsage;
    }

    std::ostringstream body;
    int code = kExitOk;
    const std::string scheme(to_string(cfg.scheme));

    if (cfg.command == "solve") {
        const detail::Problem p(cfg);
        const auto part = TimePartition::uniform(cfg.t_final, cfg.nt.front());
        const auto traj = run(cfg.scheme, p.space, p.M, p.A, part,
                              initial_state(p.space, p.sol.u1, p.sol.u2), p.sol.f);
        const DgState end = traj.left_limit(part.n_intervals());
        const FeFunction u1(p.space, end.u1);
        const FeFunction u2(p.space, end.u2);
        const auto nodes = p.space.mesh().nodes();
        if (json) {
            nlohmann::json j{{"t", cfg.t_final}, {"scheme", scheme}, {"seed", cfg.seed}};
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                j["x"].push_back(nodes[i]);
                j["u1"].push_back(u1.nodal_value(i));
                j["u2"].push_back(u2.nodal_value(i));
            }
            body << j.dump(2) << '\n';
        } else {
            body << "x,u1,u2\n";
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                body << detail::num(nodes[i]) << ',' << detail::num(u1.nodal_value(i)) << ','
                     << detail::num(u2.nodal_value(i)) << '\n';
            }
        }
        const NormTriple e = nodal_errors(traj, p.space, p.sol);
        bool finite = std::isfinite(e.u1_l2) && std::isfinite(e.u1_h1) && std::isfinite(e.u2_l2);
        out << "solve scheme=" << scheme << " nx=" << cfg.nx.front() << " nt=" << cfg.nt.front()
            << " T=" << detail::num(cfg.t_final) << " u1_l2=" << detail::num(e.u1_l2)
            << " u1_h1=" << detail::num(e.u1_h1) << " u2_l2=" << detail::num(e.u2_l2) << '\n';
        if (!finite) code = kExitNumerical;
    } else if (cfg.command == "audit") {
        const detail::Problem p(cfg);
        const auto part = TimePartition::uniform(cfg.t_final, cfg.nt.front());
        const auto traj = run(cfg.scheme, p.space, p.M, p.A, part,
                              initial_state(p.space, p.sol.u1, p.sol.u2), p.sol.f);
        const EnergyLedger L = audit(traj, p.space, p.M, p.A, p.sol.f);
        const StabilityReport s = stability_bound_check(traj, p.space, p.M, p.A, p.sol.f);
        if (json) {
            nlohmann::json j{{"scheme", scheme}, {"e0", L.e0}, {"relative_residual", L.relative_residual()},
                             {"stability_ratio", s.ratio}, {"degenerate", s.degenerate}};
            j["rows"] = nlohmann::json::array();
            for (std::size_t n = 0; n < L.e_node.size(); ++n) {
                j["rows"].push_back({{"n", n}, {"t", L.t[n]}, {"e_node", L.e_node[n]},
                                     {"jump_sum", L.jump_sum[n]}, {"work", L.work[n]},
                                     {"residual", L.residual(n)}});
            }
            body << j.dump(2) << '\n';
        } else {
            write_ledger_csv(body, L);
        }
        const double tol = p.sol.f ? 1e-9 : 1e-10;
        const double rel = L.relative_residual();
        out << "audit scheme=" << scheme << " nx=" << cfg.nx.front() << " nt=" << cfg.nt.front()
            << " relative_energy_residual=" << detail::num(rel)
            << " stability_ratio=" << detail::num(s.ratio) << '\n';
        if (!(rel <= tol)) code = kExitNumerical;
    } else if (cfg.command == "temporal-study" || cfg.command == "spatial-study") {
        const bool temporal = cfg.command == "temporal-study";
        const StudyConfig sc = detail::study_config(cfg);
        const RateTable t = temporal ? run_temporal_study(sc) : run_spatial_study(sc);
        if (json) {
            body << to_json(t).dump(2) << '\n';
        } else {
            write_csv(body, t);
        }
        std::ostringstream plot_body;
        write_plot_data(plot_body, t);

        out << cfg.command << " scheme=" << scheme;
        for (std::size_t c = 0; c < 6; ++c) {
            out << " eoc_" << kErrorColumns[c].substr(4) << '=' << detail::num(t.last_eoc(c));
        }
        out << '\n';
        // Rate bands are only meaningful for the smooth builtin problem.
        if (cfg.problem == "sinwave") {
            bool ok = true;
            if (temporal) {
                ok = cfg.scheme == Scheme::dG0 ? detail::in_band(t.last_eoc(3), 0.85, 1.15)
                                               : detail::in_band(t.last_eoc(3), 1.8, 2.6);
            } else if (cfg.scheme == Scheme::dG1) {
                ok = detail::in_band(t.last_eoc(0), 1.8, 2.2) && detail::in_band(t.last_eoc(1), 0.85, 1.15);
            }
            if (!ok) code = kExitNumerical;
        }
        if (plot) plot->commit(plot_body.str());
    } else if (cfg.command == "probe") {
        const int q = degree(cfg.scheme);
        auto nts = cfg.nt;
        std::sort(nts.begin(), nts.end());
        std::vector<ProbeReport> reports;
        for (auto n : nts) {
            reports.push_back(interpolation_rate_probe([](double t) { return std::cos(t); },
                                                       TimePartition::uniform(cfg.t_final, n), q));
        }
        double worst_residual = 0.0;
        std::vector<double> rates(reports.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < reports.size(); ++i) {
            worst_residual = std::max({worst_residual, reports[i].nodal_residual, reports[i].moment_residual});
            if (i > 0) rates[i] = eoc(reports[i - 1].error, reports[i].error, reports[i - 1].k, reports[i].k);
        }
        if (json) {
            nlohmann::json j{{"q", q}, {"rows", nlohmann::json::array()}};
            for (std::size_t i = 0; i < reports.size(); ++i) {
                j["rows"].push_back({{"n", reports[i].n_intervals}, {"k", reports[i].k},
                                     {"nodal_residual", reports[i].nodal_residual},
                                     {"moment_residual", reports[i].moment_residual},
                                     {"error", reports[i].error},
                                     {"eoc", std::isnan(rates[i]) ? nlohmann::json(nullptr) : nlohmann::json(rates[i])}});
            }
            body << j.dump(2) << '\n';
        } else {
            body << "n,k,nodal_residual,moment_residual,error,eoc\n";
            for (std::size_t i = 0; i < reports.size(); ++i) {
                body << reports[i].n_intervals << ',' << detail::num(reports[i].k) << ','
                     << detail::num(reports[i].nodal_residual) << ','
                     << detail::num(reports[i].moment_residual) << ',' << detail::num(reports[i].error)
                     << ',' << detail::num(rates[i]) << '\n';
            }
        }
        out << "probe q=" << q << " max_condition_residual=" << detail::num(worst_residual)
            << " eoc=" << detail::num(rates.back()) << '\n';
        if (!(worst_residual <= 1e-12) || !detail::in_band(rates.back(), q + 0.85, q + 1.15)) {
            code = kExitNumerical;
        }
    }

    if (artifact) artifact->commit(body.str());
    return code;
}

/// Entry point shared by the executable and the tests.
inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    RunConfig cfg;
    try {
        cfg = parse_args(args);
    } catch (const HelpRequested& h) {
        out << h.what();
        return kExitOk;
    } catch (const UsageError& e) {
        err << "wavedg: " << e.what() << '\n';
        if (!args.empty()) err << "run 'wavedg --help' for usage\n";
        return kExitUsage;
    }
    try {
        return execute(cfg, out, err);
    } catch (const std::invalid_argument& e) {
        err << "wavedg: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "wavedg: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace wavedg::cli
