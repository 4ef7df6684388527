#include "tms/cli_app.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"

#include "tms/config.hpp"
#include "tms/csvio.hpp"
#include "tms/macro.hpp"
#include "tms/micro.hpp"
#include "tms/model.hpp"
#include "tms/resolved.hpp"
#include "tms/study.hpp"

namespace tms {

namespace {

constexpr const char* kVersion = "tmsolve 0.1.0";

using Clock = std::chrono::steady_clock;

struct Emitter {
    std::filesystem::path dir;
    std::string command;
    std::string config_echo;
    Clock::time_point start = Clock::now();
    std::map<std::string, std::string> kv;

    void add(const std::string& key, const std::string& value) { kv[key] = value; }
    void add(const std::string& key, double value) { kv[key] = format_double(value); }
    void add(const std::string& key, long long value) { kv[key] = std::to_string(value); }

    void csv(const std::string& name, const std::string& body) const {
        write_file(dir / name, body);
    }

    void finish(const std::string& human_summary) const {
        write_file(dir / "resolved_config.json", config_echo);
        write_file(dir / "summary.txt", human_summary);
        write_file(dir / "summary.kv", summary_kv(kv));

        const double wall =
            std::chrono::duration<double>(Clock::now() - start).count();
        std::string meta;
        meta += "command=" + command + "\n";
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a(config_echo)));
        meta += "config_hash=" + std::string(hash) + "\n";
        meta += "version=" + std::string(kVersion) + "\n";
        meta += "wall_seconds=" + format_double(wall) + "\n";
        if (auto it = kv.find("total_cn_steps"); it != kv.end())
            meta += "total_cn_steps=" + it->second + "\n";
        write_file(dir / "metadata.txt", meta);
    }
};

void print_warnings(const RunConfig& cfg) {
    for (const auto& w : cfg.scale.warnings()) std::cerr << "warning: " << w << "\n";
    try {
        for (const auto& w : cfg.macro_grid().warnings()) std::cerr << "warning: " << w << "\n";
    } catch (const ConfigError&) {
        // Macro grid not used by every command; grid errors surface where the
        // grid is actually needed.
    }
}

int cmd_run_multiscale(const RunConfig& cfg, Emitter& em) {
    const FastSystem sys = cfg.build();
    const auto traj =
        run_multiscale(sys, cfg.scale, cfg.macro_grid(), cfg.micro_grid(), cfg.periodic);

    em.csv("multiscale.csv", macro_trajectory_csv(traj));
    em.add("u_final", traj.final_u());
    em.add("total_cn_steps", traj.total_cn_steps);
    em.add("total_cycles", traj.total_cycles());
    em.add("status", std::string(traj.status == RunStatus::completed ? "completed"
                                                                     : "domain_exhausted"));

    std::string human = "multiscale run (" + cfg.preset + ")\n";
    human += "  T = " + format_double(cfg.scale.t_end) +
             ", K = " + format_double(cfg.macro_grid().step) +
             ", M = " + std::to_string(cfg.micro_steps) +
             ", tol_P = " + format_double(cfg.periodic.tol_p) + "\n";
    human += "  U(T) = " + format_double(traj.final_u()) + "\n";
    human += "  CN steps = " + std::to_string(traj.total_cn_steps) + "\n";
    if (traj.status != RunStatus::completed) {
        human += "  DOMAIN EXHAUSTED at macro step " + std::to_string(traj.failed_step) + "\n";
        em.finish(human);
        std::cerr << "domain exhausted at macro step " << traj.failed_step << "\n";
        return kExitDomainExhausted;
    }
    em.finish(human);
    std::cout << "U(T) = " << format_double(traj.final_u()) << "\n";
    return kExitOk;
}

int cmd_run_resolved(const RunConfig& cfg, Emitter& em) {
    const FastSystem sys = cfg.build();
    const FastState v0 = periodic_initial_state(sys, cfg.scale, cfg.resolved_k);
    const auto traj = run_resolved(sys, cfg.scale, cfg.resolved_k, v0, cfg.stride);

    em.csv("resolved.csv", resolved_trajectory_csv(traj));
    em.add("u_final", traj.final_u);
    em.add("total_cn_steps", traj.total_steps);
    em.add("status", std::string(traj.status == RunStatus::completed ? "completed"
                                                                     : "domain_exhausted"));

    std::string human = "resolved run (" + cfg.preset + ")\n";
    human += "  T = " + format_double(cfg.scale.t_end) + ", k = " + format_double(traj.step) +
             ", stride = " + std::to_string(traj.stride) + "\n";
    human += "  u(T) = " + format_double(traj.final_u) + "\n";
    human += "  steps = " + std::to_string(traj.total_steps) + "\n";
    if (traj.status != RunStatus::completed) {
        human += "  DOMAIN EXHAUSTED at step " + std::to_string(traj.failed_step) + "\n";
        em.finish(human);
        std::cerr << "domain exhausted at step " << traj.failed_step << "\n";
        return kExitDomainExhausted;
    }
    em.finish(human);
    std::cout << "u(T) = " << format_double(traj.final_u) << "\n";
    return kExitOk;
}

int cmd_solve_periodic(const RunConfig& cfg, Emitter& em) {
    const FastSystem sys = cfg.build();
    const double u = std::isnan(cfg.solve_u) ? cfg.scale.u0 : cfg.solve_u;
    const FastState guess = default_periodic_guess(sys, u, cfg.guess_harmonics);
    const auto sol = solve_periodic(sys, u, guess, cfg.micro_grid(), cfg.periodic);
    const double r_avg = averaged_reaction(sys, u, sol);

    em.csv("periodic.csv", micro_solution_csv(sol));
    em.add("u_frozen", u);
    em.add("residual", sol.periodicity_residual);
    em.add("cycles_used", static_cast<long long>(sol.cycles_used));
    em.add("reaction_avg", r_avg);
    em.add("total_cn_steps", static_cast<long long>(sol.cycles_used) * cfg.micro_steps);

    std::string human = "periodic solve (" + cfg.preset + ", " +
                        method_name(cfg.periodic.method) + ")\n";
    human += "  u = " + format_double(u) + ", M = " + std::to_string(cfg.micro_steps) +
             ", tol_P = " + format_double(cfg.periodic.tol_p) + "\n";
    human += "  cycles = " + std::to_string(sol.cycles_used) +
             ", residual = " + format_double(sol.periodicity_residual) + "\n";
    human += "  averaged reaction = " + format_double(r_avg) + "\n";
    em.finish(human);
    std::cout << "converged in " << sol.cycles_used
              << " cycles, residual = " << format_double(sol.periodicity_residual) << "\n";
    return kExitOk;
}

int cmd_converge(const RunConfig& cfg, Emitter& em) {
    if (cfg.k_list.empty() || cfg.K_list.empty())
        throw ConfigError("converge: needs non-empty k and K lists "
                          "(--k-list/--K-list or study.k_list/study.K_list)");
    const FastSystem sys = cfg.build();
    const double ref_k =
        cfg.reference_k > 0.0 ? cfg.reference_k
                              : *std::min_element(cfg.k_list.begin(), cfg.k_list.end());

    // One sweep per scale ratio. Extra ratios keep eps*T and the macro step
    // counts fixed, so the K grids are matched in resolution and the fitted
    // error constants stay comparable across eps.
    std::vector<double> eps_values = {cfg.scale.epsilon};
    for (double e : cfg.eps_list)
        if (e != cfg.scale.epsilon) eps_values.push_back(e);

    std::string human = "convergence sweep (" + cfg.preset + ")\n";
    std::vector<FitResult> fits;
    std::vector<bool> fit_ok;
    long long cn_total = 0;
    for (std::size_t j = 0; j < eps_values.size(); ++j) {
        const double eps = eps_values[j];
        const double scale_factor = cfg.scale.epsilon / eps;
        ScaleParams scale = cfg.scale;
        scale.epsilon = eps;
        scale.t_end = cfg.scale.t_end * scale_factor;
        std::vector<double> K_list = cfg.K_list;
        for (double& K : K_list) K *= scale_factor;

        const auto sweep = run_convergence_sweep(sys, scale, cfg.k_list, K_list,
                                                 cfg.periodic.tol_p, ref_k, cfg.workers);
        const std::string tag = j == 0 ? "" : "_" + std::to_string(j + 1);
        em.csv("sweep" + tag + ".csv", sweep_csv(sweep));
        for (const auto& row : sweep.rows) cn_total += row.e_ms;
        if (j == 0) {
            em.add("u_reference", sweep.u_reference);
            em.add("reference_order", sweep.reference_order);
        }
        human += "  eps = " + format_double(eps) +
                 ": reference u(T) = " + format_double(sweep.u_reference) + " (order " +
                 format_double(sweep.reference_order) + "), " +
                 std::to_string(sweep.rows.size()) + " runs -> sweep" + tag + ".csv\n";

        std::vector<FitSample> samples;
        for (const auto& row : sweep.rows) samples.push_back({row.k, row.K, row.u_final});
        try {
            const auto fit = fit_convergence(samples);
            write_file(em.dir / ("fit" + tag + ".txt"), fit_report(fit));
            if (j == 0) {
                em.add("fit_u_star", fit.u_star);
                em.add("fit_q_k", fit.q_k);
                em.add("fit_q_K", fit.q_K);
                em.add("fit_c_k", fit.c_k);
                em.add("fit_c_K", fit.c_K);
            }
            human += fit_report(fit);
            fits.push_back(fit);
            fit_ok.push_back(true);
        } catch (const Error& e) {
            human += "  fit skipped: " + std::string(e.what()) + "\n";
            fits.push_back({});
            fit_ok.push_back(false);
        }
    }
    for (std::size_t j = 1; j < eps_values.size(); ++j) {
        if (!fit_ok[0] || !fit_ok[j]) continue;
        const double ratio = epsilon_scaling_of_ck(fits[0], fits[j]);
        em.add("c_K_ratio_eps" + std::to_string(j + 1), ratio);
        human += "  C_K(" + format_double(eps_values[0]) + ") / C_K(" +
                 format_double(eps_values[j]) + ") = " + format_double(ratio) + "\n";
    }
    em.add("total_cn_steps", cn_total);
    em.finish(human);
    std::cout << human;
    return kExitOk;
}

int cmd_fit(const RunConfig&, Emitter& em, const std::string& input) {
    const auto samples = read_sweep_samples(input);
    const auto fit = fit_convergence(samples);
    write_file(em.dir / "fit.txt", fit_report(fit));
    em.add("fit_u_star", fit.u_star);
    em.add("fit_c_k", fit.c_k);
    em.add("fit_q_k", fit.q_k);
    em.add("fit_c_K", fit.c_K);
    em.add("fit_q_K", fit.q_K);
    em.add("fit_residual_norm", fit.residual_norm);
    em.finish(fit_report(fit));
    std::cout << fit_report(fit);
    return kExitOk;
}

int cmd_speedup(const RunConfig& cfg, Emitter& em, double n_period) {
    const double K = cfg.macro_grid().step;
    const double k = 1.0 / cfg.micro_steps;
    const auto est = speedup_estimate(k, K, cfg.scale.epsilon, n_period, cfg.scale.t_end);

    em.add("e_fwd", est.e_fwd);
    em.add("e_ms", est.e_ms);
    em.add("ratio", est.ratio);
    em.add("ratio_eps_form", est.ratio_eps_form);

    std::string human = "speedup estimate\n";
    human += "  E_fwd = T/k = " + format_double(est.e_fwd) + " CN steps\n";
    human += "  E_ms = (T/K) n_period (1/k) = " + format_double(est.e_ms) + " CN steps\n";
    human += "  E_fwd/E_ms = " + format_double(est.ratio) + "\n";
    human += "  k/(eps n_period) = " + format_double(est.ratio_eps_form) +
             "  (matches E_fwd/E_ms when K = k/eps)\n";
    em.finish(human);
    std::cout << human;
    return kExitOk;
}

int cmd_tolp_study(const RunConfig& cfg, Emitter& em) {
    std::vector<double> tolps = cfg.tolp_list;
    if (tolps.empty()) tolps = {1e-1, 1e-2, 1e-3, 1e-4, 1e-8};
    const FastSystem sys = cfg.build();
    const auto rows = tolp_sensitivity(sys, cfg.scale, cfg.macro_grid(), cfg.micro_grid(),
                                       tolps, cfg.periodic.method);

    em.csv("tolp.csv", tolp_csv(rows));
    long long cn_total = 0;
    for (const auto& row : rows) cn_total += row.total_cn_steps;
    em.add("total_cn_steps", cn_total);
    em.add("reference_tol_p", rows.back().tol_p);

    std::string human = "tol_P sensitivity (" + cfg.preset + ")\n";
    for (const auto& row : rows)
        human += "  tol_P = " + format_double(row.tol_p) +
                 ": |U - U_ref| = " + format_double(row.diff_vs_ref) + "\n";
    em.finish(human);
    std::cout << human;
    return kExitOk;
}

struct CliOptions {
    ConfigOverrides overrides;
    std::optional<std::string> config_file;
    std::string fit_input;
    double n_period = 0.0;
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_file, "JSON config file");
    cmd->add_option("--preset", opt.overrides.preset, "problem preset (scalar-default, modal-default)");
    cmd->add_option("--epsilon", opt.overrides.epsilon, "scale ratio epsilon");
    cmd->add_option("--T", opt.overrides.t_end, "final time T");
    cmd->add_option("--u-max", opt.overrides.u_max, "maximum admissible concentration");
    cmd->add_option("--u0", opt.overrides.u0, "initial slow value");
    cmd->add_option("--K", opt.overrides.macro_step, "macro step size K");
    cmd->add_option("--N", opt.overrides.n_macro_steps, "macro step count N (overrides K)");
    cmd->add_option("--M", opt.overrides.micro_steps, "micro steps per period M");
    cmd->add_option("--k", opt.overrides.micro_k, "micro step k = 1/M");
    cmd->add_option("--tolp", opt.overrides.tol_p, "periodicity tolerance tol_P");
    cmd->add_option("--max-cycles", opt.overrides.max_cycles, "periodic solver cycle cap");
    cmd->add_option("--method", opt.overrides.method,
                    "periodic solver method: fixed-point or averaged");
    cmd->add_option("--stride", opt.overrides.stride, "storage stride for resolved output");
    cmd->add_option("--workers", opt.overrides.workers, "worker threads for sweeps");
    cmd->add_option("--harmonics", opt.overrides.guess_harmonics,
                    "harmonics in the spectral initial guess");
    cmd->add_option("--out", opt.overrides.out_dir,
                    "output directory (default $TMSOLVE_OUT or ./tmsolve-out)");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"tmsolve -- temporal multiscale solver toolkit for slow/fast ODE systems"};
    app.require_subcommand(1);

    CliOptions opt;

    auto* resolved = app.add_subcommand("run-resolved", "fully resolved IMEX reference run");
    add_common_flags(resolved, opt);
    resolved->add_option("--resolved-k", opt.overrides.resolved_k, "fast step k for the run");

    auto* multiscale = app.add_subcommand("run-multiscale", "explicit temporal multiscale run");
    add_common_flags(multiscale, opt);

    auto* periodic = app.add_subcommand("solve-periodic", "periodic micro solve at frozen u");
    add_common_flags(periodic, opt);
    periodic->add_option("--u", opt.overrides.solve_u, "frozen slow value (default u0)");

    auto* converge = app.add_subcommand("converge", "k/K convergence sweep with reference");
    add_common_flags(converge, opt);
    converge->add_option("--k-list", opt.overrides.k_list, "micro steps k to sweep");
    converge->add_option("--K-list", opt.overrides.K_list, "macro steps K to sweep");
    converge->add_option("--eps-list", opt.overrides.eps_list,
                         "additional scale ratios (resolution-matched sweeps)");
    converge->add_option("--reference-k", opt.overrides.reference_k,
                         "finest k of the resolved reference chain");

    auto* fit = app.add_subcommand("fit", "fit U(k,K) = U* + C_k k^q_k + C_K K^q_K");
    add_common_flags(fit, opt);
    fit->add_option("--input", opt.fit_input, "sweep CSV to fit")->required();

    auto* speedup = app.add_subcommand("speedup", "cost model E_fwd/E_ms");
    add_common_flags(speedup, opt);
    speedup->add_option("--n-period", opt.n_period, "cycles per periodic solve")->required();

    auto* tolp = app.add_subcommand("tolp-study", "sensitivity to the periodicity tolerance");
    add_common_flags(tolp, opt);
    tolp->add_option("--tolp-list", opt.overrides.tolp_list, "tolerances to compare");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const RunConfig cfg = load_run_config(opt.config_file, opt.overrides);
        print_warnings(cfg);

        Emitter em;
        em.dir = cfg.out_dir;
        em.config_echo = emit_config(cfg);
        // Echo the fully resolved configuration before any solve starts.
        write_file(em.dir / "resolved_config.json", em.config_echo);

        if (resolved->parsed()) {
            em.command = "run-resolved";
            return cmd_run_resolved(cfg, em);
        }
        if (multiscale->parsed()) {
            em.command = "run-multiscale";
            return cmd_run_multiscale(cfg, em);
        }
        if (periodic->parsed()) {
            em.command = "solve-periodic";
            return cmd_solve_periodic(cfg, em);
        }
        if (converge->parsed()) {
            em.command = "converge";
            return cmd_converge(cfg, em);
        }
        if (fit->parsed()) {
            em.command = "fit";
            return cmd_fit(cfg, em, opt.fit_input);
        }
        if (speedup->parsed()) {
            em.command = "speedup";
            return cmd_speedup(cfg, em, opt.n_period);
        }
        if (tolp->parsed()) {
            em.command = "tolp-study";
            return cmd_tolp_study(cfg, em);
        }
        std::cerr << "no command selected\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NonConvergenceError& e) {
        std::cerr << "solver did not converge: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const DomainExhaustedError& e) {
        std::cerr << "domain exhausted: " << e.what() << "\n";
        return kExitDomainExhausted;
    } catch (const InfeasibleCostError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasibleCost;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("tmsolve");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace tms
