#include "tms/macro.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace tms {

void MacroGrid::validate() const {
    if (n_steps < 1)
        throw ConfigError("MacroGrid: n_steps must be >= 1, got " + std::to_string(n_steps));
    if (!(step > 0.0))
        throw ConfigError("MacroGrid: step must be positive, got " + std::to_string(step));
}

std::vector<std::string> MacroGrid::warnings() const {
    std::vector<std::string> w;
    if (step < 1.0)
        w.push_back("MacroGrid: step K = " + std::to_string(step) +
                    " is below one fast period; the macro step is intended to satisfy K >> 1");
    return w;
}

MacroGrid MacroGrid::from_step_count(double t_end, int n_steps) {
    if (n_steps < 1) throw ConfigError("MacroGrid: n_steps must be >= 1");
    if (!(t_end > 0.0)) throw ConfigError("MacroGrid: t_end must be positive");
    MacroGrid g{n_steps, t_end / n_steps};
    g.validate();
    return g;
}

MacroGrid MacroGrid::from_step(double t_end, double step) {
    if (!(step > 0.0)) throw ConfigError("MacroGrid: step must be positive");
    const double ratio = t_end / step;
    const auto n = static_cast<long long>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("MacroGrid: t_end/K = " + std::to_string(ratio) +
                          " is not an integral step count");
    MacroGrid g{static_cast<int>(n), step};
    g.validate();
    return g;
}

long long MacroTrajectory::total_cycles() const {
    return std::accumulate(micro_cycles.begin(), micro_cycles.end(), 0LL);
}

namespace {

void check_reaction_value(double r, const char* where) {
    if (!(r > 0.0 && r <= 1.0))
        throw Error(std::string(where) + ": averaged reaction " + std::to_string(r) +
                    " outside (0, 1]");
}

}  // namespace

double euler_bootstrap(double u0, double r0, double step, double epsilon, double u_max) {
    check_reaction_value(r0, "euler_bootstrap");
    const double u1 = u0 + step * epsilon * r0;
    if (u1 > u_max)
        throw DomainExhaustedError("euler_bootstrap: slow value " + std::to_string(u1) +
                                       " exceeds u_max = " + std::to_string(u_max),
                                   u1, 1);
    return u1;
}

double ab2_step(double u_prev, double r_prev, double r_prev2, double step, double epsilon,
                double u_max) {
    check_reaction_value(r_prev, "ab2_step");
    check_reaction_value(r_prev2, "ab2_step");
    const double u_next =
        u_prev + 1.5 * step * epsilon * r_prev - 0.5 * step * epsilon * r_prev2;
    if (u_next > u_max)
        throw DomainExhaustedError("ab2_step: slow value " + std::to_string(u_next) +
                                       " exceeds u_max = " + std::to_string(u_max),
                                   u_next, -1);
    if (u_next < 0.0)
        throw Error("ab2_step: integrator failure, slow value became negative (" +
                    std::to_string(u_next) + ")");
    return u_next;
}

MacroTrajectory run_multiscale(const FastSystem& sys, const ScaleParams& scale,
                               MacroGrid macro, MicroGrid micro,
                               const PeriodicSolverConfig& psolver) {
    scale.validate();
    macro.validate();
    micro.validate();
    psolver.validate();
    if (scale.u_max > sys.u_max())
        throw ConfigError("run_multiscale: scale.u_max exceeds the range the system was "
                          "validated on");

    MacroTrajectory traj;
    traj.times.reserve(macro.n_steps + 1);
    traj.values.reserve(macro.n_steps + 1);
    traj.times.push_back(0.0);
    traj.values.push_back(scale.u0);

    FastState guess = default_periodic_guess(sys, scale.u0);
    double u = scale.u0;
    double r_prev = 0.0;

    for (int n = 1; n <= macro.n_steps; ++n) {
        MicroSolution sol;
        try {
            sol = solve_periodic(sys, u, guess, micro, psolver);
        } catch (const NonConvergenceError& e) {
            throw NonConvergenceError("macro step " + std::to_string(n) + ": " + e.what(),
                                      e.last_residual, e.iterations);
        }
        guess = sol.initial_state();  // warm start for the next macro step
        const double r = averaged_reaction(sys, u, sol);
        check_reaction_value(r, "run_multiscale");

        traj.reactions.push_back(r);
        traj.micro_cycles.push_back(sol.cycles_used);
        traj.total_cn_steps += static_cast<long long>(sol.cycles_used) * micro.steps;

        double u_next;
        try {
            u_next = n == 1 ? euler_bootstrap(u, r, macro.step, scale.epsilon, scale.u_max)
                            : ab2_step(u, r, r_prev, macro.step, scale.epsilon, scale.u_max);
        } catch (const DomainExhaustedError&) {
            traj.status = RunStatus::domain_exhausted;
            traj.failed_step = n;
            return traj;
        }

        traj.times.push_back(n * macro.step);
        traj.values.push_back(u_next);
        u = u_next;
        r_prev = r;
    }
    return traj;
}

}  // namespace tms
