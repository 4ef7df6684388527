#include "tms/resolved.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tms {

namespace {

int micro_steps_from_k(double k) {
    if (!(k > 0.0)) throw ConfigError("resolved run: step k must be positive");
    const double inv = 1.0 / k;
    const auto m = static_cast<long long>(std::llround(inv));
    if (m < 2 || std::abs(inv - static_cast<double>(m)) > 1e-9 * inv)
        throw ConfigError("resolved run: 1/k = " + std::to_string(inv) +
                          " is not an integral number of steps per period");
    return static_cast<int>(m);
}

long long total_steps_from(double t_end, double k) {
    const double ratio = t_end / k;
    const auto n = static_cast<long long>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-6)
        throw ConfigError("resolved run: t_end/k = " + std::to_string(ratio) +
                          " is not an integral step count");
    return n;
}

struct StepRecord {
    long long m;            // node index, 0 for the initial state
    double t;
    double u;
    const double* v;        // dim entries
    double sigma;
    double reaction_value;
};

// Walk the IMEX scheme and hand every node (including m = 0) to the observer.
// Returns the failing step index on domain exhaustion, -1 on completion.
template <typename Observer>
long long integrate_imex(const FastSystem& sys, const ScaleParams& scale, double k,
                         const FastState& v_init, long long n_steps, int micro_steps,
                         Observer&& observe) {
    const int d = sys.dim();
    const ForcingTable table(sys, MicroGrid{micro_steps});

    std::vector<double> v = v_init.values;
    double u = scale.u0;
    double sigma = wall_functional(sys, v);
    double r_prev = reaction(u, sigma, scale.u_max);
    double r_prev2 = 0.0;
    observe(StepRecord{0, 0.0, u, v.data(), sigma, r_prev});

    std::vector<double> lam(d), denom(d);
    for (long long m = 1; m <= n_steps; ++m) {
        // Slow update first: explicit AB2 on the pointwise reaction values
        // (forward Euler on the first step).
        const double u_next =
            m == 1 ? u + k * scale.epsilon * r_prev
                   : u + 1.5 * k * scale.epsilon * r_prev - 0.5 * k * scale.epsilon * r_prev2;
        if (u_next > scale.u_max) return m;
        if (u_next < 0.0)
            throw Error("resolved run: integrator failure, slow value became negative");

        // Fast CN step with the decay rate frozen at the updated slow value.
        const auto f_prev = table.at_step(m - 1);
        const auto f_cur = table.at_step(m);
        for (int i = 0; i < d; ++i) {
            const double l = sys.lambda(i, u_next);
            v[i] = ((1.0 - 0.5 * k * l) * v[i] + 0.5 * k * (f_prev[i] + f_cur[i])) /
                   (1.0 + 0.5 * k * l);
        }

        u = u_next;
        sigma = wall_functional(sys, v);
        r_prev2 = r_prev;
        r_prev = reaction(u, sigma, scale.u_max);
        observe(StepRecord{m, m * k, u, v.data(), sigma, r_prev});
    }
    return -1;
}

}  // namespace

ResolvedTrajectory run_resolved(const FastSystem& sys, const ScaleParams& scale, double k,
                                const FastState& v_init, long long stride) {
    scale.validate();
    if (scale.u_max > sys.u_max())
        throw ConfigError("run_resolved: scale.u_max exceeds the range the system was "
                          "validated on");
    if (v_init.dim() != sys.dim())
        throw ConfigError("run_resolved: v_init dim does not match system dim");

    const int micro_steps = micro_steps_from_k(k);
    const long long n_steps = total_steps_from(scale.t_end, k);
    if (static_cast<double>(n_steps) > kMaxResolvedSteps)
        throw InfeasibleCostError(
            "run_resolved: refusing " + std::to_string(n_steps) +
                " steps (cap " + std::to_string(static_cast<long long>(kMaxResolvedSteps)) +
                "); projected cost E_fwd = t_end/k = " + std::to_string(n_steps) +
                " CN steps -- use the multiscale solver for this regime",
            static_cast<double>(n_steps));

    ResolvedTrajectory traj;
    traj.step = k;
    traj.dim = sys.dim();
    traj.stride = stride > 0 ? stride : std::max<long long>(1, (n_steps + 1) / 1'000'000);

    const auto keep = [&](long long m) { return m % traj.stride == 0 || m == n_steps; };
    traj.times.reserve(static_cast<std::size_t>(n_steps / traj.stride) + 2);

    double last_u = scale.u0;
    std::vector<double> last_v = v_init.values;
    const long long failed =
        integrate_imex(sys, scale, k, v_init, n_steps, micro_steps, [&](const StepRecord& s) {
            if (keep(s.m)) {
                traj.times.push_back(s.t);
                traj.slow.push_back(s.u);
                traj.fast.insert(traj.fast.end(), s.v, s.v + traj.dim);
            }
            last_u = s.u;
            std::copy(s.v, s.v + traj.dim, last_v.begin());
            traj.total_steps = s.m;
        });

    traj.final_u = last_u;
    traj.final_v = FastState(std::move(last_v));
    if (failed >= 0) {
        traj.status = RunStatus::domain_exhausted;
        traj.failed_step = failed;
    }
    return traj;
}

FastState periodic_initial_state(const FastSystem& sys, const ScaleParams& scale, double k,
                                 double tol_p) {
    const MicroGrid grid{micro_steps_from_k(k)};
    PeriodicSolverConfig cfg;
    cfg.tol_p = tol_p;
    cfg.max_cycles = 10'000;
    cfg.method = PeriodicMethod::averaged;
    const auto sol =
        solve_periodic(sys, scale.u0, default_periodic_guess(sys, scale.u0), grid, cfg);
    return sol.initial_state();
}

double closed_form_slow_f0(const ScaleParams& scale, double t) {
    if (t < 0.0) throw ConfigError("closed_form_slow_f0: t must be nonnegative");
    const double a = 1.0 + scale.u0;
    return std::sqrt(a * a + 2.0 * scale.epsilon * t) - 1.0;
}

ResolvedProbes resolved_probes(const FastSystem& sys, const ScaleParams& scale, double k,
                               double tol_p) {
    scale.validate();
    const int M = micro_steps_from_k(k);
    const long long n_steps = total_steps_from(scale.t_end, k);
    if (static_cast<double>(n_steps) > kMaxResolvedSteps)
        throw InfeasibleCostError("resolved_probes: run too large", static_cast<double>(n_steps));
    const long long n_periods = n_steps / M;
    if (n_periods < 1)
        throw ConfigError("resolved_probes: t_end must cover at least one period");

    const FastState v0 = periodic_initial_state(sys, scale, k, tol_p);
    const int d = sys.dim();
    const MicroGrid grid{M};
    PeriodicSolverConfig pcfg;
    pcfg.tol_p = tol_p;
    pcfg.max_cycles = 10'000;
    pcfg.method = PeriodicMethod::averaged;

    // Probe at most ~64 periods, 4 phases each.
    const long long period_stride = std::max<long long>(1, n_periods / 64);
    const int phases[] = {0, M / 4, M / 2, (3 * M) / 4};

    // Per-period buffers (filled only during probed periods).
    std::vector<double> u_buf(M + 1), sigma_buf(M + 1), v_buf(static_cast<std::size_t>(M + 1) * d);

    ResolvedProbes probes;
    FastState warm = v0;

    const long long failed = integrate_imex(
        sys, scale, k, v0, n_steps, M, [&](const StepRecord& s) {
            const long long period = s.m / M;
            const int offset = static_cast<int>(s.m % M);
            const bool probed_period =
                (period % period_stride == 0 && period < n_periods) ||
                (offset == 0 && period > 0 && (period - 1) % period_stride == 0);
            if (!probed_period) return;

            // A period-end node (offset 0, m > 0) closes the previous period
            // at buffer slot M and may simultaneously open the next one.
            if (offset == 0 && s.m > 0 && (s.m / M - 1) % period_stride == 0) {
                u_buf[M] = s.u;
                sigma_buf[M] = s.sigma;
                std::copy(s.v, s.v + d, v_buf.begin() + static_cast<std::size_t>(M) * d);

                // Box averages over nodes 1..M of the closed period.
                double u_bar = 0.0;
                for (int m = 1; m <= M; ++m) u_bar += u_buf[m];
                u_bar /= M;
                double avg_diff = 0.0, u_lo = u_buf[0], u_hi = u_buf[0];
                for (int m = 1; m <= M; ++m) {
                    avg_diff += reaction(u_bar, sigma_buf[m], scale.u_max) -
                                reaction(u_buf[m], sigma_buf[m], scale.u_max);
                    u_lo = std::min(u_lo, u_buf[m]);
                    u_hi = std::max(u_hi, u_buf[m]);
                }
                probes.averaging_defect =
                    std::max(probes.averaging_defect, std::abs(avg_diff / M));
                probes.slow_oscillation = std::max(probes.slow_oscillation, u_hi - u_lo);

                // Dynamic-vs-periodic gap at a few phases of the closed period.
                for (int phase : phases) {
                    const auto sol = solve_periodic(sys, u_buf[phase], warm, grid, pcfg);
                    warm = sol.initial_state();
                    const auto vp = sol.at(phase);
                    double gap = 0.0;
                    for (int i = 0; i < d; ++i) {
                        const double diff = v_buf[static_cast<std::size_t>(phase) * d + i] - vp[i];
                        gap += diff * diff;
                    }
                    probes.dynamic_periodic_gap =
                        std::max(probes.dynamic_periodic_gap, std::sqrt(gap));
                }
            }
            if (period % period_stride == 0 && period < n_periods) {
                u_buf[offset] = s.u;
                sigma_buf[offset] = s.sigma;
                std::copy(s.v, s.v + d, v_buf.begin() + static_cast<std::size_t>(offset) * d);
            }
        });

    if (failed >= 0)
        throw DomainExhaustedError("resolved_probes: domain exhausted at step " +
                                       std::to_string(failed),
                                   scale.u_max, failed);
    return probes;
}

double dynamic_periodic_gap(const FastSystem& sys, const ScaleParams& scale, double k,
                            double tol_p) {
    return resolved_probes(sys, scale, k, tol_p).dynamic_periodic_gap;
}

}  // namespace tms
