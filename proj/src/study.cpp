#include "tms/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>

namespace tms {

RichardsonResult richardson_extrapolate(double v_h, double v_h2, double v_h4) {
    RichardsonResult r;
    const double d1 = v_h - v_h2;
    const double d2 = v_h2 - v_h4;
    if (d1 == 0.0 || d2 == 0.0) {
        r.limit = v_h4;
        r.order_defined = false;
        return r;
    }
    r.observed_order = std::log2(std::abs(d1) / std::abs(d2));
    r.order_defined = std::isfinite(r.observed_order) && r.observed_order > 0.0;
    if (!r.order_defined) {
        r.limit = v_h4;
        return r;
    }
    r.limit = v_h4 - d2 / (std::pow(2.0, r.observed_order) - 1.0);
    return r;
}

namespace {

// ----- small dense linear algebra for the 5-parameter fit -----

constexpr int kFitParams = 5;
using Params = std::array<double, kFitParams>;
using Matrix = std::array<std::array<double, kFitParams>, kFitParams>;

bool solve_linear(Matrix a, Params b, Params& x) {
    for (int col = 0; col < kFitParams; ++col) {
        int pivot = col;
        for (int r = col + 1; r < kFitParams; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < kFitParams; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < kFitParams; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int r = kFitParams - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < kFitParams; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return true;
}

bool invert_matrix(const Matrix& a, Matrix& inv) {
    for (int col = 0; col < kFitParams; ++col) {
        Params e{};
        e[col] = 1.0;
        Params x{};
        if (!solve_linear(a, e, x)) return false;
        for (int r = 0; r < kFitParams; ++r) inv[r][col] = x[r];
    }
    return true;
}

double model_value(const Params& p, double k, double K) {
    return p[0] + p[1] * std::pow(k, p[2]) + p[3] * std::pow(K, p[4]);
}

void model_jacobian(const Params& p, double k, double K, std::array<double, kFitParams>& row) {
    const double pk = std::pow(k, p[2]);
    const double pK = std::pow(K, p[4]);
    row[0] = 1.0;
    row[1] = pk;
    row[2] = p[1] * pk * std::log(k);
    row[3] = pK;
    row[4] = p[3] * pK * std::log(K);
}

double half_ssr(std::span<const FitSample> samples, const Params& p) {
    double s = 0.0;
    for (const auto& q : samples) {
        const double r = q.value - model_value(p, q.k, q.K);
        s += r * r;
    }
    return 0.5 * s;
}

// Log-log slope of |U(x, fixed) - U(x_min, fixed)| against x along the slice
// with the most distinct x values; falls back to 2 when the slice is too
// short or the slope is implausible.
struct SliceInit {
    double q = 2.0;
    double c = 0.0;
};

SliceInit slice_init(std::span<const FitSample> samples, bool along_k) {
    std::map<double, std::map<double, double>> by_fixed;  // fixed -> x -> value
    for (const auto& s : samples) {
        const double fixed = along_k ? s.K : s.k;
        const double x = along_k ? s.k : s.K;
        by_fixed[fixed][x] = s.value;
    }
    const std::map<double, double>* slice = nullptr;
    std::size_t best = 0;
    for (const auto& [fixed, m] : by_fixed) {
        if (m.size() > best) {
            best = m.size();
            slice = &m;
        }
    }
    SliceInit init;
    if (!slice || slice->size() < 3) {
        if (slice && slice->size() >= 2) {
            const auto lo = slice->begin();
            const auto hi = std::prev(slice->end());
            const double d = hi->second - lo->second;
            const double denom = std::pow(hi->first, init.q) - std::pow(lo->first, init.q);
            if (denom != 0.0) init.c = d / denom;
        }
        return init;
    }

    const auto base = slice->begin();  // finest x
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (auto it = std::next(base); it != slice->end(); ++it) {
        const double d = std::abs(it->second - base->second);
        if (d == 0.0) continue;
        const double lx = std::log(it->first), ly = std::log(d);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n >= 2) {
        const double denom = n * sxx - sx * sx;
        if (denom != 0.0) {
            const double slope = (n * sxy - sx * sy) / denom;
            if (slope > 0.25 && slope < 6.0) init.q = slope;
        }
    }
    const auto coarsest = std::prev(slice->end());
    const double d = coarsest->second - base->second;
    const double denom = std::pow(coarsest->first, init.q) - std::pow(base->first, init.q);
    if (denom != 0.0) init.c = d / denom;
    return init;
}

}  // namespace

FitResult fit_convergence(std::span<const FitSample> samples) {
    std::set<double> ks, Ks;
    for (const auto& s : samples) {
        if (!(s.k > 0.0) || !(s.K > 0.0))
            throw ConfigError("fit_convergence: k and K must be positive");
        ks.insert(s.k);
        Ks.insert(s.K);
    }
    if (samples.size() < 6)
        throw ConfigError("fit_convergence: needs at least 6 samples, got " +
                          std::to_string(samples.size()));
    if (ks.size() < 2 || Ks.size() < 2)
        throw ConfigError("fit_convergence: degenerate design, needs at least 2 distinct k "
                          "and 2 distinct K (got " + std::to_string(ks.size()) + " and " +
                          std::to_string(Ks.size()) + ")");

    // Initialisation: U* from the finest corner, exponents from log-log
    // slices, coefficients from single-point solves on those slices.
    const SliceInit ik = slice_init(samples, true);
    const SliceInit iK = slice_init(samples, false);
    Params p{};
    {
        double u0 = samples[0].value, k_best = samples[0].k, K_best = samples[0].K;
        for (const auto& s : samples) {
            if (s.k < k_best || (s.k == k_best && s.K < K_best)) {
                k_best = s.k;
                K_best = s.K;
                u0 = s.value;
            }
        }
        p = {u0, ik.c, ik.q, iK.c, iK.q};
    }

    const int max_iterations = 2000;
    double mu = 1e-3;
    double cost = half_ssr(samples, p);
    int iter = 0;
    bool converged = false;

    for (; iter < max_iterations; ++iter) {
        Matrix jtj{};
        Params jtr{};
        std::array<double, kFitParams> row{};
        for (const auto& s : samples) {
            model_jacobian(p, s.k, s.K, row);
            const double r = s.value - model_value(p, s.k, s.K);
            for (int a = 0; a < kFitParams; ++a) {
                jtr[a] += row[a] * r;
                for (int b = 0; b < kFitParams; ++b) jtj[a][b] += row[a] * row[b];
            }
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Matrix damped = jtj;
            for (int a = 0; a < kFitParams; ++a)
                damped[a][a] += mu * std::max(jtj[a][a], 1e-12);
            Params delta{};
            if (solve_linear(damped, jtr, delta)) {
                Params trial = p;
                for (int a = 0; a < kFitParams; ++a) trial[a] += delta[a];
                const bool plausible = trial[2] > 0.05 && trial[2] < 10.0 &&
                                       trial[4] > 0.05 && trial[4] < 10.0;
                const double trial_cost =
                    plausible ? half_ssr(samples, trial)
                              : std::numeric_limits<double>::infinity();
                if (std::isfinite(trial_cost) && trial_cost <= cost) {
                    bool small_step = true;
                    for (int a = 0; a < kFitParams; ++a)
                        small_step = small_step &&
                                     std::abs(delta[a]) <= 1e-12 * (std::abs(p[a]) + 1e-30);
                    const bool stagnant = cost - trial_cost <= 1e-15 * std::max(cost, 1e-300);
                    p = trial;
                    cost = trial_cost;
                    mu = std::max(mu / 3.0, 1e-14);
                    stepped = true;
                    if (small_step || stagnant) converged = true;
                    break;
                }
            }
            mu *= 4.0;
        }
        if (!stepped) {
            converged = true;  // damping exhausted, numerically stationary
            break;
        }
        if (converged) break;
    }

    FitResult fit;
    fit.u_star = p[0];
    fit.c_k = p[1];
    fit.q_k = p[2];
    fit.c_K = p[3];
    fit.q_K = p[4];
    fit.residual_norm = std::sqrt(2.0 * cost);
    fit.iterations = iter;

    // Local-curvature confidence from the Gauss-Newton covariance.
    {
        Matrix jtj{};
        std::array<double, kFitParams> row{};
        for (const auto& s : samples) {
            model_jacobian(p, s.k, s.K, row);
            for (int a = 0; a < kFitParams; ++a)
                for (int b = 0; b < kFitParams; ++b) jtj[a][b] += row[a] * row[b];
        }
        Matrix cov{};
        const double dof = std::max<double>(1.0, static_cast<double>(samples.size()) - kFitParams);
        const double sigma2 = 2.0 * cost / dof;
        if (invert_matrix(jtj, cov)) {
            for (int a = 0; a < kFitParams; ++a) {
                const double sd = std::sqrt(std::max(0.0, cov[a][a]) * sigma2);
                fit.rel_confidence[a] =
                    std::abs(p[a]) > 1e-300 ? sd / std::abs(p[a]) : std::numeric_limits<double>::infinity();
            }
        } else {
            fit.rel_confidence.fill(std::numeric_limits<double>::infinity());
        }
    }

    if (!converged)
        throw NonConvergenceError("fit_convergence: no convergence after " +
                                      std::to_string(max_iterations) +
                                      " iterations (residual " + std::to_string(fit.residual_norm) +
                                      ", best U* = " + std::to_string(fit.u_star) + ")",
                                  fit.residual_norm, iter);
    if (!(fit.q_k > 0.0) || !(fit.q_K > 0.0) || !std::isfinite(fit.residual_norm))
        throw NonConvergenceError("fit_convergence: fit ended with non-positive exponents",
                                  fit.residual_norm, iter);
    return fit;
}

double epsilon_scaling_of_ck(const FitResult& fit_eps, const FitResult& fit_eps_smaller) {
    if (!std::isfinite(fit_eps.c_K) || !std::isfinite(fit_eps_smaller.c_K) ||
        fit_eps_smaller.c_K == 0.0)
        throw ConfigError("epsilon_scaling_of_ck: fits do not provide usable C_K values");
    return fit_eps.c_K / fit_eps_smaller.c_K;
}

SpeedupEstimate speedup_estimate(double k, double K, double epsilon, double n_period,
                                 double t_end) {
    if (!(k > 0.0 && K > 0.0 && epsilon > 0.0 && n_period > 0.0 && t_end > 0.0))
        throw ConfigError("speedup_estimate: all arguments must be positive");

    const auto integral = [](double ratio, const char* what) {
        const auto n = static_cast<long long>(std::llround(ratio));
        if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
            throw ConfigError(std::string("speedup_estimate: ") + what + " = " +
                              std::to_string(ratio) + " is not integral");
        return n;
    };
    const long long steps_per_period = integral(1.0 / k, "1/k");
    const long long e_fwd = integral(t_end / k, "t_end/k");
    const long long macro_steps = integral(t_end / K, "t_end/K");

    SpeedupEstimate est;
    est.e_fwd = static_cast<double>(e_fwd);
    est.e_ms = static_cast<double>(macro_steps) * n_period * static_cast<double>(steps_per_period);
    est.ratio = est.e_fwd / est.e_ms;
    est.ratio_eps_form = k / (epsilon * n_period);
    return est;
}

std::vector<TolpRow> tolp_sensitivity(const FastSystem& sys, const ScaleParams& scale,
                                      MacroGrid macro, MicroGrid micro,
                                      std::vector<double> tolp_list, PeriodicMethod method) {
    if (tolp_list.empty()) throw ConfigError("tolp_sensitivity: tolerance list is empty");
    std::sort(tolp_list.begin(), tolp_list.end(), std::greater<>());
    tolp_list.erase(std::unique(tolp_list.begin(), tolp_list.end()), tolp_list.end());

    std::vector<TolpRow> rows;
    rows.reserve(tolp_list.size());
    for (double tol : tolp_list) {
        PeriodicSolverConfig cfg;
        cfg.tol_p = tol;
        cfg.max_cycles = 100'000;
        cfg.method = method;
        const auto traj = run_multiscale(sys, scale, macro, micro, cfg);
        if (traj.status != RunStatus::completed)
            throw DomainExhaustedError("tolp_sensitivity: run at tol_p = " + std::to_string(tol) +
                                           " exhausted the domain",
                                       scale.u_max, traj.failed_step);
        rows.push_back({tol, traj.final_u(), 0.0, traj.total_cn_steps, traj.total_cycles()});
    }
    const double u_ref = rows.back().u_final;  // smallest tolerance is the reference
    for (auto& row : rows) row.diff_vs_ref = std::abs(row.u_final - u_ref);
    return rows;
}

namespace {

// Minimal deterministic worker pool: tasks indexed by an atomic counter,
// results land in preallocated slots, so the merge order never depends on
// scheduling.
void run_parallel(int workers, std::size_t n_tasks, const std::function<void(std::size_t)>& task) {
    if (workers <= 0)
        workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n_tasks)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) return;
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

SweepResult run_convergence_sweep(const FastSystem& sys, const ScaleParams& scale,
                                  std::span<const double> k_list,
                                  std::span<const double> K_list, double tol_p,
                                  double reference_k, int workers) {
    if (k_list.empty() || K_list.empty())
        throw ConfigError("run_convergence_sweep: k and K lists must be non-empty");
    if (!(reference_k > 0.0))
        throw ConfigError("run_convergence_sweep: reference_k must be positive");

    SweepResult result;
    result.reference_k = reference_k;

    // Resolved reference at a halving chain, then the grid of multiscale runs.
    struct Task {
        bool resolved;
        double k, K;
    };
    std::vector<Task> tasks;
    for (int i = 0; i < 3; ++i)
        tasks.push_back({true, reference_k / std::pow(2.0, i), 0.0});
    std::vector<double> ks(k_list.begin(), k_list.end());
    std::vector<double> Ks(K_list.begin(), K_list.end());
    std::sort(ks.begin(), ks.end());
    std::sort(Ks.begin(), Ks.end());
    for (double k : ks)
        for (double K : Ks) tasks.push_back({false, k, K});

    std::vector<double> resolved_values(3, 0.0);
    std::vector<SweepRow> rows(tasks.size() - 3);

    run_parallel(workers, tasks.size(), [&](std::size_t i) {
        const Task& t = tasks[i];
        if (t.resolved) {
            const FastState v0 = periodic_initial_state(sys, scale, t.k);
            const auto traj = run_resolved(sys, scale, t.k, v0, /*stride=*/1 << 20);
            if (traj.status != RunStatus::completed)
                throw DomainExhaustedError("sweep reference run exhausted the domain",
                                           scale.u_max, traj.failed_step);
            resolved_values[i] = traj.final_u;
        } else {
            const MicroGrid micro{static_cast<int>(std::llround(1.0 / t.k))};
            const MacroGrid macro = MacroGrid::from_step(scale.t_end, t.K);
            PeriodicSolverConfig cfg;
            cfg.tol_p = tol_p;
            cfg.max_cycles = 100'000;
            const auto traj = run_multiscale(sys, scale, macro, micro, cfg);
            if (traj.status != RunStatus::completed)
                throw DomainExhaustedError("sweep run exhausted the domain", scale.u_max,
                                           traj.failed_step);
            rows[i - 3] = SweepRow{scale.epsilon, t.k,
                                   t.K,           tol_p,
                                   traj.final_u(), 0.0,
                                   traj.total_cn_steps, traj.total_cycles()};
        }
    });

    const auto ref =
        richardson_extrapolate(resolved_values[0], resolved_values[1], resolved_values[2]);
    result.u_reference = ref.limit;
    result.reference_order = ref.observed_order;
    result.reference_values = {resolved_values[0], resolved_values[1], resolved_values[2]};

    for (auto& row : rows) row.error = std::abs(row.u_final - result.u_reference);
    result.rows = std::move(rows);
    return result;
}

}  // namespace tms
