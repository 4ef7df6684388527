#pragma once

#include <array>
#include <span>
#include <vector>

#include "tms/macro.hpp"
#include "tms/model.hpp"
#include "tms/resolved.hpp"

namespace tms {

// Limit and observed order from three values on a strict step-halving chain,
//   order = log2(|v_h - v_h2| / |v_h2 - v_h4|),
//   limit = v_h4 - (v_h2 - v_h4) / (2^order - 1).
// A vanishing successive difference leaves the finest value as the limit with
// the order flagged undefined.
struct RichardsonResult {
    double limit = 0.0;
    double observed_order = 0.0;
    bool order_defined = false;
};
RichardsonResult richardson_extrapolate(double v_h, double v_h2, double v_h4);

// Power-law convergence model U(k, K) = U* + C_k k^{q_k} + C_K K^{q_K}.
struct FitSample {
    double k = 0.0;
    double K = 0.0;
    double value = 0.0;
};

struct FitResult {
    double u_star = 0.0;
    double c_k = 0.0;
    double q_k = 0.0;
    double c_K = 0.0;
    double q_K = 0.0;
    double residual_norm = 0.0;
    // Local-curvature relative confidence per parameter (U*, C_k, q_k, C_K,
    // q_K), from the Gauss-Newton covariance at the optimum. Analogous to, but
    // not identical with, asymptotic standard errors of generic fitters.
    std::array<double, 5> rel_confidence{};
    int iterations = 0;
};

// Damped Gauss-Newton (Levenberg-Marquardt) with analytic Jacobian,
// initialised from log-log slopes of one-dimensional slices. Requires at
// least 6 samples spanning at least 2 distinct k and 2 distinct K.
FitResult fit_convergence(std::span<const FitSample> samples);

// Ratio C_K(eps) / C_K(eps/alpha) of two fits on identical (k, K) grids.
double epsilon_scaling_of_ck(const FitResult& fit_eps, const FitResult& fit_eps_smaller);

// Cost accounting in CN-step units:
//   E_fwd = t_end/k,  E_ms = (t_end/K) n_period (1/k),  ratio = E_fwd/E_ms.
// ratio_eps_form is the closed form k/(eps n_period), which matches ratio
// exactly when K = k/eps. t_end/k and 1/k must be integral; n_period may be a
// fractional measured mean.
struct SpeedupEstimate {
    double e_fwd = 0.0;
    double e_ms = 0.0;
    double ratio = 0.0;
    double ratio_eps_form = 0.0;
};
SpeedupEstimate speedup_estimate(double k, double K, double epsilon, double n_period,
                                 double t_end);

// One multiscale run per tolerance; differences are reported against the run
// at the smallest tolerance in the list. Rows are sorted descending by tol_p.
struct TolpRow {
    double tol_p = 0.0;
    double u_final = 0.0;
    double diff_vs_ref = 0.0;
    long long total_cn_steps = 0;
    long long total_cycles = 0;
};
std::vector<TolpRow> tolp_sensitivity(const FastSystem& sys, const ScaleParams& scale,
                                      MacroGrid macro, MicroGrid micro,
                                      std::vector<double> tolp_list,
                                      PeriodicMethod method = PeriodicMethod::averaged);

// Convergence study: multiscale runs over the k x K grid plus a resolved
// reference extrapolated from runs at {k_ref, k_ref/2, k_ref/4}.
struct SweepRow {
    double epsilon = 0.0;
    double k = 0.0;
    double K = 0.0;
    double tol_p = 0.0;
    double u_final = 0.0;
    double error = 0.0;  // |u_final - u_reference|
    long long e_ms = 0;  // executed CN steps
    long long cycles_total = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;            // sorted by (k, K)
    double u_reference = 0.0;              // Richardson limit of the resolved runs
    double reference_order = 0.0;          // observed order of the resolved chain
    std::array<double, 3> reference_values{};  // u(T) at k_ref, k_ref/2, k_ref/4
    double reference_k = 0.0;
};

SweepResult run_convergence_sweep(const FastSystem& sys, const ScaleParams& scale,
                                  std::span<const double> k_list,
                                  std::span<const double> K_list, double tol_p,
                                  double reference_k, int workers = 0);

}  // namespace tms
