#pragma once

#include <vector>

#include "tms/macro.hpp"
#include "tms/micro.hpp"
#include "tms/model.hpp"

namespace tms {

// Fully resolved coupled trajectory at the fast step k. Samples are stored
// with a stride to keep memory bounded; the final state and step counters are
// always exact regardless of stride.
struct ResolvedTrajectory {
    double step = 0.0;       // k
    long long stride = 1;    // every stride-th node is stored
    std::vector<double> times;
    std::vector<double> slow;
    std::vector<double> fast;  // stored nodes * dim, row-major
    int dim = 1;

    double final_u = 0.0;
    FastState final_v;
    long long total_steps = 0;  // executed fast steps (also the CN step count)
    RunStatus status = RunStatus::completed;
    long long failed_step = -1;

    std::span<const double> fast_at(std::size_t row) const {
        return {fast.data() + row * dim, static_cast<std::size_t>(dim)};
    }
};

// Refuse resolved runs beyond this many steps and report the projected cost
// instead (the multiscale solver is the tool for that regime).
inline constexpr double kMaxResolvedSteps = 1e9;

// Direct IMEX simulation of the coupled system on [0, t_end]: per step the
// slow variable advances with explicit AB2 (forward Euler on the first step)
// on the pointwise reaction values, then the fast modes take one implicit CN
// step with the decay rate frozen at the freshly updated slow value.
//
// Requires 1/k and t_end/k integral within roundoff. stride = 0 picks an
// automatic stride capping storage at about one million rows.
ResolvedTrajectory run_resolved(const FastSystem& sys, const ScaleParams& scale, double k,
                                const FastState& v_init, long long stride = 0);

// Periodic initial value at u0 computed by the averaged micro solver; the
// default initial state for resolved runs.
FastState periodic_initial_state(const FastSystem& sys, const ScaleParams& scale, double k,
                                 double tol_p = 1e-12);

// Closed-form slow solution for vanishing forcing: with f == 0 the fast
// variable relaxes to zero and u' = eps/(1+u) integrates to
//   u(t) = sqrt((1 + u0)^2 + 2 eps t) - 1.
double closed_form_slow_f0(const ScaleParams& scale, double t);

// Diagnostics measured along one resolved trajectory (initial state = the
// periodic solution at u0, matching the hypotheses of the dynamic-vs-periodic
// comparison):
//   dynamic_periodic_gap  max over probed nodes of ||v(t) - v_{u(t)}(t mod 1)||
//   averaging_defect      max over probed periods of
//                         |(1/M) sum_m [R(ubar, v_m) - R(u_m, v_m)]|, ubar the
//                         box average of u over that period
//   slow_oscillation      max over probed periods of (max u - min u) within
//                         the period
struct ResolvedProbes {
    double dynamic_periodic_gap = 0.0;
    double averaging_defect = 0.0;
    double slow_oscillation = 0.0;
};
ResolvedProbes resolved_probes(const FastSystem& sys, const ScaleParams& scale, double k,
                               double tol_p = 1e-12);

double dynamic_periodic_gap(const FastSystem& sys, const ScaleParams& scale, double k,
                            double tol_p = 1e-12);

}  // namespace tms
