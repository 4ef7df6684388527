#pragma once

#include <vector>

#include "tms/micro.hpp"
#include "tms/model.hpp"

namespace tms {

// Uniform macro grid covering [0, t_end] with n_steps steps of size step.
struct MacroGrid {
    int n_steps = 100;  // N
    double step = 10.0; // K

    double t_end() const { return n_steps * step; }
    void validate() const;
    std::vector<std::string> warnings() const;  // e.g. K below one fast period

    static MacroGrid from_step_count(double t_end, int n_steps);
    static MacroGrid from_step(double t_end, double step);  // t_end/step must be integral
};

enum class RunStatus { completed, domain_exhausted };

struct MacroTrajectory {
    std::vector<double> times;      // T_0..T_n (n = N on completion)
    std::vector<double> values;     // U_0..U_n
    std::vector<double> reactions;  // averaged feedback per executed step
    std::vector<int> micro_cycles;  // periodic-solver cycles per executed step
    long long total_cn_steps = 0;   // sum over steps of cycles * M
    RunStatus status = RunStatus::completed;
    long long failed_step = -1;     // step index on domain_exhausted

    double final_u() const { return values.back(); }
    long long total_cycles() const;
};

// Forward Euler bootstrap U_1 = U_0 + K eps R_0. Throws DomainExhaustedError
// if the result exceeds u_max.
double euler_bootstrap(double u0, double r0, double step, double epsilon, double u_max);

// Adams-Bashforth-2 update U_n = U_{n-1} + (3K/2) eps R_{n-1} - (K/2) eps R_{n-2}.
// Throws DomainExhaustedError above u_max and Error on a negative result
// (cannot occur for positive reactions and small K eps, still guarded).
double ab2_step(double u_prev, double r_prev, double r_prev2, double step, double epsilon,
                double u_max);

// Explicit temporal multiscale method: per macro step solve the periodic
// micro problem at the frozen previous slow value (warm-started from the
// previous converged initial; spectral guess on the first step), average the
// reaction over the period with the box rule, then advance with forward
// Euler (first step) or AB2. On domain exhaustion the trajectory computed so
// far is returned with the corresponding status. Micro non-convergence
// propagates as NonConvergenceError annotated with the macro step.
MacroTrajectory run_multiscale(const FastSystem& sys, const ScaleParams& scale,
                               MacroGrid macro, MicroGrid micro,
                               const PeriodicSolverConfig& psolver);

}  // namespace tms
