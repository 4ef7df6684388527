#pragma once

#include <span>
#include <vector>

#include "tms/model.hpp"

namespace tms {

// Uniform subdivision of the fast period [0, 1]. The step is defined as
// 1/steps and never stored independently, so steps * dt() == 1 exactly.
struct MicroGrid {
    int steps = 100;  // M

    double dt() const { return 1.0 / steps; }
    void validate() const;
};

// Node values of the forcing on a micro grid. All integrators evaluate the
// forcing through this table, indexed by node position modulo the period, so
// phases stay exact over arbitrarily long runs.
class ForcingTable {
public:
    ForcingTable(const FastSystem& sys, MicroGrid grid);

    std::span<const double> at(int node) const {
        return {values_.data() + static_cast<std::size_t>(node) * dim_,
                static_cast<std::size_t>(dim_)};
    }
    // Node index for global step m (phase m mod M).
    std::span<const double> at_step(long long m) const {
        return at(static_cast<int>(m % steps_));
    }
    int steps() const { return steps_; }

private:
    std::vector<double> values_;  // (steps + 1) rows; row M duplicates row 0
    int steps_;
    int dim_;
};

// One period of the fast trajectory at frozen slow value u_frozen, sampled at
// the grid nodes t_0..t_M.
struct MicroSolution {
    MicroGrid grid;
    int dim = 1;
    std::vector<double> samples;        // (steps + 1) * dim, row-major
    double periodicity_residual = 0.0;  // ||samples[M] - samples[0]||_2
    int cycles_used = 0;
    double u_frozen = 0.0;
    std::vector<double> residual_history;  // residual after each cycle
    std::vector<double> cycle_average;     // box-rule mean of the last cycle

    std::span<const double> at(int node) const {
        return {samples.data() + static_cast<std::size_t>(node) * dim,
                static_cast<std::size_t>(dim)};
    }
    double scalar_at(int node) const { return at(node)[0]; }
    FastState initial_state() const;
    FastState final_state() const;
    double recomputed_residual() const;
};

enum class PeriodicMethod { fixed_point, averaged };

struct PeriodicSolverConfig {
    double tol_p = 1e-8;
    int max_cycles = 400;
    PeriodicMethod method = PeriodicMethod::averaged;

    void validate() const;
};

// One Crank-Nicolson sweep over [0, 1] from v_init at frozen u. Per mode the
// update is v_m = ((1 - k l/2) v_{m-1} + (k/2)(f_{m-1} + f_m)) / (1 + k l/2).
// No periodicity is required; the residual field reports ||v_M - v_0||.
MicroSolution cn_cycle(const FastSystem& sys, double u, const FastState& v_init,
                       MicroGrid grid);

// Unique periodic initial value of the scalar (dim = 1) problem,
//   v(0) = (1 - e^{-lambda})^{-1} \int_0^1 f(s) e^{-lambda (1 - s)} ds,
// evaluated with composite Simpson quadrature on n_quad panels. Oracle only.
double periodic_exact_scalar(const FastSystem& sys, double u, int n_quad = 1 << 14);

// Initial guess for a periodic solve: periodic response of each linear mode
// to the forcing truncated to `harmonics` Fourier harmonics. Exact for
// band-limited forcing, cheap for any smooth forcing (a few quadratures, no
// ODE solves).
FastState default_periodic_guess(const FastSystem& sys, double u, int harmonics = 2);

// Picard iteration: rerun cycles with v(0) <- v(1) until the periodicity
// residual drops below tol_p. Error contraction per cycle is e^{-lambda}.
MicroSolution solve_periodic_fixed_point(const FastSystem& sys, double u,
                                         const FastState& v_guess, MicroGrid grid,
                                         const PeriodicSolverConfig& cfg);

// Accelerated iteration: after each non-converged cycle solve the stationary
// update lambda_i(u) w_i = v_i(1) - v_i(0) and restart from v(1) + w. For the
// scalar linear problem the error contraction per cycle is
// e^{-lambda} + (e^{-lambda} - 1)/lambda, much smaller than e^{-lambda} for
// moderate lambda.
MicroSolution solve_periodic_averaged(const FastSystem& sys, double u,
                                      const FastState& v_guess, MicroGrid grid,
                                      const PeriodicSolverConfig& cfg);

// Dispatch on cfg.method.
MicroSolution solve_periodic(const FastSystem& sys, double u, const FastState& v_guess,
                             MicroGrid grid, const PeriodicSolverConfig& cfg);

// Box-rule averaged feedback over one period,
//   (1/M) sum_{m=1..M} R(u, sigma(v_m)).
// For a periodic solution this equals the trapezoid rule up to O(k tol_p).
double averaged_reaction(const FastSystem& sys, double u, const MicroSolution& sol);

}  // namespace tms
