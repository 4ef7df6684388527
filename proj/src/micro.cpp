#include "tms/micro.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace tms {

void MicroGrid::validate() const {
    if (steps < 2)
        throw ConfigError("MicroGrid: steps must be >= 2, got " + std::to_string(steps));
}

ForcingTable::ForcingTable(const FastSystem& sys, MicroGrid grid)
    : steps_(grid.steps), dim_(sys.dim()) {
    grid.validate();
    values_.resize(static_cast<std::size_t>(steps_ + 1) * dim_);
    const double k = grid.dt();
    for (int m = 0; m < steps_; ++m) {
        sys.eval_forcing(m * k, {values_.data() + static_cast<std::size_t>(m) * dim_,
                                 static_cast<std::size_t>(dim_)});
    }
    // Node M carries phase 1.0 == phase 0.0; reuse row 0 so periodicity of the
    // table is exact regardless of roundoff in the forcing evaluation.
    for (int i = 0; i < dim_; ++i)
        values_[static_cast<std::size_t>(steps_) * dim_ + i] = values_[i];
}

FastState MicroSolution::initial_state() const {
    return FastState(std::vector<double>(at(0).begin(), at(0).end()));
}

FastState MicroSolution::final_state() const {
    return FastState(std::vector<double>(at(grid.steps).begin(), at(grid.steps).end()));
}

double MicroSolution::recomputed_residual() const {
    const auto a = at(grid.steps);
    const auto b = at(0);
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

void PeriodicSolverConfig::validate() const {
    if (!(tol_p > 0.0)) throw ConfigError("PeriodicSolverConfig: tol_p must be positive");
    if (max_cycles < 1) throw ConfigError("PeriodicSolverConfig: max_cycles must be >= 1");
}

namespace {

// Per-mode Crank-Nicolson step coefficients at frozen u.
struct CnCoeffs {
    std::vector<double> decay_factor;  // (1 - k lambda/2) / (1 + k lambda/2)
    std::vector<double> force_factor;  // (k/2) / (1 + k lambda/2)
};

CnCoeffs cn_coeffs(const FastSystem& sys, double u, double k) {
    CnCoeffs c;
    const int d = sys.dim();
    c.decay_factor.resize(d);
    c.force_factor.resize(d);
    for (int i = 0; i < d; ++i) {
        const double lam = sys.lambda(i, u);
        const double denom = 1.0 + 0.5 * k * lam;
        c.decay_factor[i] = (1.0 - 0.5 * k * lam) / denom;
        c.force_factor[i] = 0.5 * k / denom;
    }
    return c;
}

void check_u(const FastSystem& sys, double u) {
    if (!(u >= 0.0 && u <= sys.u_max()))
        throw DomainError("micro solver: u = " + std::to_string(u) + " outside [0, " +
                          std::to_string(sys.u_max()) + "]");
}

// One CN sweep writing all nodes into sol.samples; returns the residual.
double run_cycle(const CnCoeffs& c, const ForcingTable& table, std::span<const double> v0,
                 MicroSolution& sol) {
    const int M = sol.grid.steps;
    const int d = sol.dim;
    double* s = sol.samples.data();
    for (int i = 0; i < d; ++i) s[i] = v0[i];
    for (int m = 1; m <= M; ++m) {
        const double* prev = s + static_cast<std::size_t>(m - 1) * d;
        double* cur = s + static_cast<std::size_t>(m) * d;
        const auto f_prev = table.at(m - 1);
        const auto f_cur = table.at(m);
        for (int i = 0; i < d; ++i)
            cur[i] = c.decay_factor[i] * prev[i] + c.force_factor[i] * (f_prev[i] + f_cur[i]);
    }
    double res = 0.0;
    const double* last = s + static_cast<std::size_t>(M) * d;
    for (int i = 0; i < d; ++i) res += (last[i] - s[i]) * (last[i] - s[i]);
    return std::sqrt(res);
}

void fill_cycle_average(MicroSolution& sol) {
    const int M = sol.grid.steps;
    const int d = sol.dim;
    sol.cycle_average.assign(d, 0.0);
    for (int m = 1; m <= M; ++m) {
        const auto row = sol.at(m);
        for (int i = 0; i < d; ++i) sol.cycle_average[i] += row[i];
    }
    for (int i = 0; i < d; ++i) sol.cycle_average[i] /= M;
}

MicroSolution make_solution(const FastSystem& sys, double u, MicroGrid grid) {
    MicroSolution sol;
    sol.grid = grid;
    sol.dim = sys.dim();
    sol.u_frozen = u;
    sol.samples.resize(static_cast<std::size_t>(grid.steps + 1) * sys.dim());
    return sol;
}

enum class UpdateRule { picard, averaged };

MicroSolution iterate_periodic(const FastSystem& sys, double u, const FastState& v_guess,
                               MicroGrid grid, const PeriodicSolverConfig& cfg,
                               UpdateRule rule) {
    grid.validate();
    cfg.validate();
    check_u(sys, u);
    if (v_guess.dim() != sys.dim())
        throw ConfigError("periodic solver: guess dim " + std::to_string(v_guess.dim()) +
                          " does not match system dim " + std::to_string(sys.dim()));

    const ForcingTable table(sys, grid);
    const CnCoeffs coeffs = cn_coeffs(sys, u, grid.dt());
    MicroSolution sol = make_solution(sys, u, grid);
    const int d = sol.dim;

    std::vector<double> v0 = v_guess.values;
    for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
        const double res = run_cycle(coeffs, table, v0, sol);
        sol.residual_history.push_back(res);
        if (res < cfg.tol_p) {
            sol.periodicity_residual = res;
            sol.cycles_used = cycle;
            fill_cycle_average(sol);
            return sol;
        }
        const auto v_end = sol.at(grid.steps);
        if (rule == UpdateRule::picard) {
            for (int i = 0; i < d; ++i) v0[i] = v_end[i];
        } else {
            // Stationary update lambda_i w_i = v_i(1) - v_i(0), then restart
            // from v(1) + w.
            for (int i = 0; i < d; ++i) {
                const double w = (v_end[i] - sol.at(0)[i]) / sys.lambda(i, u);
                v0[i] = v_end[i] + w;
            }
        }
    }
    throw NonConvergenceError(
        "periodic solver did not reach tol_p = " + std::to_string(cfg.tol_p) + " within " +
            std::to_string(cfg.max_cycles) + " cycles (last residual " +
            std::to_string(sol.residual_history.back()) + ", u = " + std::to_string(u) + ")",
        sol.residual_history.back(), cfg.max_cycles);
}

}  // namespace

MicroSolution cn_cycle(const FastSystem& sys, double u, const FastState& v_init,
                       MicroGrid grid) {
    grid.validate();
    check_u(sys, u);
    if (v_init.dim() != sys.dim())
        throw ConfigError("cn_cycle: state dim does not match system dim");
    const ForcingTable table(sys, grid);
    const CnCoeffs coeffs = cn_coeffs(sys, u, grid.dt());
    MicroSolution sol = make_solution(sys, u, grid);
    sol.periodicity_residual = run_cycle(coeffs, table, v_init.values, sol);
    sol.cycles_used = 1;
    sol.residual_history.push_back(sol.periodicity_residual);
    fill_cycle_average(sol);
    return sol;
}

double periodic_exact_scalar(const FastSystem& sys, double u, int n_quad) {
    if (sys.dim() != 1)
        throw ConfigError("periodic_exact_scalar: system must be scalar (dim = 1)");
    if (n_quad < 16) throw ConfigError("periodic_exact_scalar: n_quad must be >= 16");
    check_u(sys, u);

    const double lam = sys.lambda(0, u);
    // v(0) = (1 - e^{-lambda})^{-1} \int_0^1 f(s) e^{-lambda(1-s)} ds, written
    // with non-positive exponents so large lambda cannot overflow.
    const int n = n_quad % 2 == 0 ? n_quad : n_quad + 1;
    const double h = 1.0 / n;
    double f[1];
    auto integrand = [&](int j) {
        const double s = j * h;
        sys.eval_forcing(s, f);
        return f[0] * std::exp(-lam * (1.0 - s));
    };
    double sum = integrand(0) + integrand(n);
    for (int j = 1; j < n; ++j) sum += (j % 2 == 1 ? 4.0 : 2.0) * integrand(j);
    const double integral = sum * h / 3.0;
    return integral / (1.0 - std::exp(-lam));
}

FastState default_periodic_guess(const FastSystem& sys, double u, int harmonics) {
    check_u(sys, u);
    if (harmonics < 0) throw ConfigError("default_periodic_guess: harmonics must be >= 0");

    using std::numbers::pi;
    const int d = sys.dim();
    const int n = 512;  // periodic trapezoid rule, spectrally accurate
    std::vector<double> f(d);
    std::vector<std::complex<double>> coeff(static_cast<std::size_t>(d) * (harmonics + 1));
    for (int m = 0; m < n; ++m) {
        const double t = static_cast<double>(m) / n;
        sys.eval_forcing(t, f);
        for (int j = 0; j <= harmonics; ++j) {
            const std::complex<double> e = std::polar(1.0 / n, -2.0 * pi * j * t);
            for (int i = 0; i < d; ++i) coeff[static_cast<std::size_t>(i) * (harmonics + 1) + j] += f[i] * e;
        }
    }

    // Periodic response of v' + lambda v = c e^{2 pi i j t} is
    // c e^{2 pi i j t} / (lambda + 2 pi i j); evaluate the sum at t = 0.
    std::vector<double> v0(d);
    for (int i = 0; i < d; ++i) {
        const double lam = sys.lambda(i, u);
        const auto* c = &coeff[static_cast<std::size_t>(i) * (harmonics + 1)];
        double val = c[0].real() / lam;
        for (int j = 1; j <= harmonics; ++j)
            val += 2.0 * (c[j] / std::complex<double>(lam, 2.0 * pi * j)).real();
        v0[i] = val;
    }
    return FastState(std::move(v0));
}

MicroSolution solve_periodic_fixed_point(const FastSystem& sys, double u,
                                         const FastState& v_guess, MicroGrid grid,
                                         const PeriodicSolverConfig& cfg) {
    return iterate_periodic(sys, u, v_guess, grid, cfg, UpdateRule::picard);
}

MicroSolution solve_periodic_averaged(const FastSystem& sys, double u,
                                      const FastState& v_guess, MicroGrid grid,
                                      const PeriodicSolverConfig& cfg) {
    return iterate_periodic(sys, u, v_guess, grid, cfg, UpdateRule::averaged);
}

MicroSolution solve_periodic(const FastSystem& sys, double u, const FastState& v_guess,
                             MicroGrid grid, const PeriodicSolverConfig& cfg) {
    return cfg.method == PeriodicMethod::fixed_point
               ? solve_periodic_fixed_point(sys, u, v_guess, grid, cfg)
               : solve_periodic_averaged(sys, u, v_guess, grid, cfg);
}

double averaged_reaction(const FastSystem& sys, double u, const MicroSolution& sol) {
    if (sol.dim != sys.dim())
        throw ConfigError("averaged_reaction: solution dim does not match system");
    const int M = sol.grid.steps;
    double sum = 0.0;
    for (int m = 1; m <= M; ++m)
        sum += reaction(u, wall_functional(sys, sol.at(m)), sys.u_max());
    return sum / M;
}

}  // namespace tms
