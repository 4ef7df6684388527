#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tms/errors.hpp"

namespace tms {

// Scale parameters of the coupled slow/fast problem. epsilon is the ratio of
// the fast to the slow time scale; the horizon of interest is T = O(1/epsilon).
struct ScaleParams {
    double epsilon = 1e-3;
    double t_end = 1000.0;
    double u_max = 1.0;
    double u0 = 0.0;

    void validate() const;  // throws ConfigError on violated invariants
    // Non-fatal diagnostics, e.g. epsilon * t_end far beyond the slow horizon.
    std::vector<std::string> warnings() const;
};

// Concentration-dependent decay rate u -> lambda(u) with a declared positive
// floor and a declared bound on |dlambda/du| over [0, u_check_max]. Both
// declarations are verified by dense sampling at construction, so arbitrary
// user-supplied callables are accepted.
class DecayLaw {
public:
    DecayLaw(std::function<double(double)> fn, double lambda_floor,
             double derivative_bound, double u_check_max);

    double operator()(double u) const { return fn_(u); }
    double lambda_floor() const { return floor_; }
    double derivative_bound() const { return derivative_bound_; }
    double u_check_max() const { return u_check_max_; }

private:
    std::function<double(double)> fn_;
    double floor_;
    double derivative_bound_;
    double u_check_max_;
};

// One sample of the fast variable: the vector of mode amplitudes.
struct FastState {
    std::vector<double> values;

    FastState() = default;
    explicit FastState(std::vector<double> v);  // rejects non-finite entries
    static FastState zero(int dim) { return FastState(std::vector<double>(dim, 0.0)); }
    int dim() const { return static_cast<int>(values.size()); }
};

// Description of the fast dynamics: per mode i an ODE
//   v_i'(t) + lambda_i(u) v_i(t) = f_i(t),  f_i 1-periodic,
// plus the wall functional weights that turn mode amplitudes into the scalar
// feedback sigma. dim == 1 is the scalar model problem; dim > 1 mimics a
// modal (eigenfunction) expansion of a diffusion-type operator.
class FastSystem {
public:
    using Forcing = std::function<void(double /*t*/, std::span<double> /*out*/)>;

    FastSystem(std::vector<DecayLaw> decay_laws, Forcing forcing,
               std::vector<double> wall_weights, double sigma0, double u_max);

    int dim() const { return static_cast<int>(decay_.size()); }
    double u_max() const { return u_max_; }
    double sigma0() const { return sigma0_; }
    double lambda(int mode, double u) const { return decay_[mode](u); }
    const DecayLaw& decay_law(int mode) const { return decay_[mode]; }
    std::span<const double> wall_weights() const { return wall_weights_; }

    void eval_forcing(double t, std::span<double> out) const;
    // Sup norm of the forcing over one period, estimated on a dense grid.
    double forcing_sup_norm(int mode) const;

private:
    std::vector<DecayLaw> decay_;
    Forcing forcing_;
    std::vector<double> wall_weights_;
    double sigma0_;
    double u_max_;
};

// Linear wall functional sigma = sigma0^{-1} sum_i w_i v_i.
double wall_functional(const FastSystem& sys, std::span<const double> v);
double wall_functional(const FastSystem& sys, const FastState& v);

// Reaction term R(u, sigma) = 1 / ((1 + u)(1 + sigma^2)); 0 < R <= 1 on the
// admissible domain. Throws DomainError for u outside [0, u_max].
double reaction(double u, double sigma, double u_max);

// Max sampled difference quotients of the reaction in each argument over the
// given ranges. A zero-width range yields a zero quotient in that argument.
struct LipschitzProbe {
    double bound_u = 0.0;
    double bound_sigma = 0.0;
};
LipschitzProbe lipschitz_probe(double u_lo, double u_hi, double sigma_lo,
                               double sigma_hi, int n_samples, double u_max);

// ---------------------------------------------------------------------------
// Serializable system description. Decay laws are affine in u and forcing is
// a short list of trigonometric terms, which covers the built-in presets and
// config-file-defined systems; arbitrary callables can still be passed to
// FastSystem directly.

struct ForcingTerm {
    enum class Kind { constant, sin, cos, sinsq };
    Kind kind = Kind::constant;
    int harmonic = 1;      // j in sin(2*pi*j*t), cos(2*pi*j*t), sin^2(pi*j*t)
    double amplitude = 0.0;
};

struct ModeSpec {
    double lambda_const = 1.0;  // lambda_i(u) = lambda_const + lambda_slope * u
    double lambda_slope = 0.0;
    std::vector<ForcingTerm> forcing;
    double wall_weight = 1.0;
};

struct SystemSpec {
    std::vector<ModeSpec> modes;
    double sigma0 = 1.0;

    int dim() const { return static_cast<int>(modes.size()); }
};

FastSystem build_system(const SystemSpec& spec, double u_max);
double eval_forcing_term(const ForcingTerm& term, double t);

// Built-in presets.
//
// scalar-default: lambda(u) = 1 + u, f(t) = sin(2 pi t), w = 1, sigma0 = 1.
// modal-default:  4 modes, lambda_i(u) = i (1 + u), f_i(t) = sin^2(pi t)/i,
//                 w_i = 1/i, sigma0 = 2035/3456. That sigma0 makes the
//                 time-mean of the wall functional over the periodic solution
//                 at u = 0 exactly 1: the cycle mean of mode i is 1/(2 i^2),
//                 so sum_i w_i mean_i = sum_i 1/(2 i^3) = 2035/3456.
SystemSpec scalar_default_spec();
SystemSpec modal_default_spec();
ScaleParams default_scale();

}  // namespace tms
