#include "tms/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace tms {

namespace {

constexpr int kFloorGridPoints = 10'000;     // dense grid for the floor check
constexpr int kDerivativeGridPoints = 2'000; // centered differences for d/du
constexpr int kPeriodicityProbes = 257;      // forcing periodicity check

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

void ScaleParams::validate() const {
    // epsilon = 0 is admitted as the degenerate frozen-slow-variable probe.
    if (!(epsilon >= 0.0))
        throw ConfigError("ScaleParams: epsilon must be nonnegative, got " + fmt(epsilon));
    if (!(t_end > 0.0))
        throw ConfigError("ScaleParams: t_end must be positive, got " + fmt(t_end));
    if (!(u_max > 0.0))
        throw ConfigError("ScaleParams: u_max must be positive, got " + fmt(u_max));
    if (!(u0 >= 0.0 && u0 <= u_max))
        throw ConfigError("ScaleParams: u0 must lie in [0, u_max], got " + fmt(u0));
}

std::vector<std::string> ScaleParams::warnings() const {
    std::vector<std::string> w;
    if (epsilon * t_end > 10.0)
        w.push_back("ScaleParams: epsilon * t_end = " + fmt(epsilon * t_end) +
                    " exceeds 10; the horizon is intended to be T = O(1/epsilon)");
    return w;
}

DecayLaw::DecayLaw(std::function<double(double)> fn, double lambda_floor,
                   double derivative_bound, double u_check_max)
    : fn_(std::move(fn)),
      floor_(lambda_floor),
      derivative_bound_(derivative_bound),
      u_check_max_(u_check_max) {
    if (!fn_) throw ConfigError("DecayLaw: evaluation function is empty");
    if (!(floor_ > 0.0))
        throw ConfigError("DecayLaw: declared lambda_floor must be positive, got " + fmt(floor_));
    if (!(derivative_bound_ >= 0.0) || !std::isfinite(derivative_bound_))
        throw ConfigError("DecayLaw: derivative_bound must be finite and nonnegative");
    if (!(u_check_max_ > 0.0))
        throw ConfigError("DecayLaw: u_check_max must be positive, got " + fmt(u_check_max_));

    // Floor check on a dense grid over [0, u_check_max].
    for (int i = 0; i <= kFloorGridPoints; ++i) {
        const double u = u_check_max_ * static_cast<double>(i) / kFloorGridPoints;
        const double lam = fn_(u);
        if (!std::isfinite(lam))
            throw ConfigError("DecayLaw: lambda(" + fmt(u) + ") is not finite");
        if (lam < floor_)
            throw ConfigError("DecayLaw floor violated: lambda(" + fmt(u) + ") = " +
                              fmt(lam) + " < declared lambda_floor = " + fmt(floor_));
    }

    // Derivative bound by centered differences; small slack for the finite
    // difference truncation and roundoff.
    const double h = u_check_max_ / kDerivativeGridPoints;
    const double slack = 1e-8 * (1.0 + derivative_bound_) + 64.0 * h * h;
    for (int i = 0; i < kDerivativeGridPoints; ++i) {
        const double a = i * h;
        const double quotient = std::abs(fn_(a + h) - fn_(a)) / h;
        if (quotient > derivative_bound_ + slack)
            throw ConfigError("DecayLaw derivative bound violated near u = " + fmt(a) +
                              ": sampled |dlambda/du| = " + fmt(quotient) +
                              " > declared bound = " + fmt(derivative_bound_));
    }
}

FastState::FastState(std::vector<double> v) : values(std::move(v)) {
    for (double x : values)
        if (!std::isfinite(x))
            throw ConfigError("FastState: entries must be finite");
}

FastSystem::FastSystem(std::vector<DecayLaw> decay_laws, Forcing forcing,
                       std::vector<double> wall_weights, double sigma0, double u_max)
    : decay_(std::move(decay_laws)),
      forcing_(std::move(forcing)),
      wall_weights_(std::move(wall_weights)),
      sigma0_(sigma0),
      u_max_(u_max) {
    if (decay_.empty()) throw ConfigError("FastSystem: needs at least one mode");
    if (!forcing_) throw ConfigError("FastSystem: forcing function is empty");
    if (wall_weights_.size() != decay_.size())
        throw ConfigError("FastSystem: wall_weights size " + std::to_string(wall_weights_.size()) +
                          " does not match dim " + std::to_string(decay_.size()));
    if (!(sigma0_ > 0.0))
        throw ConfigError("FastSystem: sigma0 must be positive, got " + fmt(sigma0_));
    if (!(u_max_ > 0.0))
        throw ConfigError("FastSystem: u_max must be positive");

    // 1-periodicity of the forcing, |f(t+1) - f(t)| = 0 up to roundoff.
    const int d = dim();
    std::vector<double> fa(d), fb(d);
    for (int i = 0; i < kPeriodicityProbes; ++i) {
        const double t = static_cast<double>(i) / kPeriodicityProbes;
        eval_forcing(t, fa);
        eval_forcing(t + 1.0, fb);
        double scale = 1.0;
        for (int m = 0; m < d; ++m) scale = std::max(scale, std::abs(fa[m]));
        for (int m = 0; m < d; ++m) {
            if (std::abs(fb[m] - fa[m]) > 1e-12 * scale)
                throw ConfigError("FastSystem: forcing is not 1-periodic at t = " + fmt(t) +
                                  " (mode " + std::to_string(m) + ")");
        }
    }
}

void FastSystem::eval_forcing(double t, std::span<double> out) const {
    forcing_(t, out);
}

double FastSystem::forcing_sup_norm(int mode) const {
    const int n = 4096;
    std::vector<double> f(dim());
    double sup = 0.0;
    for (int i = 0; i < n; ++i) {
        eval_forcing(static_cast<double>(i) / n, f);
        sup = std::max(sup, std::abs(f[mode]));
    }
    return sup;
}

double wall_functional(const FastSystem& sys, std::span<const double> v) {
    if (static_cast<int>(v.size()) != sys.dim())
        throw ConfigError("wall_functional: state dim " + std::to_string(v.size()) +
                          " does not match system dim " + std::to_string(sys.dim()));
    double s = 0.0;
    const auto w = sys.wall_weights();
    for (int i = 0; i < sys.dim(); ++i) s += w[i] * v[i];
    return s / sys.sigma0();
}

double wall_functional(const FastSystem& sys, const FastState& v) {
    return wall_functional(sys, std::span<const double>(v.values));
}

double reaction(double u, double sigma, double u_max) {
    if (!(u >= 0.0 && u <= u_max))
        throw DomainError("reaction: u = " + fmt(u) + " outside [0, " + fmt(u_max) + "]");
    return 1.0 / ((1.0 + u) * (1.0 + sigma * sigma));
}

LipschitzProbe lipschitz_probe(double u_lo, double u_hi, double sigma_lo,
                               double sigma_hi, int n_samples, double u_max) {
    if (n_samples < 2) throw ConfigError("lipschitz_probe: n_samples must be >= 2");
    if (u_hi < u_lo || sigma_hi < sigma_lo)
        throw ConfigError("lipschitz_probe: ranges must be ordered");

    LipschitzProbe probe;
    const int n = n_samples;
    auto u_at = [&](int i) { return u_lo + (u_hi - u_lo) * i / (n - 1); };
    auto s_at = [&](int j) { return sigma_lo + (sigma_hi - sigma_lo) * j / (n - 1); };

    for (int j = 0; j < n; ++j) {
        const double s = s_at(j);
        for (int i = 0; i + 1 < n; ++i) {
            const double du = u_at(i + 1) - u_at(i);
            if (du == 0.0) continue;
            const double q = std::abs(reaction(u_at(i + 1), s, u_max) -
                                      reaction(u_at(i), s, u_max)) / du;
            probe.bound_u = std::max(probe.bound_u, q);
        }
    }
    for (int i = 0; i < n; ++i) {
        const double u = u_at(i);
        for (int j = 0; j + 1 < n; ++j) {
            const double ds = s_at(j + 1) - s_at(j);
            if (ds == 0.0) continue;
            const double q = std::abs(reaction(u, s_at(j + 1), u_max) -
                                      reaction(u, s_at(j), u_max)) / ds;
            probe.bound_sigma = std::max(probe.bound_sigma, q);
        }
    }
    return probe;
}

double eval_forcing_term(const ForcingTerm& term, double t) {
    using std::numbers::pi;
    switch (term.kind) {
        case ForcingTerm::Kind::constant:
            return term.amplitude;
        case ForcingTerm::Kind::sin:
            return term.amplitude * std::sin(2.0 * pi * term.harmonic * t);
        case ForcingTerm::Kind::cos:
            return term.amplitude * std::cos(2.0 * pi * term.harmonic * t);
        case ForcingTerm::Kind::sinsq: {
            const double s = std::sin(pi * term.harmonic * t);
            return term.amplitude * s * s;
        }
    }
    throw ConfigError("eval_forcing_term: unknown forcing kind");
}

FastSystem build_system(const SystemSpec& spec, double u_max) {
    if (spec.modes.empty()) throw ConfigError("SystemSpec: needs at least one mode");

    std::vector<DecayLaw> laws;
    std::vector<double> weights;
    laws.reserve(spec.modes.size());
    for (const auto& m : spec.modes) {
        const double c = m.lambda_const, s = m.lambda_slope;
        const double floor = std::min(c, c + s * u_max);
        if (!(floor > 0.0))
            throw ConfigError("SystemSpec: affine decay law " + fmt(c) + " + " + fmt(s) +
                              "*u has no positive floor on [0, " + fmt(u_max) + "]");
        laws.emplace_back([c, s](double u) { return c + s * u; }, floor, std::abs(s), u_max);
        weights.push_back(m.wall_weight);
    }

    auto modes = spec.modes;  // owned copy for the forcing closure
    FastSystem::Forcing forcing = [modes](double t, std::span<double> out) {
        for (std::size_t i = 0; i < modes.size(); ++i) {
            double f = 0.0;
            for (const auto& term : modes[i].forcing) f += eval_forcing_term(term, t);
            out[i] = f;
        }
    };

    return FastSystem(std::move(laws), std::move(forcing), std::move(weights),
                      spec.sigma0, u_max);
}

SystemSpec scalar_default_spec() {
    SystemSpec spec;
    ModeSpec mode;
    mode.lambda_const = 1.0;
    mode.lambda_slope = 1.0;
    mode.forcing = {ForcingTerm{ForcingTerm::Kind::sin, 1, 1.0}};
    mode.wall_weight = 1.0;
    spec.modes = {mode};
    spec.sigma0 = 1.0;
    return spec;
}

SystemSpec modal_default_spec() {
    SystemSpec spec;
    for (int i = 1; i <= 4; ++i) {
        ModeSpec mode;
        mode.lambda_const = static_cast<double>(i);
        mode.lambda_slope = static_cast<double>(i);
        mode.forcing = {ForcingTerm{ForcingTerm::Kind::sinsq, 1, 1.0 / i}};
        mode.wall_weight = 1.0 / i;
        spec.modes.push_back(mode);
    }
    spec.sigma0 = 2035.0 / 3456.0;
    return spec;
}

ScaleParams default_scale() {
    return ScaleParams{1e-3, 1000.0, 1.0, 0.0};
}

}  // namespace tms
