#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tms/study.hpp"

using namespace tms;

TEST_CASE("richardson extrapolation on an exact order-2 sequence") {
    const auto r = richardson_extrapolate(1.04, 1.01, 1.0025);
    CHECK(r.order_defined);
    CHECK(r.observed_order == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.limit == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("richardson flags identical values") {
    const auto r = richardson_extrapolate(0.7, 0.7, 0.7);
    CHECK_FALSE(r.order_defined);
    CHECK(r.limit == 0.7);
}

TEST_CASE("richardson order is invariant under a common offset") {
    const auto a = richardson_extrapolate(1.04, 1.01, 1.0025);
    const auto b = richardson_extrapolate(1.04 + 5.0, 1.01 + 5.0, 1.0025 + 5.0);
    CHECK(b.observed_order == doctest::Approx(a.observed_order).epsilon(1e-12));
    CHECK(b.limit == doctest::Approx(a.limit + 5.0).epsilon(1e-12));
}

namespace {

std::vector<FitSample> synthetic_grid(double u, double ck, double qk, double cK, double qK,
                                      double noise = 0.0) {
    std::vector<FitSample> samples;
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double k : {0.0125, 0.025, 0.05, 0.1})
        for (double K : {400.0, 800.0, 1600.0, 3200.0, 6400.0}) {
            double value = u + ck * std::pow(k, qk) + cK * std::pow(K, qK);
            if (noise > 0.0) value += noise * dist(rng);
            samples.push_back({k, K, value});
        }
    return samples;
}

}  // namespace

TEST_CASE("fit recovers exact synthetic parameters") {
    const auto fit = fit_convergence(synthetic_grid(0.8, -1.0, 2.0, -1e-6, 2.0));
    CHECK(fit.u_star == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(fit.c_k == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(fit.q_k == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.c_K == doctest::Approx(-1e-6).epsilon(1e-6));
    CHECK(fit.q_K == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.residual_norm < 1e-10);
}

TEST_CASE("fit tolerates tiny additive noise") {
    const auto fit = fit_convergence(synthetic_grid(0.8, -1.0, 2.0, -1e-6, 2.0, 1e-9));
    CHECK(std::abs(fit.u_star - 0.8) < 1e-6);
}

TEST_CASE("fit is scale consistent") {
    const double c = 3.7;
    const auto base = fit_convergence(synthetic_grid(0.8, -1.0, 2.0, -1e-6, 2.0));
    auto scaled_samples = synthetic_grid(0.8, -1.0, 2.0, -1e-6, 2.0);
    for (auto& s : scaled_samples) s.value *= c;
    const auto scaled = fit_convergence(scaled_samples);
    CHECK(scaled.u_star == doctest::Approx(c * base.u_star).epsilon(1e-8));
    CHECK(scaled.c_k == doctest::Approx(c * base.c_k).epsilon(1e-8));
    CHECK(scaled.c_K == doctest::Approx(c * base.c_K).epsilon(1e-8));
    CHECK(scaled.q_k == doctest::Approx(base.q_k).epsilon(1e-8));
    CHECK(scaled.q_K == doctest::Approx(base.q_K).epsilon(1e-8));
}

TEST_CASE("fit rejects degenerate designs") {
    std::vector<FitSample> single_K;
    for (double k : {0.00625, 0.0125, 0.025, 0.05, 0.1, 0.2})
        single_K.push_back({k, 400.0, 0.8 - k * k});
    CHECK_THROWS_WITH_AS(fit_convergence(single_K), doctest::Contains("degenerate"),
                         ConfigError);

    std::vector<FitSample> too_few = {{0.1, 400.0, 0.8}, {0.05, 800.0, 0.81},
                                      {0.025, 1600.0, 0.82}, {0.0125, 3200.0, 0.83},
                                      {0.1, 800.0, 0.84}};
    CHECK_THROWS_AS(fit_convergence(too_few), ConfigError);
}

TEST_CASE("epsilon scaling helper") {
    FitResult a, b;
    a.c_K = -4e-8;
    b.c_K = -4e-10;
    CHECK(epsilon_scaling_of_ck(a, b) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(epsilon_scaling_of_ck(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Halving epsilon quarters the constant (C_K tracks eps^2).
    b.c_K = -1e-8;
    const double half = epsilon_scaling_of_ck(a, b);
    CHECK(half > 2.5);
    CHECK(half < 6.0);

    b.c_K = 0.0;
    CHECK_THROWS_AS(epsilon_scaling_of_ck(a, b), ConfigError);
}

TEST_CASE("speedup estimate arithmetic") {
    const auto est = speedup_estimate(0.01, 10.0, 1e-3, 3.0, 1000.0);
    CHECK(est.e_fwd == 100000.0);
    CHECK(est.e_ms == 30000.0);
    CHECK(est.ratio == doctest::Approx(10.0 / 3.0).epsilon(1e-12));

    // K = k/eps puts the closed form on top of the count ratio.
    const auto bal = speedup_estimate(0.05, 1000.0, 5e-5, 5.0, 10000.0);
    CHECK(bal.ratio_eps_form == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(bal.ratio == doctest::Approx(bal.ratio_eps_form).epsilon(1e-12));

    // Degenerate configuration with no skipping.
    const auto none = speedup_estimate(0.01, 1.0, 1e-3, 1.0, 1000.0);
    CHECK(none.e_ms == none.e_fwd);
    CHECK(none.ratio == 1.0);

    CHECK_THROWS_AS(speedup_estimate(0.013, 10.0, 1e-3, 3.0, 1000.0), ConfigError);
    CHECK_THROWS_AS(speedup_estimate(0.01, 10.0, 1e-3, -1.0, 1000.0), ConfigError);
}

TEST_CASE("tolp sensitivity rows are ordered and anchored at the reference") {
    auto sys = build_system(scalar_default_spec(), 1.0);
    ScaleParams scale{1e-3, 200.0, 1.0, 0.0};
    auto rows = tolp_sensitivity(sys, scale, MacroGrid::from_step(200.0, 10.0), MicroGrid{100},
                                 {1e-2, 1e-8, 1e-4});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].tol_p == 1e-2);
    CHECK(rows[1].tol_p == 1e-4);
    CHECK(rows[2].tol_p == 1e-8);
    CHECK(rows[2].diff_vs_ref == 0.0);  // reference row
    for (const auto& r : rows) CHECK(r.total_cn_steps > 0);
}

TEST_CASE("tolp differences vanish for the zero-forcing problem") {
    auto sys = oracle::decay_only_system(1.0);
    ScaleParams scale{1e-3, 100.0, 1.0, 0.0};
    auto rows = tolp_sensitivity(sys, scale, MacroGrid::from_step(100.0, 10.0), MicroGrid{50},
                                 {1e-1, 1e-2, 1e-3, 1e-8});
    for (const auto& r : rows) CHECK(r.diff_vs_ref == 0.0);
}

TEST_CASE("convergence sweep produces ordered rows and matching counters") {
    auto sys = build_system(scalar_default_spec(), 1.0);
    ScaleParams scale{1e-3, 100.0, 1.0, 0.0};
    const double ks[] = {1.0 / 20, 1.0 / 40};
    const double Ks[] = {10.0, 5.0};
    const auto sweep = run_convergence_sweep(sys, scale, ks, Ks, 1e-9, 1.0 / 40, 2);

    REQUIRE(sweep.rows.size() == 4);
    CHECK(sweep.rows[0].k == 1.0 / 40);  // sorted by (k, K)
    CHECK(sweep.rows[0].K == 5.0);
    CHECK(sweep.rows[3].k == 1.0 / 20);
    CHECK(sweep.rows[3].K == 10.0);
    for (const auto& row : sweep.rows) {
        CHECK(row.e_ms > 0);
        CHECK(row.cycles_total > 0);
        CHECK(row.error < 1e-3);
    }
    CHECK(sweep.reference_order == doctest::Approx(2.0).epsilon(0.2));

    // The counters reported by the sweep equal an independent multiscale run.
    PeriodicSolverConfig cfg;
    cfg.tol_p = 1e-9;
    cfg.max_cycles = 100000;
    auto traj = run_multiscale(sys, scale, MacroGrid::from_step(100.0, 5.0), MicroGrid{40}, cfg);
    CHECK(traj.total_cn_steps == sweep.rows[0].e_ms);
    CHECK(traj.final_u() == sweep.rows[0].u_final);
}

TEST_CASE("sweep results do not depend on the worker count") {
    auto sys = build_system(modal_default_spec(), 1.0);
    ScaleParams scale{1e-3, 100.0, 1.0, 0.0};
    const double ks[] = {1.0 / 20, 1.0 / 40};
    const double Ks[] = {10.0, 4.0};
    const auto serial = run_convergence_sweep(sys, scale, ks, Ks, 1e-8, 1.0 / 40, 1);
    const auto parallel = run_convergence_sweep(sys, scale, ks, Ks, 1e-8, 1.0 / 40, 4);
    REQUIRE(serial.rows.size() == parallel.rows.size());
    CHECK(serial.u_reference == parallel.u_reference);
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].u_final == parallel.rows[i].u_final);
        CHECK(serial.rows[i].e_ms == parallel.rows[i].e_ms);
    }
}
