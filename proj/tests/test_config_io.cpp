#include "doctest.h"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tms/config.hpp"
#include "tms/csvio.hpp"

using namespace tms;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    write_file(path, content);
    return path;
}

}  // namespace

TEST_CASE("format_double round-trips exactly") {
    for (double x : {0.1, 1.0 / 3.0, 1e300, 5e-324, -2.75, 0.0, 1000.0, 0.6495190528383290}) {
        const std::string s = format_double(x);
        double parsed = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), parsed);
        REQUIRE(res.ec == std::errc());
        CHECK(parsed == x);
    }
}

TEST_CASE("csv quoting") {
    CHECK(csv_quote("plain") == "plain");
    CHECK(csv_quote("a,b") == "\"a,b\"");
    CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("flag mapping onto a resolved run config") {
    ConfigOverrides ov;
    ov.preset = "scalar-default";
    ov.epsilon = 1e-3;
    ov.macro_step = 10.0;
    ov.micro_steps = 100;
    const auto cfg = load_run_config(std::nullopt, ov);
    CHECK(cfg.scale.epsilon == 1e-3);
    CHECK(cfg.macro_grid().step == 10.0);
    CHECK(cfg.micro_grid().dt() == 0.01);
    CHECK(cfg.system.dim() == 1);
}

TEST_CASE("micro step override accepts only reciprocals of integers") {
    ConfigOverrides ov;
    ov.micro_k = 0.01;
    CHECK(load_run_config(std::nullopt, ov).micro_steps == 100);
    ov.micro_k = 0.013;
    CHECK_THROWS_AS(load_run_config(std::nullopt, ov), ConfigError);
}

TEST_CASE("precedence: flag beats file beats preset") {
    const auto file = temp_file("tms_precedence.json", R"({
        "preset": "scalar-default",
        "scale": { "epsilon": 5e-4 },
        "periodic": { "tol_p": 1e-6 }
    })");
    ConfigOverrides ov;
    ov.epsilon = 2e-3;
    const auto cfg = load_run_config(file.string(), ov);
    CHECK(cfg.scale.epsilon == 2e-3);       // flag wins
    CHECK(cfg.periodic.tol_p == 1e-6);      // file wins over preset default
    CHECK(cfg.scale.t_end == 1000.0);       // preset default survives
}

TEST_CASE("unknown keys are rejected with their path") {
    const auto file = temp_file("tms_unknown.json", R"({
        "scale": { "epsilonn": 1e-3 }
    })");
    CHECK_THROWS_WITH_AS(load_run_config(file.string(), {}),
                         doctest::Contains("scale.epsilonn"), ConfigError);
}

TEST_CASE("config rejects decay laws without a positive floor") {
    const auto file = temp_file("tms_floor.json", R"({
        "system": {
            "sigma0": 1.0,
            "modes": [ { "lambda_const": 0.0, "lambda_slope": 1.0,
                         "forcing": [ {"kind": "sin", "harmonic": 1, "amplitude": 1.0} ] } ]
        }
    })");
    CHECK_THROWS_WITH_AS(load_run_config(file.string(), {}),
                         doctest::Contains("floor"), ConfigError);
}

TEST_CASE("unknown preset is a config error") {
    ConfigOverrides ov;
    ov.preset = "nope";
    CHECK_THROWS_WITH_AS(load_run_config(std::nullopt, ov), doctest::Contains("unknown preset"),
                         ConfigError);
}

TEST_CASE("emitted config round-trips") {
    ConfigOverrides ov;
    ov.preset = "modal-default";
    ov.epsilon = 5e-4;
    ov.macro_step = 25.0;
    ov.tol_p = 1e-7;
    ov.method = "fixed-point";
    const auto cfg = load_run_config(std::nullopt, ov);
    const std::string echo = emit_config(cfg);

    const auto file = temp_file("tms_roundtrip.json", echo);
    const auto cfg2 = load_run_config(file.string(), {});
    CHECK(emit_config(cfg2) == echo);
    CHECK(cfg2.scale.epsilon == cfg.scale.epsilon);
    CHECK(cfg2.periodic.tol_p == cfg.periodic.tol_p);
    CHECK(cfg2.periodic.method == cfg.periodic.method);
    CHECK(cfg2.system.dim() == 4);
    CHECK(cfg2.system.sigma0 == cfg.system.sigma0);
}

TEST_CASE("micro csv carries metadata and all period nodes") {
    auto sys = build_system(scalar_default_spec(), 1.0);
    PeriodicSolverConfig pcfg;
    pcfg.tol_p = 1e-8;
    auto sol = solve_periodic(sys, 0.0, default_periodic_guess(sys, 0.0), MicroGrid{50}, pcfg);
    const std::string csv = micro_solution_csv(sol);
    CHECK(csv.find("# u_frozen=0") != std::string::npos);
    CHECK(csv.find("# residual=") != std::string::npos);
    CHECK(csv.find("# cycles_used=") != std::string::npos);
    CHECK(csv.find("t,v_1\n") != std::string::npos);

    int data_rows = 0;
    std::istringstream is(csv);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
        ++data_rows;
    }
    CHECK(data_rows == 51);  // M + 1 rows
}

TEST_CASE("macro csv has one data row per node plus a summary line") {
    auto sys = build_system(scalar_default_spec(), 1.0);
    ScaleParams scale{1e-3, 20.0, 1.0, 0.0};
    PeriodicSolverConfig pcfg;
    pcfg.tol_p = 1e-8;
    auto traj = run_multiscale(sys, scale, MacroGrid::from_step(20.0, 10.0), MicroGrid{50}, pcfg);
    const std::string csv = macro_trajectory_csv(traj);

    int data_rows = 0;
    std::istringstream is(csv);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("T,", 0) == 0) continue;
        ++data_rows;
    }
    CHECK(data_rows == 3);  // N = 2 macro steps -> 3 nodes
    CHECK(csv.find("# total_cn_steps=") != std::string::npos);
}

TEST_CASE("csv bodies are byte-identical across repeated runs") {
    auto sys = build_system(modal_default_spec(), 1.0);
    ScaleParams scale{1e-3, 100.0, 1.0, 0.0};
    PeriodicSolverConfig pcfg;
    pcfg.tol_p = 1e-8;
    const auto grid = MacroGrid::from_step(100.0, 10.0);
    const std::string a =
        macro_trajectory_csv(run_multiscale(sys, scale, grid, MicroGrid{100}, pcfg));
    const std::string b =
        macro_trajectory_csv(run_multiscale(sys, scale, grid, MicroGrid{100}, pcfg));
    CHECK(a == b);
}

TEST_CASE("sweep csv round-trips into fit samples") {
    SweepResult sweep;
    sweep.u_reference = 0.5;
    sweep.reference_order = 2.0;
    sweep.reference_k = 0.00125;
    sweep.rows = {{1e-3, 0.05, 10.0, 1e-8, 0.512345678901234, 1e-3, 1234, 56},
                  {1e-3, 0.025, 5.0, 1e-8, 0.5234, 2e-3, 2345, 67}};
    const auto path = temp_file("tms_sweep.csv", sweep_csv(sweep));
    const auto samples = read_sweep_samples(path);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].k == 0.05);
    CHECK(samples[0].K == 10.0);
    CHECK(samples[0].value == 0.512345678901234);
    CHECK(samples[1].value == 0.5234);
}

TEST_CASE("summary kv is sorted and deterministic") {
    const std::string s = summary_kv({{"b", "2"}, {"a", "1"}, {"c", "3"}});
    CHECK(s == "a=1\nb=2\nc=3\n");
}
