#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tms/macro.hpp"
#include "tms/micro.hpp"
#include "tms/model.hpp"

namespace tms {

// Fully resolved run configuration: preset defaults, then config file
// sections, then CLI overrides, in increasing precedence. Everything the
// solvers need is materialized here and echoed back to the output directory.
struct RunConfig {
    std::string preset = "scalar-default";
    SystemSpec system;
    ScaleParams scale;

    int micro_steps = 100;          // M
    double macro_step = 10.0;       // K; n_macro_steps wins when both set
    std::optional<int> n_macro_steps;

    PeriodicSolverConfig periodic;
    int guess_harmonics = 2;

    double resolved_k = 0.01;
    long long stride = 0;  // 0 = automatic

    // Study parameters.
    std::vector<double> k_list;
    std::vector<double> K_list;
    std::vector<double> tolp_list;
    std::vector<double> eps_list;  // extra scale ratios for converge studies
    double reference_k = 0.0;      // 0 = smallest k in k_list
    int workers = 0;               // 0 = hardware concurrency

    double solve_u = std::numeric_limits<double>::quiet_NaN();  // NaN = scale.u0

    std::string out_dir;

    MacroGrid macro_grid() const;
    MicroGrid micro_grid() const { return MicroGrid{micro_steps}; }
    FastSystem build() const { return build_system(system, scale.u_max); }
    void validate() const;
};

// CLI-level overrides (highest precedence).
struct ConfigOverrides {
    std::optional<std::string> preset;
    std::optional<double> epsilon, t_end, u_max, u0;
    std::optional<double> macro_step;  // K
    std::optional<int> n_macro_steps;  // N
    std::optional<int> micro_steps;    // M
    std::optional<double> micro_k;     // alternative to M, must be 1/integer
    std::optional<double> tol_p;
    std::optional<int> max_cycles;
    std::optional<std::string> method;
    std::optional<double> resolved_k;
    std::optional<long long> stride;
    std::optional<int> workers;
    std::optional<int> guess_harmonics;
    std::optional<double> solve_u;
    std::optional<std::string> out_dir;
    std::vector<double> k_list, K_list, tolp_list, eps_list;
    std::optional<double> reference_k;
};

// Build a RunConfig from an optional JSON config file plus overrides.
// Unknown keys are rejected with their key path (and line where locatable).
RunConfig load_run_config(const std::optional<std::string>& config_file,
                          const ConfigOverrides& overrides);

// Resolved-config echo; load_run_config(emit) reproduces an equivalent
// configuration.
std::string emit_config(const RunConfig& config);

PeriodicMethod parse_method(const std::string& name);
const char* method_name(PeriodicMethod method);

bool is_known_preset(const std::string& name);
RunConfig preset_defaults(const std::string& preset);

}  // namespace tms
