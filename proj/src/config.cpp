#include "tms/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tms {

using nlohmann::json;

MacroGrid RunConfig::macro_grid() const {
    if (n_macro_steps) return MacroGrid::from_step_count(scale.t_end, *n_macro_steps);
    return MacroGrid::from_step(scale.t_end, macro_step);
}

void RunConfig::validate() const {
    scale.validate();
    periodic.validate();
    micro_grid().validate();
    if (guess_harmonics < 0) throw ConfigError("guess_harmonics must be >= 0");
    if (stride < 0) throw ConfigError("stride must be >= 0");
    if (workers < 0) throw ConfigError("workers must be >= 0");
    build();  // construction runs the structural invariant checks
}

PeriodicMethod parse_method(const std::string& name) {
    if (name == "fixed-point" || name == "fixed_point") return PeriodicMethod::fixed_point;
    if (name == "averaged") return PeriodicMethod::averaged;
    throw ConfigError("unknown periodic method '" + name +
                      "' (expected fixed-point or averaged)");
}

const char* method_name(PeriodicMethod method) {
    return method == PeriodicMethod::fixed_point ? "fixed-point" : "averaged";
}

bool is_known_preset(const std::string& name) {
    return name == "scalar-default" || name == "modal-default";
}

RunConfig preset_defaults(const std::string& preset) {
    if (!is_known_preset(preset))
        throw ConfigError("unknown preset '" + preset +
                          "' (available: scalar-default, modal-default)");
    RunConfig cfg;
    cfg.preset = preset;
    cfg.system = preset == "scalar-default" ? scalar_default_spec() : modal_default_spec();
    cfg.scale = default_scale();
    return cfg;
}

namespace {

int line_of_key(const std::string& raw, const std::string& key) {
    const auto pos = raw.find("\"" + key + "\"");
    if (pos == std::string::npos) return -1;
    return 1 + static_cast<int>(std::count(raw.begin(), raw.begin() + pos, '\n'));
}

[[noreturn]] void unknown_key(const std::string& path, const std::string& key,
                              const std::string& raw) {
    const int line = line_of_key(raw, key);
    std::string msg = "unknown config key '" + (path.empty() ? key : path + "." + key) + "'";
    if (line > 0) msg += " (line " + std::to_string(line) + ")";
    throw ConfigError(msg);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed,
                const std::string& raw) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) unknown_key(path, key, raw);
}

double require_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("config key '" + path + "' must be a number");
    return v.get<double>();
}

ForcingTerm::Kind parse_kind(const std::string& s, const std::string& path) {
    if (s == "const") return ForcingTerm::Kind::constant;
    if (s == "sin") return ForcingTerm::Kind::sin;
    if (s == "cos") return ForcingTerm::Kind::cos;
    if (s == "sinsq") return ForcingTerm::Kind::sinsq;
    throw ConfigError("config key '" + path + "': unknown forcing kind '" + s +
                      "' (expected const, sin, cos or sinsq)");
}

const char* kind_name(ForcingTerm::Kind kind) {
    switch (kind) {
        case ForcingTerm::Kind::constant: return "const";
        case ForcingTerm::Kind::sin: return "sin";
        case ForcingTerm::Kind::cos: return "cos";
        case ForcingTerm::Kind::sinsq: return "sinsq";
    }
    return "const";
}

SystemSpec parse_system(const json& sys, const std::string& raw) {
    check_keys(sys, "system", {"sigma0", "modes"}, raw);
    SystemSpec spec;
    if (sys.contains("sigma0")) spec.sigma0 = require_number(sys["sigma0"], "system.sigma0");
    if (!sys.contains("modes") || !sys["modes"].is_array() || sys["modes"].empty())
        throw ConfigError("config key 'system.modes' must be a non-empty array");
    int idx = 0;
    for (const auto& m : sys["modes"]) {
        const std::string path = "system.modes[" + std::to_string(idx++) + "]";
        check_keys(m, path, {"lambda_const", "lambda_slope", "wall_weight", "forcing"}, raw);
        ModeSpec mode;
        if (m.contains("lambda_const"))
            mode.lambda_const = require_number(m["lambda_const"], path + ".lambda_const");
        if (m.contains("lambda_slope"))
            mode.lambda_slope = require_number(m["lambda_slope"], path + ".lambda_slope");
        if (m.contains("wall_weight"))
            mode.wall_weight = require_number(m["wall_weight"], path + ".wall_weight");
        if (m.contains("forcing")) {
            int tidx = 0;
            for (const auto& t : m["forcing"]) {
                const std::string tpath = path + ".forcing[" + std::to_string(tidx++) + "]";
                check_keys(t, tpath, {"kind", "harmonic", "amplitude"}, raw);
                ForcingTerm term;
                if (t.contains("kind"))
                    term.kind = parse_kind(t["kind"].get<std::string>(), tpath + ".kind");
                if (t.contains("harmonic")) term.harmonic = t["harmonic"].get<int>();
                if (t.contains("amplitude"))
                    term.amplitude = require_number(t["amplitude"], tpath + ".amplitude");
                mode.forcing.push_back(term);
            }
        }
        spec.modes.push_back(mode);
    }
    return spec;
}

std::vector<double> parse_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("config key '" + path + "' must be an array");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(require_number(x, path));
    return out;
}

void apply_file(RunConfig& cfg, const json& root, const std::string& raw) {
    check_keys(root, "",
               {"preset", "scale", "system", "micro", "macro", "periodic", "resolved", "study",
                "output", "guess_harmonics", "solve_u"},
               raw);

    if (root.contains("scale")) {
        const auto& s = root["scale"];
        check_keys(s, "scale", {"epsilon", "t_end", "u_max", "u0"}, raw);
        if (s.contains("epsilon")) cfg.scale.epsilon = require_number(s["epsilon"], "scale.epsilon");
        if (s.contains("t_end")) cfg.scale.t_end = require_number(s["t_end"], "scale.t_end");
        if (s.contains("u_max")) cfg.scale.u_max = require_number(s["u_max"], "scale.u_max");
        if (s.contains("u0")) cfg.scale.u0 = require_number(s["u0"], "scale.u0");
    }
    if (root.contains("system")) cfg.system = parse_system(root["system"], raw);
    if (root.contains("micro")) {
        const auto& m = root["micro"];
        check_keys(m, "micro", {"steps"}, raw);
        if (m.contains("steps")) cfg.micro_steps = m["steps"].get<int>();
    }
    if (root.contains("macro")) {
        const auto& m = root["macro"];
        check_keys(m, "macro", {"step", "n_steps"}, raw);
        if (m.contains("step")) cfg.macro_step = require_number(m["step"], "macro.step");
        if (m.contains("n_steps")) cfg.n_macro_steps = m["n_steps"].get<int>();
    }
    if (root.contains("periodic")) {
        const auto& p = root["periodic"];
        check_keys(p, "periodic", {"tol_p", "max_cycles", "method"}, raw);
        if (p.contains("tol_p")) cfg.periodic.tol_p = require_number(p["tol_p"], "periodic.tol_p");
        if (p.contains("max_cycles")) cfg.periodic.max_cycles = p["max_cycles"].get<int>();
        if (p.contains("method")) cfg.periodic.method = parse_method(p["method"].get<std::string>());
    }
    if (root.contains("resolved")) {
        const auto& r = root["resolved"];
        check_keys(r, "resolved", {"k", "stride"}, raw);
        if (r.contains("k")) cfg.resolved_k = require_number(r["k"], "resolved.k");
        if (r.contains("stride")) cfg.stride = r["stride"].get<long long>();
    }
    if (root.contains("study")) {
        const auto& s = root["study"];
        check_keys(s, "study",
                   {"k_list", "K_list", "tolp_list", "eps_list", "reference_k", "workers"}, raw);
        if (s.contains("k_list")) cfg.k_list = parse_list(s["k_list"], "study.k_list");
        if (s.contains("K_list")) cfg.K_list = parse_list(s["K_list"], "study.K_list");
        if (s.contains("tolp_list")) cfg.tolp_list = parse_list(s["tolp_list"], "study.tolp_list");
        if (s.contains("eps_list")) cfg.eps_list = parse_list(s["eps_list"], "study.eps_list");
        if (s.contains("reference_k"))
            cfg.reference_k = require_number(s["reference_k"], "study.reference_k");
        if (s.contains("workers")) cfg.workers = s["workers"].get<int>();
    }
    if (root.contains("output")) {
        const auto& o = root["output"];
        check_keys(o, "output", {"dir"}, raw);
        if (o.contains("dir")) cfg.out_dir = o["dir"].get<std::string>();
    }
    if (root.contains("guess_harmonics")) cfg.guess_harmonics = root["guess_harmonics"].get<int>();
    if (root.contains("solve_u")) cfg.solve_u = require_number(root["solve_u"], "solve_u");
}

int micro_steps_from_override_k(double k) {
    const double inv = 1.0 / k;
    const auto m = static_cast<long long>(std::llround(inv));
    if (!(k > 0.0) || m < 2 || std::abs(inv - static_cast<double>(m)) > 1e-9 * inv)
        throw ConfigError("override --k = " + std::to_string(k) +
                          " must equal 1/M for an integer M >= 2");
    return static_cast<int>(m);
}

}  // namespace

RunConfig load_run_config(const std::optional<std::string>& config_file,
                          const ConfigOverrides& overrides) {
    // Preset selection: CLI flag beats the file's "preset" key.
    std::string raw;
    json root;
    if (config_file) {
        std::ifstream in(*config_file);
        if (!in) throw ConfigError("cannot open config file: " + *config_file);
        std::stringstream buffer;
        buffer << in.rdbuf();
        raw = buffer.str();
        try {
            root = json::parse(raw);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file " + *config_file + ": " + e.what());
        }
        if (!root.is_object()) throw ConfigError("config file must contain a JSON object");
    }

    std::string preset = "scalar-default";
    if (root.contains("preset")) preset = root["preset"].get<std::string>();
    if (overrides.preset) preset = *overrides.preset;

    RunConfig cfg = preset_defaults(preset);
    if (!root.is_null() && root.is_object()) apply_file(cfg, root, raw);

    if (overrides.epsilon) cfg.scale.epsilon = *overrides.epsilon;
    if (overrides.t_end) cfg.scale.t_end = *overrides.t_end;
    if (overrides.u_max) cfg.scale.u_max = *overrides.u_max;
    if (overrides.u0) cfg.scale.u0 = *overrides.u0;
    if (overrides.macro_step) {
        cfg.macro_step = *overrides.macro_step;
        cfg.n_macro_steps.reset();
    }
    if (overrides.n_macro_steps) cfg.n_macro_steps = *overrides.n_macro_steps;
    if (overrides.micro_steps) cfg.micro_steps = *overrides.micro_steps;
    if (overrides.micro_k) cfg.micro_steps = micro_steps_from_override_k(*overrides.micro_k);
    if (overrides.tol_p) cfg.periodic.tol_p = *overrides.tol_p;
    if (overrides.max_cycles) cfg.periodic.max_cycles = *overrides.max_cycles;
    if (overrides.method) cfg.periodic.method = parse_method(*overrides.method);
    if (overrides.resolved_k) cfg.resolved_k = *overrides.resolved_k;
    if (overrides.stride) cfg.stride = *overrides.stride;
    if (overrides.workers) cfg.workers = *overrides.workers;
    if (overrides.guess_harmonics) cfg.guess_harmonics = *overrides.guess_harmonics;
    if (overrides.solve_u) cfg.solve_u = *overrides.solve_u;
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (!overrides.k_list.empty()) cfg.k_list = overrides.k_list;
    if (!overrides.K_list.empty()) cfg.K_list = overrides.K_list;
    if (!overrides.tolp_list.empty()) cfg.tolp_list = overrides.tolp_list;
    if (!overrides.eps_list.empty()) cfg.eps_list = overrides.eps_list;
    if (overrides.reference_k) cfg.reference_k = *overrides.reference_k;

    if (cfg.out_dir.empty()) {
        if (const char* root_dir = std::getenv("TMSOLVE_OUT"))
            cfg.out_dir = root_dir;
        else
            cfg.out_dir = "tmsolve-out";
    }

    cfg.validate();
    return cfg;
}

std::string emit_config(const RunConfig& cfg) {
    json root;
    root["preset"] = cfg.preset;
    root["scale"] = {{"epsilon", cfg.scale.epsilon},
                     {"t_end", cfg.scale.t_end},
                     {"u_max", cfg.scale.u_max},
                     {"u0", cfg.scale.u0}};
    json modes = json::array();
    for (const auto& m : cfg.system.modes) {
        json forcing = json::array();
        for (const auto& t : m.forcing)
            forcing.push_back({{"kind", kind_name(t.kind)},
                               {"harmonic", t.harmonic},
                               {"amplitude", t.amplitude}});
        modes.push_back({{"lambda_const", m.lambda_const},
                         {"lambda_slope", m.lambda_slope},
                         {"wall_weight", m.wall_weight},
                         {"forcing", forcing}});
    }
    root["system"] = {{"sigma0", cfg.system.sigma0}, {"modes", modes}};
    root["micro"] = {{"steps", cfg.micro_steps}};
    if (cfg.n_macro_steps)
        root["macro"] = {{"n_steps", *cfg.n_macro_steps}};
    else
        root["macro"] = {{"step", cfg.macro_step}};
    root["periodic"] = {{"tol_p", cfg.periodic.tol_p},
                        {"max_cycles", cfg.periodic.max_cycles},
                        {"method", method_name(cfg.periodic.method)}};
    root["resolved"] = {{"k", cfg.resolved_k}, {"stride", cfg.stride}};
    json study;
    study["workers"] = cfg.workers;
    if (!cfg.k_list.empty()) study["k_list"] = cfg.k_list;
    if (!cfg.K_list.empty()) study["K_list"] = cfg.K_list;
    if (!cfg.tolp_list.empty()) study["tolp_list"] = cfg.tolp_list;
    if (!cfg.eps_list.empty()) study["eps_list"] = cfg.eps_list;
    if (cfg.reference_k > 0.0) study["reference_k"] = cfg.reference_k;
    root["study"] = study;
    root["output"] = {{"dir", cfg.out_dir}};
    root["guess_harmonics"] = cfg.guess_harmonics;
    if (!std::isnan(cfg.solve_u)) root["solve_u"] = cfg.solve_u;
    return root.dump(2) + "\n";
}

}  // namespace tms
