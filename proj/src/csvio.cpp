#include "tms/csvio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tms {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string csv_quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

const char* status_name(RunStatus s) {
    return s == RunStatus::completed ? "completed" : "domain_exhausted";
}

}  // namespace

std::string micro_solution_csv(const MicroSolution& sol) {
    std::string out;
    out += "# u_frozen=" + format_double(sol.u_frozen) + "\n";
    out += "# residual=" + format_double(sol.periodicity_residual) + "\n";
    out += "# cycles_used=" + std::to_string(sol.cycles_used) + "\n";
    out += "t";
    for (int i = 1; i <= sol.dim; ++i) out += ",v_" + std::to_string(i);
    out += "\n";
    const double k = sol.grid.dt();
    for (int m = 0; m <= sol.grid.steps; ++m) {
        out += format_double(m * k);
        for (double v : sol.at(m)) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

std::string macro_trajectory_csv(const MacroTrajectory& traj) {
    std::string out;
    out += "# status=" + std::string(status_name(traj.status)) + "\n";
    if (traj.status == RunStatus::domain_exhausted)
        out += "# failed_step=" + std::to_string(traj.failed_step) + "\n";
    out += "T,U,reaction_avg,cycles_used\n";
    for (std::size_t n = 0; n < traj.times.size(); ++n) {
        out += format_double(traj.times[n]) + "," + format_double(traj.values[n]);
        if (n < traj.reactions.size())
            out += "," + format_double(traj.reactions[n]) + "," +
                   std::to_string(traj.micro_cycles[n]);
        else
            out += ",,";  // no step was taken from the final node
        out += "\n";
    }
    out += "# total_cn_steps=" + std::to_string(traj.total_cn_steps) + "\n";
    return out;
}

std::string resolved_trajectory_csv(const ResolvedTrajectory& traj) {
    std::string out;
    out += "# k=" + format_double(traj.step) + "\n";
    out += "# stride=" + std::to_string(traj.stride) + "\n";
    out += "# status=" + std::string(status_name(traj.status)) + "\n";
    out += "t,u";
    for (int i = 1; i <= traj.dim; ++i) out += ",v_" + std::to_string(i);
    out += "\n";
    for (std::size_t row = 0; row < traj.times.size(); ++row) {
        out += format_double(traj.times[row]) + "," + format_double(traj.slow[row]);
        for (double v : traj.fast_at(row)) out += "," + format_double(v);
        out += "\n";
    }
    out += "# final_u=" + format_double(traj.final_u) + "\n";
    out += "# total_steps=" + std::to_string(traj.total_steps) + "\n";
    return out;
}

std::string sweep_csv(const SweepResult& result) {
    std::string out;
    out += "# u_reference=" + format_double(result.u_reference) + "\n";
    out += "# reference_order=" + format_double(result.reference_order) + "\n";
    out += "# reference_k=" + format_double(result.reference_k) + "\n";
    out += "epsilon,k,K,tol_P,U_T,error,E_ms,cycles_total\n";
    for (const auto& row : result.rows) {
        out += format_double(row.epsilon) + "," + format_double(row.k) + "," +
               format_double(row.K) + "," + format_double(row.tol_p) + "," +
               format_double(row.u_final) + "," + format_double(row.error) + "," +
               std::to_string(row.e_ms) + "," + std::to_string(row.cycles_total) + "\n";
    }
    return out;
}

std::string tolp_csv(const std::vector<TolpRow>& rows) {
    std::string out = "tol_P,U_T,diff_vs_ref,total_cn_steps,total_cycles\n";
    for (const auto& row : rows) {
        out += format_double(row.tol_p) + "," + format_double(row.u_final) + "," +
               format_double(row.diff_vs_ref) + "," + std::to_string(row.total_cn_steps) + "," +
               std::to_string(row.total_cycles) + "\n";
    }
    return out;
}

std::string fit_report(const FitResult& fit) {
    std::ostringstream os;
    os << "fit U(k,K) = U* + C_k k^q_k + C_K K^q_K\n";
    auto line = [&](const char* name, double value, double conf) {
        os << "  " << name << " = " << format_double(value) << "  (rel. confidence "
           << format_double(conf) << ")\n";
    };
    line("U*", fit.u_star, fit.rel_confidence[0]);
    line("C_k", fit.c_k, fit.rel_confidence[1]);
    line("q_k", fit.q_k, fit.rel_confidence[2]);
    line("C_K", fit.c_K, fit.rel_confidence[3]);
    line("q_K", fit.q_K, fit.rel_confidence[4]);
    os << "  residual_norm = " << format_double(fit.residual_norm) << "\n";
    os << "  iterations = " << fit.iterations << "\n";
    return os.str();
}

std::string summary_kv(const std::map<std::string, std::string>& entries) {
    std::string out;
    for (const auto& [key, value] : entries) out += key + "=" + value + "\n";
    return out;
}

std::vector<FitSample> read_sweep_samples(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open sweep file: " + file.string());

    std::vector<FitSample> samples;
    std::string line;
    int k_col = -1, K_col = -1, value_col = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        fields.push_back(cur);

        if (k_col < 0) {  // header row
            for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
                if (fields[i] == "k") k_col = i;
                if (fields[i] == "K") K_col = i;
                if (fields[i] == "U_T" || fields[i] == "U") value_col = i;
            }
            if (k_col < 0 || K_col < 0 || value_col < 0)
                throw ConfigError("sweep file " + file.string() +
                                  ": header must contain columns k, K and U_T");
            continue;
        }
        const int needed = std::max({k_col, K_col, value_col});
        if (static_cast<int>(fields.size()) <= needed)
            throw ConfigError("sweep file " + file.string() + ": short row '" + line + "'");
        try {
            samples.push_back({std::stod(fields[k_col]), std::stod(fields[K_col]),
                               std::stod(fields[value_col])});
        } catch (const std::exception&) {
            throw ConfigError("sweep file " + file.string() + ": unparsable row '" + line + "'");
        }
    }
    return samples;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace tms
