#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace homog {

enum class Command {
    check_invariants,
    study_cell,
    study_convergence,
    study_dirichlet,
    suppressive_profile,
    max_moment,
};

std::string command_name(Command c);
/// Throws ConfigError.
Command parse_command(const std::string& name);

//---------------------------------------------------------------------------//
/*!
 * Fully validated experiment configuration.
 *
 * Keys (flat key=value; see config_keys() for ranges and defaults):
 *   command law dim n N res seed threads out timings
 *   U f r abar omega beta_prime gamma_prime counts p samples mc
 */
struct ExperimentConfig {
    Command command = Command::study_cell;
    std::string law = "two_point:1,4,0.5";
    int dim = 2;
    std::vector<int> n_range{0, 1, 2};
    int N = 100;
    int res = 4;
    std::uint64_t seed = 1;
    /// 0: HOMOG_THREADS, else 1. Never changes any output.
    int threads = 0;
    /// Output prefix; writes <out>.csv and <out>.json.
    std::string out = "homog_out";
    bool timings = false;

    double U = 0.45;  ///< U = (-U, U)^dim
    std::string f;    ///< default affine e_1
    std::vector<double> r_grid{0.05, 0.1, 0.2, 0.4};
    std::optional<double> abar;  ///< scalar abar for the Dirichlet experiment
    bool omega = false;

    double beta_prime = 0.5;
    double gamma_prime = 0.5;
    std::vector<long> counts{1, 9, 81};
    std::vector<double> p{1.0, 3.0};
    long samples = 100000;
    bool mc = false;

    /// key=value lines in key order, every key present.
    std::string canonical() const;
    /// As canonical(), without the keys that cannot affect results (threads, out).
    nlohmann::json to_json() const;
};

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string help;
};

/// Every accepted key with its default and documented range.
const std::vector<ConfigKey>& config_keys();

/// Parse "key = value" lines; '#' starts a comment. Throws IoError / ConfigError.
std::map<std::string, std::string> read_config_file(const std::string& path);

/*!
 * Merge file values and flags (flags win; a differing override appends a
 * warning), reject unknown keys, fill defaults, validate every field.
 * Throws ConfigError naming the offending key.
 */
ExperimentConfig parse_config(const std::map<std::string, std::string>& file,
                              const std::map<std::string, std::string>& flags,
                              std::vector<std::string>* warnings = nullptr);

//---------------------------------------------------------------------------//
struct RunOutput {
    std::string csv;
    nlohmann::json json;  ///< {config, results, timings}
    std::vector<std::string> summary;
    /// False when a checked invariant failed.
    bool passed = true;
};

/// Run the configured command without touching the filesystem.
RunOutput execute(const ExperimentConfig& cfg);

/// execute(), write <out>.csv and <out>.json, print the summary. Returns the
/// exit status: 0, or the internal category code when an invariant failed.
int run(const ExperimentConfig& cfg, std::ostream& summary);

}  // namespace homog
