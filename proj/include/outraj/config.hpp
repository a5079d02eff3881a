#pragma once

#include <string>

#include "outraj/ensemble.hpp"

namespace outraj {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    bool present = false;
    std::string type;        // "ou" or "markovian"
    Matrix h0;               // ou
    Matrix l;                // ou
    double gamma = 1.0;      // ou
    Matrix h;                // markovian
    std::vector<Matrix> rs;  // markovian
};

struct NumericsConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    long trajectories = 10000;
    std::uint64_t master_seed = 0;
    Scheme scheme = Scheme::euler;
    bool renormalize = false;
    OUMode ou_mode = OUMode::exact_bridge;
    int stride = 1;
    int workers = 1;
};

struct OutputConfig {
    std::string directory;  // resolved by the harness when empty
};

struct RunConfig {
    std::string experiment;
    ModelConfig model;
    NumericsConfig numerics;
    OutputConfig output;
    Vector psi0;  // size 0 when not given
    Matrix rho0;  // size 0 when not given
    bool dump_trajectories = false;
};

// JSON with complex entries written as [re, im], matrices as nested arrays
// of such pairs, row-major. Unknown keys are schema violations; errors carry
// the offending field path.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Canonical JSON echo of a config, used in run manifests.
std::string config_echo(const RunConfig& cfg);

bool known_experiment(const std::string& name);

}  // namespace outraj
