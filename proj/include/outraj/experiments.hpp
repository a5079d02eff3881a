#pragma once

#include "outraj/config.hpp"

namespace outraj {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    std::vector<Check> checks;
    std::vector<std::string> files;
    double wall_seconds = 0.0;

    bool pass() const;
};

const Check* find_check(const ExperimentReport& rep, const std::string& name);

// Dispatches on cfg.experiment, writes result tables under
// cfg.output.directory, and evaluates the experiment's embedded checks.
// Throws ConfigError or std::invalid_argument for semantic config problems,
// EnsembleError or BlowupError for numerical failures.
ExperimentReport run_experiment(const RunConfig& cfg);

// Appends a JSON-lines record (config echo, version, wall clock, checks,
// files with checksums) to <directory>/manifest.jsonl; returns the line.
std::string write_manifest(const RunConfig& cfg, const ExperimentReport& rep);

}  // namespace outraj
