#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "outraj/integrators.hpp"

namespace outraj {

struct EnsembleError : std::runtime_error {
    long trajectory_index;
    int step;
    EnsembleError(long i, int k)
        : std::runtime_error("trajectory " + std::to_string(i) +
                             " became non-finite at step " + std::to_string(k)),
          trajectory_index(i),
          step(k) {}
};

enum class Equation { lsse, nlsse };

// What to drive and what to record. Recording happens every `stride` steps;
// x-weighted states and per-path mean-equation residuals need stride 1.
struct RunSpec {
    Vector psi0;
    Equation equation = Equation::lsse;
    Scheme scheme = Scheme::euler;
    bool renormalize = false;
    OUMode ou_mode = OUMode::exact_bridge;
    int stride = 1;
    bool record_xsigma = false;
    bool record_residual = false;           // per-path residual moments; implies stride 1
    std::optional<OUModel> residual_model;  // coefficients entering the residual
    std::vector<std::pair<std::string, Matrix>> observables;
    int workers = 1;
};

struct Track {
    std::string name;
    RealVector mean;
    RealVector se;
};

struct EnsembleStats {
    TimeGrid grid;
    int stride = 1;
    long N = 0;
    std::uint64_t master_seed = 0;
    Equation equation = Equation::lsse;
    long dead_count = 0;

    std::vector<double> times;             // recorded times
    std::vector<Matrix> eta;               // E[sigma(t)]
    std::vector<RealMatrix> se_eta_entry;  // entrywise SE of eta
    RealVector se_eta;                     // max entrywise SE per time
    RealVector mean_weight;
    RealVector se_weight;

    std::vector<Matrix> xsigma;            // E[X(t) sigma(t)], empty unless recorded
    std::vector<RealMatrix> se_xsigma_entry;

    // Mean-equation residual moments at interior grid points (1..steps-1),
    // empty unless recorded.
    std::vector<Matrix> residual;
    std::vector<RealMatrix> se_residual_entry;

    std::vector<Track> tracks;
};

EnsembleStats run_ensemble(const CoefficientProcess& model, const TimeGrid& grid, long n,
                           std::uint64_t master_seed, const RunSpec& spec);

struct MartingaleReport {
    bool se_defined = false;
    RealVector z;       // (mean_weight - 1) / se, with 0/0 -> 0
    double max_abs = 0.0;
};

MartingaleReport martingale_report(const EnsembleStats& stats);

struct ResidualReport {
    std::vector<double> times;   // interior grid points
    std::vector<Matrix> mean;    // residual of the mean series
    RealVector norm;             // Frobenius norm of mean residual
    RealVector se;               // Frobenius-combined entrywise SE (per-path variance)
    double max_norm = 0.0;
};

// r(t) = eta_dot + i[H0, eta] + 1/2 [L, [L, eta]] - i gamma [L, E[X sigma]],
// eta_dot by central differences. Requires stride 1 and recorded xsigma;
// the SE column additionally requires recorded residual moments.
ResidualReport mean_eq_residual(const EnsembleStats& stats, const OUModel& model);

// Re Tr{a eta(t)} on the recorded grid.
RealVector physical_expectation(const EnsembleStats& stats, const Matrix& a);

const Track& find_track(const EnsembleStats& stats, const std::string& name);

}  // namespace outraj
