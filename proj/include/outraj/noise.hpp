#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "outraj/algebra.hpp"

namespace outraj {

// Uniform grid t_k = k*dt, k = 0..steps.
struct TimeGrid {
    double dt = 0.0;
    int steps = 0;

    double time(int k) const { return k * dt; }
    double horizon() const { return steps * dt; }
};

TimeGrid make_grid(double horizon, double dt);

// Reproducible per-trajectory random substream.
struct RandomStream {
    uint64_t id = 0;
    std::mt19937_64 engine;

    double gauss() { return normal_(engine); }

  private:
    std::normal_distribution<double> normal_{0.0, 1.0};
};

RandomStream derive_stream(uint64_t master_seed, uint64_t trajectory_index);

enum class OUMode { euler, exact_bridge };

// One realization of the driving noise: Wiener increments for every channel,
// plus the OU samples built from the same increments when an OU model is used.
struct NoisePath {
    TimeGrid grid;
    int channels = 0;
    RealMatrix dW;       // steps x channels
    RealVector X;        // steps+1 samples; size 0 when no OU process
    double gamma = 0.0;  // 0 when no OU process
    uint64_t stream_id = 0;

    bool has_ou() const { return X.size() > 0; }
};

NoisePath wiener_increments(const TimeGrid& grid, int channels, RandomStream& stream);

NoisePath ou_path(const TimeGrid& grid, double gamma, RandomStream& stream,
                  OUMode mode = OUMode::euler,
                  std::optional<double> x0 = std::nullopt);

// Stationary correlation E[X(t)X(s)] = e^{-gamma|t-s|}/(2 gamma).
double ou_autocorrelation(double gamma, double s, double t);

// Aggregate increments (and subsample X) onto a grid coarser by `factor`.
// Used by convergence studies that compare discretizations of one noise
// realization.
NoisePath coarsen(const NoisePath& path, int factor);

}  // namespace outraj
