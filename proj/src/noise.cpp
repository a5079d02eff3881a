#include "outraj/noise.hpp"

#include <cmath>

namespace outraj {

TimeGrid make_grid(double horizon, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("make_grid: dt must be > 0");
    if (!(horizon >= dt)) throw std::invalid_argument("make_grid: horizon must be >= dt");
    int steps = static_cast<int>(std::llround(horizon / dt));
    if (std::abs(steps * dt - horizon) > 1e-9 * std::max(1.0, horizon))
        throw std::invalid_argument("make_grid: horizon is not a multiple of dt");
    return TimeGrid{dt, steps};
}

namespace {

uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

RandomStream derive_stream(uint64_t master_seed, uint64_t trajectory_index) {
    // Hash (master_seed, index) into a short word sequence; constant time per
    // stream, independent of generation order across workers.
    uint64_t state = master_seed;
    uint64_t a = splitmix64(state);
    state = a ^ (trajectory_index * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
    uint64_t w0 = splitmix64(state);
    uint64_t w1 = splitmix64(state);
    uint64_t w2 = splitmix64(state);
    uint64_t w3 = splitmix64(state);

    std::seed_seq seq{static_cast<uint32_t>(w0), static_cast<uint32_t>(w0 >> 32),
                      static_cast<uint32_t>(w1), static_cast<uint32_t>(w1 >> 32),
                      static_cast<uint32_t>(w2), static_cast<uint32_t>(w2 >> 32),
                      static_cast<uint32_t>(w3), static_cast<uint32_t>(w3 >> 32)};
    RandomStream stream;
    stream.id = w0;
    stream.engine.seed(seq);
    return stream;
}

NoisePath wiener_increments(const TimeGrid& grid, int channels, RandomStream& stream) {
    if (grid.dt <= 0.0 || grid.steps <= 0)
        throw std::invalid_argument("wiener_increments: invalid grid");
    if (channels < 1) throw std::invalid_argument("wiener_increments: channels must be >= 1");

    NoisePath path;
    path.grid = grid;
    path.channels = channels;
    path.stream_id = stream.id;
    path.dW.resize(grid.steps, channels);
    const double s = std::sqrt(grid.dt);
    for (int k = 0; k < grid.steps; ++k)
        for (int j = 0; j < channels; ++j) path.dW(k, j) = s * stream.gauss();
    return path;
}

NoisePath ou_path(const TimeGrid& grid, double gamma, RandomStream& stream,
                  OUMode mode, std::optional<double> x0) {
    if (!(gamma > 0.0)) throw std::invalid_argument("ou_path: gamma must be > 0");
    if (grid.dt <= 0.0 || grid.steps <= 0)
        throw std::invalid_argument("ou_path: invalid grid");

    NoisePath path;
    path.grid = grid;
    path.channels = 1;
    path.gamma = gamma;
    path.stream_id = stream.id;
    path.dW.resize(grid.steps, 1);
    path.X.resize(grid.steps + 1);
    path.X(0) = x0 ? *x0 : stream.gauss() * std::sqrt(1.0 / (2.0 * gamma));

    const double h = grid.dt;
    if (mode == OUMode::euler) {
        const double s = std::sqrt(h);
        for (int k = 0; k < grid.steps; ++k) {
            path.dW(k, 0) = s * stream.gauss();
            path.X(k + 1) = path.X(k) - gamma * path.X(k) * h + path.dW(k, 0);
        }
    } else {
        // X(t+h) = e^{-gamma h} X(t) + I with I = int e^{-gamma(h-s)} dW(s).
        // Given dW = W(t+h)-W(t): Cov(dW,I) = (1-e^{-gamma h})/gamma,
        // Var(I) = (1-e^{-2 gamma h})/(2 gamma); sample I | dW exactly.
        const double decay = std::exp(-gamma * h);
        const double c = (1.0 - decay) / gamma;
        const double v = (1.0 - decay * decay) / (2.0 * gamma);
        const double cond_sd = std::sqrt(std::max(0.0, v - c * c / h));
        const double s = std::sqrt(h);
        for (int k = 0; k < grid.steps; ++k) {
            path.dW(k, 0) = s * stream.gauss();
            const double integral = (c / h) * path.dW(k, 0) + cond_sd * stream.gauss();
            path.X(k + 1) = decay * path.X(k) + integral;
        }
    }
    return path;
}

double ou_autocorrelation(double gamma, double s, double t) {
    if (!(gamma > 0.0)) throw std::invalid_argument("ou_autocorrelation: gamma must be > 0");
    return std::exp(-gamma * std::abs(t - s)) / (2.0 * gamma);
}

NoisePath coarsen(const NoisePath& path, int factor) {
    if (factor < 1 || path.grid.steps % factor != 0)
        throw std::invalid_argument("coarsen: factor must divide the step count");

    NoisePath out;
    out.grid = TimeGrid{path.grid.dt * factor, path.grid.steps / factor};
    out.channels = path.channels;
    out.gamma = path.gamma;
    out.stream_id = path.stream_id;
    out.dW.resize(out.grid.steps, path.channels);
    for (int k = 0; k < out.grid.steps; ++k)
        for (int j = 0; j < path.channels; ++j)
            out.dW(k, j) = path.dW.col(j).segment(k * factor, factor).sum();
    if (path.has_ou()) {
        out.X.resize(out.grid.steps + 1);
        for (int k = 0; k <= out.grid.steps; ++k) out.X(k) = path.X(k * factor);
    }
    return out;
}

}  // namespace outraj
