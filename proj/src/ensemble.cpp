#include "outraj/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace outraj {

namespace {

constexpr long kBlockSize = 128;
constexpr Complex kI{0.0, 1.0};

// Partial sums for one block of trajectory indices. Each block is owned by
// exactly one worker, and blocks are reduced in index order afterwards, so
// the result is bitwise independent of the worker count.
struct BlockPartial {
    bool used = false;
    long dead = 0;
    std::vector<Matrix> sum_sigma;
    std::vector<RealMatrix> sumsq_sigma;
    RealVector sum_w;
    RealVector sumsq_w;
    std::vector<Matrix> sum_xs;
    std::vector<RealMatrix> sumsq_xs;
    std::vector<Matrix> sum_res;
    std::vector<RealMatrix> sumsq_res;
    RealMatrix track_sum;    // points x tracks
    RealMatrix track_sumsq;
};

void zero_matrices(std::vector<Matrix>& v, std::size_t count, Eigen::Index n) {
    v.assign(count, Matrix::Zero(n, n));
}

void zero_real(std::vector<RealMatrix>& v, std::size_t count, Eigen::Index n) {
    v.assign(count, RealMatrix::Zero(n, n));
}

void entry_se(const Matrix& sum, const RealMatrix& sumsq, long n, RealMatrix& se) {
    // complex entry variance: E|z|^2 - |E z|^2, covering both components
    se.resize(sum.rows(), sum.cols());
    if (n < 2) {
        se.setZero();
        return;
    }
    const RealMatrix mean_sq = (sum / static_cast<double>(n)).cwiseAbs2();
    const RealMatrix var =
        ((sumsq - static_cast<double>(n) * mean_sq) / static_cast<double>(n - 1)).cwiseMax(0.0);
    se = (var / static_cast<double>(n)).cwiseSqrt();
}

double scalar_se(double sum, double sumsq, long n) {
    if (n < 2) return 0.0;
    const double mean = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, (sumsq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
}

}  // namespace

EnsembleStats run_ensemble(const CoefficientProcess& model, const TimeGrid& grid, long n,
                           std::uint64_t master_seed, const RunSpec& spec) {
    if (n < 1) throw std::invalid_argument("ensemble size must be at least 1");
    if (spec.psi0.size() != model.dim())
        throw std::invalid_argument("initial state dimension does not match the model");
    if (spec.stride < 1 || grid.steps % spec.stride != 0)
        throw std::invalid_argument("record stride must divide the step count");
    if (spec.record_xsigma && !model.is_random())
        throw std::invalid_argument("x-weighted recording needs a model with an OU path");
    if (spec.record_residual) {
        if (spec.stride != 1)
            throw std::invalid_argument("residual recording needs stride 1");
        if (!spec.residual_model)
            throw std::invalid_argument("residual recording needs the model coefficients");
        if (spec.equation != Equation::lsse)
            throw std::invalid_argument("residual recording applies to the linear equation");
        if (!model.is_random())
            throw std::invalid_argument("residual recording needs a model with an OU path");
    }
    if (spec.equation == Equation::nlsse && std::abs(spec.psi0.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("nonlinear runs need a unit initial state");

    const Eigen::Index dim = model.dim();
    const int points = grid.steps / spec.stride + 1;
    const int interior = grid.steps >= 2 ? grid.steps - 1 : 0;
    const std::size_t ntracks = spec.observables.size();
    const long nblocks = (n + kBlockSize - 1) / kBlockSize;

    std::vector<BlockPartial> partials(static_cast<std::size_t>(nblocks));

    std::atomic<long> next_block{0};
    std::atomic<bool> failed{false};
    std::mutex fail_mutex;
    std::exception_ptr fail_ex;
    long fail_traj = -1;
    int fail_step = -1;

    auto process_block = [&](long b) {
        BlockPartial& p = partials[static_cast<std::size_t>(b)];
        p.used = true;
        zero_matrices(p.sum_sigma, static_cast<std::size_t>(points), dim);
        zero_real(p.sumsq_sigma, static_cast<std::size_t>(points), dim);
        p.sum_w = RealVector::Zero(points);
        p.sumsq_w = RealVector::Zero(points);
        if (spec.record_xsigma) {
            zero_matrices(p.sum_xs, static_cast<std::size_t>(points), dim);
            zero_real(p.sumsq_xs, static_cast<std::size_t>(points), dim);
        }
        if (spec.record_residual) {
            zero_matrices(p.sum_res, static_cast<std::size_t>(interior), dim);
            zero_real(p.sumsq_res, static_cast<std::size_t>(interior), dim);
        }
        p.track_sum = RealMatrix::Zero(points, static_cast<Eigen::Index>(ntracks));
        p.track_sumsq = RealMatrix::Zero(points, static_cast<Eigen::Index>(ntracks));

        std::vector<Matrix> sigmas(static_cast<std::size_t>(grid.steps) + 1);
        const long lo = b * kBlockSize;
        const long hi = std::min(n, lo + kBlockSize);
        for (long i = lo; i < hi; ++i) {
            if (failed.load(std::memory_order_relaxed)) return;
            RandomStream stream = derive_stream(master_seed, static_cast<std::uint64_t>(i));
            NoisePath path = model.sample_path(grid, spec.ou_mode, stream);
            Trajectory traj;
            try {
                if (spec.equation == Equation::lsse) {
                    IntegrateOptions io;
                    io.scheme = spec.scheme;
                    io.renormalize = spec.renormalize;
                    traj = integrate_lsse(model, spec.psi0, path, io);
                } else {
                    traj = integrate_nlsse(model, spec.psi0, path, true);
                }
            } catch (const BlowupError& e) {
                std::lock_guard<std::mutex> g(fail_mutex);
                if (!failed.exchange(true)) {
                    fail_traj = i;
                    fail_step = e.step;
                }
                return;
            }
            if (traj.dead_at >= 0) ++p.dead;
            for (int k = 0; k <= grid.steps; ++k)
                sigmas[static_cast<std::size_t>(k)] =
                    traj.states[static_cast<std::size_t>(k)] *
                    traj.states[static_cast<std::size_t>(k)].adjoint();
            for (int r = 0; r < points; ++r) {
                const int k = r * spec.stride;
                const Matrix& sig = sigmas[static_cast<std::size_t>(k)];
                p.sum_sigma[static_cast<std::size_t>(r)] += sig;
                p.sumsq_sigma[static_cast<std::size_t>(r)] += sig.cwiseAbs2();
                const double w = traj.weights(k);
                p.sum_w(r) += w;
                p.sumsq_w(r) += w * w;
                if (spec.record_xsigma) {
                    const Matrix xs = path.X(k) * sig;
                    p.sum_xs[static_cast<std::size_t>(r)] += xs;
                    p.sumsq_xs[static_cast<std::size_t>(r)] += xs.cwiseAbs2();
                }
                for (std::size_t j = 0; j < ntracks; ++j) {
                    const Vector& psi = traj.states[static_cast<std::size_t>(k)];
                    const double val = psi.dot(spec.observables[j].second * psi).real();
                    p.track_sum(r, static_cast<Eigen::Index>(j)) += val;
                    p.track_sumsq(r, static_cast<Eigen::Index>(j)) += val * val;
                }
            }
            if (spec.record_residual) {
                const Matrix& h0 = spec.residual_model->h0;
                const Matrix& l = spec.residual_model->l;
                const double gamma = spec.residual_model->gamma;
                const double inv2dt = 1.0 / (2.0 * grid.dt);
                for (int k = 1; k < grid.steps; ++k) {
                    const Matrix& sig = sigmas[static_cast<std::size_t>(k)];
                    const Matrix lsig = commutator(l, sig);
                    Matrix res = (sigmas[static_cast<std::size_t>(k) + 1] -
                                  sigmas[static_cast<std::size_t>(k) - 1]) *
                                 inv2dt;
                    res += kI * commutator(h0, sig);
                    res += 0.5 * commutator(l, lsig);
                    res -= (kI * gamma * path.X(k)) * lsig;
                    p.sum_res[static_cast<std::size_t>(k - 1)] += res;
                    p.sumsq_res[static_cast<std::size_t>(k - 1)] += res.cwiseAbs2();
                }
            }
        }
    };

    auto worker = [&]() {
        long b;
        while ((b = next_block.fetch_add(1)) < nblocks) {
            if (failed.load(std::memory_order_relaxed)) return;
            try {
                process_block(b);
            } catch (...) {
                std::lock_guard<std::mutex> g(fail_mutex);
                if (!failed.exchange(true)) fail_ex = std::current_exception();
                return;
            }
        }
    };

    const int workers = std::max(1, spec.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) {
        if (fail_ex) std::rethrow_exception(fail_ex);
        throw EnsembleError(fail_traj, fail_step);
    }

    EnsembleStats s;
    s.grid = grid;
    s.stride = spec.stride;
    s.N = n;
    s.master_seed = master_seed;
    s.equation = spec.equation;

    std::vector<Matrix> sum_sigma;
    std::vector<RealMatrix> sumsq_sigma;
    zero_matrices(sum_sigma, static_cast<std::size_t>(points), dim);
    zero_real(sumsq_sigma, static_cast<std::size_t>(points), dim);
    RealVector sum_w = RealVector::Zero(points);
    RealVector sumsq_w = RealVector::Zero(points);
    std::vector<Matrix> sum_xs;
    std::vector<RealMatrix> sumsq_xs;
    std::vector<Matrix> sum_res;
    std::vector<RealMatrix> sumsq_res;
    if (spec.record_xsigma) {
        zero_matrices(sum_xs, static_cast<std::size_t>(points), dim);
        zero_real(sumsq_xs, static_cast<std::size_t>(points), dim);
    }
    if (spec.record_residual) {
        zero_matrices(sum_res, static_cast<std::size_t>(interior), dim);
        zero_real(sumsq_res, static_cast<std::size_t>(interior), dim);
    }
    RealMatrix track_sum = RealMatrix::Zero(points, static_cast<Eigen::Index>(ntracks));
    RealMatrix track_sumsq = RealMatrix::Zero(points, static_cast<Eigen::Index>(ntracks));

    for (const BlockPartial& p : partials) {
        if (!p.used) continue;
        s.dead_count += p.dead;
        for (int r = 0; r < points; ++r) {
            sum_sigma[static_cast<std::size_t>(r)] += p.sum_sigma[static_cast<std::size_t>(r)];
            sumsq_sigma[static_cast<std::size_t>(r)] += p.sumsq_sigma[static_cast<std::size_t>(r)];
        }
        sum_w += p.sum_w;
        sumsq_w += p.sumsq_w;
        if (spec.record_xsigma)
            for (int r = 0; r < points; ++r) {
                sum_xs[static_cast<std::size_t>(r)] += p.sum_xs[static_cast<std::size_t>(r)];
                sumsq_xs[static_cast<std::size_t>(r)] += p.sumsq_xs[static_cast<std::size_t>(r)];
            }
        if (spec.record_residual)
            for (int k = 0; k < interior; ++k) {
                sum_res[static_cast<std::size_t>(k)] += p.sum_res[static_cast<std::size_t>(k)];
                sumsq_res[static_cast<std::size_t>(k)] += p.sumsq_res[static_cast<std::size_t>(k)];
            }
        track_sum += p.track_sum;
        track_sumsq += p.track_sumsq;
    }

    const double dn = static_cast<double>(n);
    s.times.resize(static_cast<std::size_t>(points));
    s.eta.resize(static_cast<std::size_t>(points));
    s.se_eta_entry.resize(static_cast<std::size_t>(points));
    s.se_eta = RealVector::Zero(points);
    s.mean_weight = RealVector::Zero(points);
    s.se_weight = RealVector::Zero(points);
    for (int r = 0; r < points; ++r) {
        const auto u = static_cast<std::size_t>(r);
        s.times[u] = grid.time(r * spec.stride);
        s.eta[u] = sum_sigma[u] / dn;
        entry_se(sum_sigma[u], sumsq_sigma[u], n, s.se_eta_entry[u]);
        s.se_eta(r) = s.se_eta_entry[u].size() > 0 ? s.se_eta_entry[u].maxCoeff() : 0.0;
        s.mean_weight(r) = sum_w(r) / dn;
        s.se_weight(r) = scalar_se(sum_w(r), sumsq_w(r), n);
    }
    if (spec.record_xsigma) {
        s.xsigma.resize(static_cast<std::size_t>(points));
        s.se_xsigma_entry.resize(static_cast<std::size_t>(points));
        for (int r = 0; r < points; ++r) {
            const auto u = static_cast<std::size_t>(r);
            s.xsigma[u] = sum_xs[u] / dn;
            entry_se(sum_xs[u], sumsq_xs[u], n, s.se_xsigma_entry[u]);
        }
    }
    if (spec.record_residual) {
        s.residual.resize(static_cast<std::size_t>(interior));
        s.se_residual_entry.resize(static_cast<std::size_t>(interior));
        for (int k = 0; k < interior; ++k) {
            const auto u = static_cast<std::size_t>(k);
            s.residual[u] = sum_res[u] / dn;
            entry_se(sum_res[u], sumsq_res[u], n, s.se_residual_entry[u]);
        }
    }
    s.tracks.resize(ntracks);
    for (std::size_t j = 0; j < ntracks; ++j) {
        Track& tr = s.tracks[j];
        tr.name = spec.observables[j].first;
        tr.mean = RealVector::Zero(points);
        tr.se = RealVector::Zero(points);
        for (int r = 0; r < points; ++r) {
            const auto c = static_cast<Eigen::Index>(j);
            tr.mean(r) = track_sum(r, c) / dn;
            tr.se(r) = scalar_se(track_sum(r, c), track_sumsq(r, c), n);
        }
    }
    return s;
}

MartingaleReport martingale_report(const EnsembleStats& stats) {
    MartingaleReport rep;
    rep.se_defined = stats.N >= 2;
    const Eigen::Index points = stats.mean_weight.size();
    rep.z = RealVector::Zero(points);
    if (!rep.se_defined) return rep;
    for (Eigen::Index r = 0; r < points; ++r) {
        const double dev = stats.mean_weight(r) - 1.0;
        const double se = stats.se_weight(r);
        if (se > 0.0)
            rep.z(r) = dev / se;
        else
            rep.z(r) = dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        rep.max_abs = std::max(rep.max_abs, std::abs(rep.z(r)));
    }
    return rep;
}

ResidualReport mean_eq_residual(const EnsembleStats& stats, const OUModel& model) {
    if (stats.stride != 1)
        throw std::invalid_argument("residual needs stats recorded at every step");
    if (stats.xsigma.empty())
        throw std::invalid_argument("residual needs the x-weighted state series");
    if (stats.grid.steps < 2) throw std::invalid_argument("residual needs at least two steps");

    const int interior = stats.grid.steps - 1;
    const double inv2dt = 1.0 / (2.0 * stats.grid.dt);
    ResidualReport rep;
    rep.times.resize(static_cast<std::size_t>(interior));
    rep.mean.resize(static_cast<std::size_t>(interior));
    rep.norm = RealVector::Zero(interior);
    rep.se = RealVector::Constant(interior, std::numeric_limits<double>::quiet_NaN());
    const bool have_se = !stats.se_residual_entry.empty();
    for (int k = 1; k < stats.grid.steps; ++k) {
        const auto u = static_cast<std::size_t>(k - 1);
        const Matrix& eta = stats.eta[static_cast<std::size_t>(k)];
        Matrix r = (stats.eta[static_cast<std::size_t>(k) + 1] -
                    stats.eta[static_cast<std::size_t>(k) - 1]) *
                   inv2dt;
        r += kI * commutator(model.h0, eta);
        r += 0.5 * commutator(model.l, commutator(model.l, eta));
        r -= kI * model.gamma * commutator(model.l, stats.xsigma[static_cast<std::size_t>(k)]);
        rep.times[u] = stats.grid.time(k);
        rep.mean[u] = r;
        rep.norm(k - 1) = r.norm();
        if (have_se) rep.se(k - 1) = stats.se_residual_entry[u].norm();
        rep.max_norm = std::max(rep.max_norm, rep.norm(k - 1));
    }
    return rep;
}

RealVector physical_expectation(const EnsembleStats& stats, const Matrix& a) {
    RealVector out(static_cast<Eigen::Index>(stats.eta.size()));
    for (std::size_t r = 0; r < stats.eta.size(); ++r)
        out(static_cast<Eigen::Index>(r)) = (a * stats.eta[r]).trace().real();
    return out;
}

const Track& find_track(const EnsembleStats& stats, const std::string& name) {
    for (const Track& t : stats.tracks)
        if (t.name == name) return t;
    throw std::invalid_argument("no recorded observable named " + name);
}

}  // namespace outraj
