#include "outraj/integrators.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace outraj {

namespace {

void check_channels(std::size_t rs, Eigen::Index dw) {
    if (static_cast<Eigen::Index>(rs) != dw)
        throw std::invalid_argument("channel count mismatch between R list and dW");
}

// L(t)[sigma] = -i[H, sigma] + sum_j D[R_j] sigma.
void liouville_into(const Matrix& h, const std::vector<Matrix>& rs, const Matrix& sigma,
                    Matrix& out) {
    out = Complex(0.0, -1.0) * commutator(h, sigma);
    for (const Matrix& r : rs) out += dissipator(r, sigma);
}

}  // namespace

void build_step_factor(const Coefficients& c, double dt, const RealVector& dw,
                       Scheme scheme, Matrix& g) {
    check_channels(c.R.size(), dw.size());
    const Eigen::Index n = c.K.rows();
    g.resize(n, n);
    g.setIdentity();
    g += dt * c.K;
    for (Eigen::Index j = 0; j < dw.size(); ++j) g += dw(j) * c.R[static_cast<std::size_t>(j)];
    if (scheme == Scheme::milstein) {
        if (dw.size() != 1)
            throw std::invalid_argument("milstein scheme is implemented for one channel only");
        g += (0.5 * (dw(0) * dw(0) - dt)) * (c.R[0] * c.R[0]);
    }
}

Vector lsse_step(const Vector& psi, const Matrix& k_op, const std::vector<Matrix>& rs,
                 double dt, const RealVector& dw, Scheme scheme) {
    Coefficients c;
    c.K = k_op;
    c.R = rs;
    Matrix g;
    build_step_factor(c, dt, dw, scheme, g);
    return g * psi;
}

double weight_direct(const Vector& psi) { return psi.squaredNorm(); }

double weight_exponential(const RealMatrix& m_history, const RealMatrix& dw_history,
                          double dt, double p0) {
    if (m_history.rows() != dw_history.rows() || m_history.cols() != dw_history.cols())
        throw std::invalid_argument("m and dW histories must have matching shapes");
    const double log_w =
        (m_history.array() * dw_history.array()).sum() - 0.5 * dt * m_history.array().square().sum();
    return p0 * std::exp(log_w);
}

RealVector girsanov_shift(const RealVector& dw, const RealVector& m, double dt) {
    if (dw.size() != m.size()) throw std::invalid_argument("dW and m must have the same length");
    return dw - dt * m;
}

RealMatrix girsanov_shift(const RealMatrix& dw_history, const RealMatrix& m_history, double dt) {
    if (dw_history.rows() != m_history.rows() || dw_history.cols() != m_history.cols())
        throw std::invalid_argument("dW and m histories must have matching shapes");
    return dw_history - dt * m_history;
}

Vector nlsse_step(const Vector& psi_hat, const Matrix& k_op, const std::vector<Matrix>& rs,
                  double dt, const RealVector& dwhat, bool renorm) {
    check_channels(rs.size(), dwhat.size());
    const double nrm = psi_hat.norm();
    if (std::abs(nrm - 1.0) > 1e-6)
        throw std::invalid_argument("nlsse_step expects a normalized state");
    Vector out = psi_hat + dt * (k_op * psi_hat);
    for (std::size_t j = 0; j < rs.size(); ++j) {
        const Vector rpsi = rs[j] * psi_hat;
        const double re_n = psi_hat.dot(rpsi).real();
        out += dt * (re_n * rpsi - (0.5 * re_n * re_n) * psi_hat);
        out += dwhat(static_cast<Eigen::Index>(j)) * (rpsi - re_n * psi_hat);
    }
    if (renorm) {
        const double p = out.norm();
        if (p > 0.0) out /= p;
    }
    return out;
}

Matrix lsme_step(const Matrix& sigma, const Matrix& h, const std::vector<Matrix>& rs,
                 double dt, const RealVector& dw) {
    check_channels(rs.size(), dw.size());
    Matrix delta;
    liouville_into(h, rs, sigma, delta);
    delta *= dt;
    for (std::size_t j = 0; j < rs.size(); ++j) {
        const double w = dw(static_cast<Eigen::Index>(j));
        delta += w * (rs[j] * sigma + sigma * rs[j].adjoint());
    }
    // Hermitizing the increment keeps sigma exactly Hermitian at every step.
    return sigma + hermitize(delta);
}

Matrix nlsme_step(const Matrix& varrho, const Matrix& h, const std::vector<Matrix>& rs,
                  double dt, const RealVector& dwhat) {
    check_channels(rs.size(), dwhat.size());
    Matrix delta;
    liouville_into(h, rs, varrho, delta);
    delta *= dt;
    for (std::size_t j = 0; j < rs.size(); ++j) {
        const double w = dwhat(static_cast<Eigen::Index>(j));
        const Matrix flux = rs[j] * varrho + varrho * rs[j].adjoint();
        const double v = flux.trace().real();
        delta += w * (flux - v * varrho);
    }
    Matrix out = varrho + hermitize(delta);
    const double tr = out.trace().real();
    if (tr > 0.0) out /= tr;  // renormalization policy: unit trace after each step
    return out;
}

namespace {

void record_m(const Vector& psi, double p, const std::vector<Matrix>& rs, RealMatrix& m, int k) {
    for (std::size_t j = 0; j < rs.size(); ++j) {
        const double raw = 2.0 * psi.dot(rs[j] * psi).real();
        m(k, static_cast<Eigen::Index>(j)) = (p > kDeadNormSq) ? raw / p : 0.0;
    }
}

}  // namespace

Trajectory integrate_lsse(const CoefficientProcess& model, const Vector& psi0,
                          const NoisePath& path, const IntegrateOptions& opts) {
    if (psi0.size() != model.dim()) throw std::invalid_argument("psi0 dimension mismatch");
    require_finite(psi0, "psi0");
    const int steps = path.grid.steps;
    const int d = model.channels();
    if (path.dW.cols() != d) throw std::invalid_argument("noise path channel mismatch");

    Trajectory traj;
    traj.grid = path.grid;
    traj.options = opts;
    traj.states.resize(static_cast<std::size_t>(steps) + 1);
    traj.weights.resize(steps + 1);
    traj.m.resize(steps + 1, d);

    const double norm0 = psi0.norm();
    const double p0 = norm0 * norm0;
    traj.states[0] = psi0;
    traj.weights(0) = p0;

    Coefficients c;
    Matrix g;
    Vector psi = psi0;
    Vector next(psi0.size());
    RealVector dw(d);
    model.eval(0, path, c);
    record_m(psi, p0, c.R, traj.m, 0);

    for (int k = 0; k < steps; ++k) {
        if (traj.dead_at >= 0) {
            traj.states[static_cast<std::size_t>(k) + 1] = psi;
            traj.weights(k + 1) = traj.weights(k);
            traj.m.row(k + 1) = traj.m.row(k);
            continue;
        }
        model.eval(k, path, c);
        dw = path.dW.row(k);
        build_step_factor(c, path.grid.dt, dw, opts.scheme, g);
        next.noalias() = g * psi;
        if (!next.allFinite()) throw BlowupError(k);
        psi = next;
        double p = psi.squaredNorm();
        if (opts.renormalize) {
            if (p > 0.0) psi *= norm0 / std::sqrt(p);
            traj.weights(k + 1) = p0;
            p = p0;
        } else {
            traj.weights(k + 1) = p;
        }
        if (p < kDeadNormSq * p0) traj.dead_at = k + 1;
        traj.states[static_cast<std::size_t>(k) + 1] = psi;
        record_m(psi, p, c.R, traj.m, k + 1);
    }
    return traj;
}

Trajectory integrate_nlsse(const CoefficientProcess& model, const Vector& psi0_hat,
                           const NoisePath& path, bool renorm) {
    if (psi0_hat.size() != model.dim()) throw std::invalid_argument("psi0 dimension mismatch");
    if (std::abs(psi0_hat.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("nonlinear integration expects a unit initial state");
    const int steps = path.grid.steps;
    const int d = model.channels();
    if (path.dW.cols() != d) throw std::invalid_argument("noise path channel mismatch");

    Trajectory traj;
    traj.grid = path.grid;
    traj.options.renormalize = renorm;
    traj.states.resize(static_cast<std::size_t>(steps) + 1);
    traj.weights.resize(steps + 1);
    traj.m.resize(steps + 1, d);
    traj.states[0] = psi0_hat;
    traj.weights(0) = 1.0;

    Coefficients c;
    Vector psi = psi0_hat;
    RealVector dw(d);
    {
        Coefficients c0;
        model.eval(0, path, c0);
        record_m(psi, 1.0, c0.R, traj.m, 0);
    }
    for (int k = 0; k < steps; ++k) {
        model.eval(k, path, c);
        dw = path.dW.row(k);
        psi = nlsse_step(psi, c.K, c.R, path.grid.dt, dw, renorm);
        if (!psi.allFinite()) throw BlowupError(k);
        const double p = psi.squaredNorm();
        traj.states[static_cast<std::size_t>(k) + 1] = psi;
        traj.weights(k + 1) = p;
        record_m(psi, p, c.R, traj.m, k + 1);
    }
    return traj;
}

std::vector<Matrix> integrate_lsme(const CoefficientProcess& model, const Matrix& sigma0,
                                   const NoisePath& path) {
    require_square(sigma0, "sigma0");
    if (sigma0.rows() != model.dim()) throw std::invalid_argument("sigma0 dimension mismatch");
    const int steps = path.grid.steps;
    std::vector<Matrix> out(static_cast<std::size_t>(steps) + 1);
    out[0] = sigma0;
    Coefficients c;
    RealVector dw(model.channels());
    Matrix sigma = sigma0;
    for (int k = 0; k < steps; ++k) {
        model.eval(k, path, c);
        dw = path.dW.row(k);
        sigma = lsme_step(sigma, c.H, c.R, path.grid.dt, dw);
        if (!sigma.allFinite()) throw BlowupError(k);
        out[static_cast<std::size_t>(k) + 1] = sigma;
    }
    return out;
}

std::vector<Matrix> integrate_nlsme(const CoefficientProcess& model, const Matrix& rho0,
                                    const NoisePath& path) {
    require_square(rho0, "rho0");
    if (rho0.rows() != model.dim()) throw std::invalid_argument("rho0 dimension mismatch");
    if (std::abs(rho0.trace().real() - 1.0) > 1e-9)
        throw std::invalid_argument("nonlinear master equation expects unit trace");
    const int steps = path.grid.steps;
    std::vector<Matrix> out(static_cast<std::size_t>(steps) + 1);
    out[0] = rho0;
    Coefficients c;
    RealVector dw(model.channels());
    Matrix rho = rho0;
    for (int k = 0; k < steps; ++k) {
        model.eval(k, path, c);
        dw = path.dW.row(k);
        rho = nlsme_step(rho, c.H, c.R, path.grid.dt, dw);
        if (!rho.allFinite()) throw BlowupError(k);
        out[static_cast<std::size_t>(k) + 1] = rho;
    }
    return out;
}

Matrix PropagatorTable::matrix(int from, int to) const {
    if (from < 0 || to > grid.steps || from > to)
        throw std::invalid_argument("propagator indices out of range");
    const Eigen::Index n = factors.empty() ? 0 : factors[0].rows();
    Matrix a = Matrix::Identity(n, n);
    for (int k = from; k < to; ++k) a = factors[static_cast<std::size_t>(k)] * a;
    return a;
}

Vector PropagatorTable::apply(const Vector& psi, int from, int to) const {
    if (from < 0 || to > grid.steps || from > to)
        throw std::invalid_argument("propagator indices out of range");
    Vector v = psi;
    for (int k = from; k < to; ++k) v = factors[static_cast<std::size_t>(k)] * v;
    return v;
}

Matrix PropagatorTable::conjugate(const Matrix& tau, int from, int to) const {
    const Matrix a = matrix(from, to);
    return a * tau * a.adjoint();
}

RealVector PropagatorTable::condition_numbers() const {
    RealVector cond(static_cast<Eigen::Index>(factors.size()));
    for (std::size_t k = 0; k < factors.size(); ++k) {
        Eigen::JacobiSVD<Matrix> svd(factors[k]);
        const double smin = svd.singularValues().minCoeff();
        cond(static_cast<Eigen::Index>(k)) =
            smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                       : std::numeric_limits<double>::infinity();
    }
    return cond;
}

double PropagatorTable::min_singular_value() const {
    double smin = std::numeric_limits<double>::infinity();
    for (const Matrix& g : factors) {
        Eigen::JacobiSVD<Matrix> svd(g);
        smin = std::min(smin, svd.singularValues().minCoeff());
    }
    return smin;
}

PropagatorTable build_propagator(const CoefficientProcess& model, const NoisePath& path,
                                 Scheme scheme) {
    PropagatorTable table;
    table.grid = path.grid;
    table.factors.resize(static_cast<std::size_t>(path.grid.steps));
    Coefficients c;
    RealVector dw(model.channels());
    for (int k = 0; k < path.grid.steps; ++k) {
        model.eval(k, path, c);
        dw = path.dW.row(k);
        build_step_factor(c, path.grid.dt, dw, scheme, table.factors[static_cast<std::size_t>(k)]);
    }
    return table;
}

}  // namespace outraj
