#include "outraj/memory_master.hpp"

#include <cmath>

namespace outraj {

namespace {

constexpr Complex kI{0.0, 1.0};

void check_hermitian_pair(const Matrix& h0, const Matrix& l, const char* who) {
    require_square(h0, who);
    require_square(l, who);
    require_same_dim(h0, l, who);
    if (!is_hermitian(h0) || !is_hermitian(l))
        throw std::invalid_argument(std::string(who) + ": H0 and L must be Hermitian");
}

Matrix anti_hermitize(const Matrix& a) { return 0.5 * (a - a.adjoint()); }

}  // namespace

Superoperator mean_liouvillian(const Matrix& h0, const Matrix& l) {
    check_hermitian_pair(h0, l, "mean_liouvillian");
    const Eigen::Index n = h0.rows();
    const Matrix id = Matrix::Identity(n, n);
    const Matrix comm_h = superop_from_form(h0, id).mat - superop_from_form(id, h0).mat;
    const Matrix comm_l = superop_from_form(l, id).mat - superop_from_form(id, l).mat;
    Superoperator out;
    out.dim = n;
    out.mat = -kI * comm_h - 0.5 * (comm_l * comm_l);
    return out;
}

std::vector<Matrix> lindblad_evolve(const Superoperator& l_m, const Matrix& rho0,
                                    const TimeGrid& grid) {
    require_square(rho0, "lindblad_evolve");
    if (rho0.rows() != l_m.dim)
        throw std::invalid_argument("lindblad_evolve: state dimension mismatch");
    const Superoperator step = superop_exp(l_m, grid.dt);
    std::vector<Matrix> out(static_cast<std::size_t>(grid.steps) + 1);
    out[0] = rho0;
    Matrix eta = rho0;
    for (int k = 0; k < grid.steps; ++k) {
        eta = hermitize(step.apply(eta));
        out[static_cast<std::size_t>(k) + 1] = eta;
    }
    return out;
}

std::vector<MemoryMEState> memory_me_evolve(const OUModel& model, const Matrix& rho0,
                                            const TimeGrid& grid,
                                            const MemoryMEOptions& opts) {
    check_hermitian_pair(model.h0, model.l, "memory_me_evolve");
    require_square(rho0, "memory_me_evolve");
    require_same_dim(rho0, model.l, "memory_me_evolve");
    if (!is_hermitian(rho0))
        throw std::invalid_argument("memory_me_evolve: rho0 must be Hermitian");
    if (!(model.gamma > 0.0))
        throw std::invalid_argument("memory_me_evolve: gamma must be > 0");

    const Matrix& h0 = model.h0;
    const Matrix& l = model.l;
    const double gamma = model.gamma;
    const double h = grid.dt;
    const Eigen::Index n = rho0.rows();
    const double mem = opts.memory_term ? 1.0 : 0.0;

    auto lm = [&](const Matrix& eta) -> Matrix {
        return -kI * commutator(h0, eta) - 0.5 * commutator(l, commutator(l, eta));
    };

    std::vector<MemoryMEState> out(static_cast<std::size_t>(grid.steps) + 1);
    out[0] = {rho0, Matrix::Zero(n, n), 0.0};

    if (opts.method == MemoryMethod::aux_ode) {
        auto f_eta = [&](const Matrix& eta, const Matrix& y) -> Matrix {
            return lm(eta) + (mem * 0.5 * gamma) * commutator(l, y);
        };
        auto f_y = [&](const Matrix& eta, const Matrix& y) -> Matrix {
            return lm(y) - gamma * y + commutator(l, eta);
        };
        Matrix eta = rho0;
        Matrix y = Matrix::Zero(n, n);
        for (int k = 0; k < grid.steps; ++k) {
            const Matrix e1 = f_eta(eta, y), y1 = f_y(eta, y);
            const Matrix e2 = f_eta(eta + 0.5 * h * e1, y + 0.5 * h * y1),
                         y2 = f_y(eta + 0.5 * h * e1, y + 0.5 * h * y1);
            const Matrix e3 = f_eta(eta + 0.5 * h * e2, y + 0.5 * h * y2),
                         y3 = f_y(eta + 0.5 * h * e2, y + 0.5 * h * y2);
            const Matrix e4 = f_eta(eta + h * e3, y + h * y3), y4 = f_y(eta + h * e3, y + h * y3);
            eta = hermitize(eta + (h / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4));
            y = anti_hermitize(y + (h / 6.0) * (y1 + 2.0 * y2 + 2.0 * y3 + y4));
            out[static_cast<std::size_t>(k) + 1] = {eta, y, grid.time(k + 1)};
        }
        return out;
    }

    // Trapezoid step for U(t) = int_0^t e^{(L_M - gamma)(t-s)} [L, eta(s)] ds:
    // U_{k+1} = E U_k + (h/2)(E C_k + C_{k+1}), E = e^{(L_M - gamma) h},
    // with a Heun pass so the eta update matches the corrected U.
    Superoperator gen = mean_liouvillian(h0, l);
    gen.mat -= gamma * Matrix::Identity(gen.mat.rows(), gen.mat.cols());
    const Superoperator e_step = superop_exp(gen, h);

    Matrix eta = rho0;
    Matrix u = Matrix::Zero(n, n);
    for (int k = 0; k < grid.steps; ++k) {
        const Matrix c_k = commutator(l, eta);
        const Matrix eu = e_step.apply(u);
        const Matrix ec = e_step.apply(c_k);
        const Matrix f_k = lm(eta) + (mem * 0.5 * gamma) * commutator(l, u);

        const Matrix eta_pred = eta + h * f_k;
        const Matrix u_pred = eu + 0.5 * h * (ec + commutator(l, eta_pred));
        const Matrix f_pred = lm(eta_pred) + (mem * 0.5 * gamma) * commutator(l, u_pred);

        eta = hermitize(eta + 0.5 * h * (f_k + f_pred));
        u = anti_hermitize(eu + 0.5 * h * (ec + commutator(l, eta)));
        out[static_cast<std::size_t>(k) + 1] = {eta, u, grid.time(k + 1)};
    }
    return out;
}

Superoperator kernel_K1(const OUModel& model, double tau) {
    check_hermitian_pair(model.h0, model.l, "kernel_K1");
    if (tau < 0.0) throw std::invalid_argument("kernel_K1: lag must be nonnegative");
    const Eigen::Index n = model.l.rows();
    const Matrix id = Matrix::Identity(n, n);
    const Matrix comm_l = superop_from_form(model.l, id).mat - superop_from_form(id, model.l).mat;
    Superoperator gen = mean_liouvillian(model.h0, model.l);
    gen.mat -= model.gamma * Matrix::Identity(gen.mat.rows(), gen.mat.cols());
    const Superoperator decay = superop_exp(gen, tau);
    Superoperator out;
    out.dim = n;
    out.mat = (0.5 * model.gamma) * (-kI * comm_l) * decay.mat * (-kI * comm_l);
    return out;
}

Matrix dephasing_oracle(const RealVector& omega, const RealVector& ldiag, double gamma,
                        const Matrix& rho0, double t) {
    require_square(rho0, "dephasing_oracle");
    if (omega.size() != rho0.rows() || ldiag.size() != rho0.rows())
        throw std::invalid_argument("dephasing_oracle: diagonal lengths must match rho0");
    if (!(gamma > 0.0)) throw std::invalid_argument("dephasing_oracle: gamma must be > 0");
    const double var = (1.0 - std::exp(-gamma * t)) / gamma;  // Var(X(t) - X(0))
    const Eigen::Index n = rho0.rows();
    Matrix out(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            const double dl = ldiag(j) - ldiag(k);
            const Complex phase = std::exp(Complex(0.0, -(omega(j) - omega(k)) * t));
            out(j, k) = rho0(j, k) * phase * std::exp(-0.5 * dl * dl * var);
        }
    return out;
}

}  // namespace outraj
