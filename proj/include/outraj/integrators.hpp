#pragma once

#include <stdexcept>
#include <string>

#include "outraj/coefficients.hpp"

namespace outraj {

// Raised when a state stops being finite mid-integration.
struct BlowupError : std::runtime_error {
    int step;
    explicit BlowupError(int k)
        : std::runtime_error("state became non-finite at step " + std::to_string(k) +
                             "; a smaller dt is likely needed"),
          step(k) {}
};

enum class Scheme { euler, milstein };

// Norm below which a trajectory is flagged dead and frozen.
constexpr double kDeadNormSq = 1e-12;

struct IntegrateOptions {
    Scheme scheme = Scheme::euler;
    // Project back to the initial norm after every step. Only meaningful for
    // norm-preserving models, where the exact flow keeps ||psi|| constant.
    bool renormalize = false;
};

struct Trajectory {
    TimeGrid grid;
    std::vector<Vector> states;  // steps+1
    RealVector weights;          // steps+1, p(t_k)
    RealMatrix m;                // (steps+1) x d, m_j(t_k) = 2 Re<psihat|R_j psihat>
    int dead_at = -1;            // first step with ||psi||^2 < kDeadNormSq, or -1
    IntegrateOptions options;
};

// One-step matrix G = I + K dt + sum_j R_j dW_j (+ the level-2 Ito term
// 1/2 R^2 (dW^2 - dt) for the single-channel milstein scheme).
void build_step_factor(const Coefficients& c, double dt, const RealVector& dw,
                       Scheme scheme, Matrix& g);

Vector lsse_step(const Vector& psi, const Matrix& k_op, const std::vector<Matrix>& rs,
                 double dt, const RealVector& dw, Scheme scheme = Scheme::euler);

double weight_direct(const Vector& psi);

// p(0) * exp(sum_j [sum_k m_jk dW_jk - 1/2 sum_k m_jk^2 dt]).
double weight_exponential(const RealMatrix& m_history, const RealMatrix& dw_history,
                          double dt, double p0 = 1.0);

RealVector girsanov_shift(const RealVector& dw, const RealVector& m, double dt);
RealMatrix girsanov_shift(const RealMatrix& dw_history, const RealMatrix& m_history,
                          double dt);

// Euler step of the norm-preserving nonlinear equation driven by the shifted
// increments: drift K psi + sum_j [(Re n_j) R_j - 1/2 (Re n_j)^2] psi,
// diffusion sum_j [R_j - Re n_j] psi dWhat_j, with n_j = <psi|R_j psi>.
Vector nlsse_step(const Vector& psi_hat, const Matrix& k_op, const std::vector<Matrix>& rs,
                  double dt, const RealVector& dwhat, bool renorm);

Matrix lsme_step(const Matrix& sigma, const Matrix& h, const std::vector<Matrix>& rs,
                 double dt, const RealVector& dw);

Matrix nlsme_step(const Matrix& varrho, const Matrix& h, const std::vector<Matrix>& rs,
                  double dt, const RealVector& dwhat);

Trajectory integrate_lsse(const CoefficientProcess& model, const Vector& psi0,
                          const NoisePath& path, const IntegrateOptions& opts = {});

// Treats path.dW as the physical-measure increments.
Trajectory integrate_nlsse(const CoefficientProcess& model, const Vector& psi0_hat,
                           const NoisePath& path, bool renorm = true);

std::vector<Matrix> integrate_lsme(const CoefficientProcess& model, const Matrix& sigma0,
                                   const NoisePath& path);

std::vector<Matrix> integrate_nlsme(const CoefficientProcess& model, const Matrix& rho0,
                                    const NoisePath& path);

// One-step factors of the lSSE flow; products give A(t_k, t_s).
struct PropagatorTable {
    TimeGrid grid;
    std::vector<Matrix> factors;  // G_k, k = 0..steps-1

    // A(t_to, t_from), cumulative product built left-to-right.
    Matrix matrix(int from, int to) const;
    // A(t_to, t_from) psi as a chain of matrix-vector products; this is the
    // same arithmetic the integrator performs, hence bit-exact against it.
    Vector apply(const Vector& psi, int from, int to) const;
    // Lambda(t_to, t_from)[tau] = A tau A*.
    Matrix conjugate(const Matrix& tau, int from, int to) const;

    RealVector condition_numbers() const;
    double min_singular_value() const;
};

PropagatorTable build_propagator(const CoefficientProcess& model, const NoisePath& path,
                                 Scheme scheme = Scheme::euler);

}  // namespace outraj
