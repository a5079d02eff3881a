#pragma once

#include <vector>

#include "outraj/coefficients.hpp"

namespace outraj {

// L_M = -i[H0, .] - 1/2 [L, [L, .]]; trace-annihilating Lindblad generator.
Superoperator mean_liouvillian(const Matrix& h0, const Matrix& l);

// eta(t_k) under the semigroup e^{L_M t}, one exact exponential per step.
std::vector<Matrix> lindblad_evolve(const Superoperator& l_m, const Matrix& rho0,
                                    const TimeGrid& grid);

enum class MemoryMethod { aux_ode, quadrature };

struct MemoryMEOptions {
    MemoryMethod method = MemoryMethod::aux_ode;
    // Dropping the convolution leaves the bare Lindblad part; used for
    // consistency checks against lindblad_evolve.
    bool memory_term = true;
};

struct MemoryMEState {
    Matrix eta;
    Matrix y;  // running convolution of e^{(L_M - gamma)(t-s)} [L, eta(s)]
    double t = 0.0;
};

// eta' = L_M[eta] + (gamma/2) [L, Y], Y' = (L_M - gamma)[Y] + [L, eta].
// The exponential kernel makes this local system equivalent to the
// integro-differential mean equation with memory kernel
// (gamma/2) [L, e^{(L_M - gamma)(t-s)} [L, eta(s)]].
// aux_ode integrates it with RK4; quadrature instead advances the convolution
// by an exact-exponential trapezoid recursion with a Heun corrector.
std::vector<MemoryMEState> memory_me_evolve(const OUModel& model, const Matrix& rho0,
                                            const TimeGrid& grid,
                                            const MemoryMEOptions& opts = {});

// Memory kernel at lag tau: (gamma/2) C e^{(L_M - gamma) tau} C with
// C = -i[L, .]. At tau = 0 this is -(gamma/2)[L, [L, .]]; the term entering
// the mean equation above is its negative.
Superoperator kernel_K1(const OUModel& model, double tau);

// Exact a priori state for commuting H0 = diag(omega), L = diag(ldiag):
// eta_jk(t) = rho0_jk e^{-i(omega_j - omega_k) t}
//                     e^{-(l_j - l_k)^2 (1 - e^{-gamma t}) / (2 gamma)},
// from the Gaussian phase X(t) - X(0) of the stationary OU process with
// Var(X(t) - X(0)) = (1 - e^{-gamma t}) / gamma.
Matrix dephasing_oracle(const RealVector& omega, const RealVector& ldiag, double gamma,
                        const Matrix& rho0, double t);

}  // namespace outraj
