#pragma once

#include <memory>
#include <vector>

#include "outraj/noise.hpp"

namespace outraj {

struct NotSkewAdjointError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DriftConditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Coefficients of the linear equation at one grid point:
// dpsi = K psi dt + sum_j R_j psi dW_j, with K = -iH - 1/2 sum_j R_j*R_j.
struct Coefficients {
    Matrix H;
    std::vector<Matrix> R;
    Matrix K;
};

// Adapted coefficient process on a noise path. eval(k, path) may read only
// X(0..k) and dW(0..k-1): the operators used over [t_k, t_{k+1}) are fixed by
// the noise seen up to t_k.
class CoefficientProcess {
  public:
    virtual ~CoefficientProcess() = default;

    virtual Eigen::Index dim() const = 0;
    virtual int channels() const = 0;
    virtual bool is_norm_preserving() const = 0;
    virtual bool is_random() const = 0;

    virtual void eval(int k, const NoisePath& path, Coefficients& out) const = 0;

    // Draws the noise this process is adapted to (plain Wiener increments for
    // deterministic coefficients, a coupled OU path for random ones).
    virtual NoisePath sample_path(const TimeGrid& grid, OUMode mode,
                                  RandomStream& stream) const = 0;

    Coefficients eval(int k, const NoisePath& path) const {
        Coefficients c;
        eval(k, path, c);
        return c;
    }
};

struct OUModel {
    Matrix h0;     // Hermitian
    Matrix l;      // Hermitian
    double gamma;  // > 0
};

Matrix drift_K(const Matrix& h, const std::vector<Matrix>& rs);

std::shared_ptr<CoefficientProcess> markovian_model(const Matrix& h,
                                                    const std::vector<Matrix>& ls);

// H(t) = H0 - gamma X(t) L, R = -iL; norm preserving since R is skew-adjoint.
std::shared_ptr<CoefficientProcess> ou_random_hamiltonian_model(const OUModel& m);

// Decompose drift a = -iH0 - 1/2 L^2, diffusion b = -iL; throws when the
// squared norm of the linear solution cannot be a martingale with these
// coefficients (b not skew-adjoint, or a+a*+b*b != 0).
struct NormPreservingDecomposition {
    Matrix h0;
    Matrix l;
};
NormPreservingDecomposition validate_norm_preserving(const Matrix& a, const Matrix& b,
                                                     double tol = kTolHerm);

// m_j = 2 Re <psi_hat | R_j psi_hat> for a normalized state.
RealVector m_coefficients(const Vector& psi_hat, const std::vector<Matrix>& rs);

}  // namespace outraj
