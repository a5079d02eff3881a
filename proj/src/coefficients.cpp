#include "outraj/coefficients.hpp"

namespace outraj {

namespace {

const Complex kI{0.0, 1.0};

Matrix checked_hermitian(const Matrix& m, const char* who) {
    require_square(m, who);
    require_finite(m, who);
    if (!is_hermitian(m))
        throw std::invalid_argument(std::string(who) + ": operator must be Hermitian");
    return hermitize(m);
}

class MarkovianProcess final : public CoefficientProcess {
  public:
    MarkovianProcess(Matrix h, std::vector<Matrix> rs) : coeffs_{} {
        coeffs_.H = std::move(h);
        coeffs_.R = std::move(rs);
        coeffs_.K = drift_K(coeffs_.H, coeffs_.R);
    }

    Eigen::Index dim() const override { return coeffs_.H.rows(); }
    int channels() const override { return static_cast<int>(coeffs_.R.size()); }
    bool is_norm_preserving() const override { return false; }
    bool is_random() const override { return false; }

    void eval(int, const NoisePath&, Coefficients& out) const override { out = coeffs_; }

    NoisePath sample_path(const TimeGrid& grid, OUMode, RandomStream& stream) const override {
        return wiener_increments(grid, channels(), stream);
    }

  private:
    Coefficients coeffs_;
};

class OUProcess final : public CoefficientProcess {
  public:
    explicit OUProcess(const OUModel& m)
        : h0_(checked_hermitian(m.h0, "ou_random_hamiltonian_model")),
          l_(checked_hermitian(m.l, "ou_random_hamiltonian_model")),
          gamma_(m.gamma),
          r_(-kI * l_),
          k0_(-kI * h0_ - 0.5 * l_ * l_),
          k1_(kI * gamma_ * l_) {
        if (!(gamma_ > 0.0))
            throw std::invalid_argument("ou_random_hamiltonian_model: gamma must be > 0");
        require_same_dim(h0_, l_, "ou_random_hamiltonian_model");
    }

    Eigen::Index dim() const override { return h0_.rows(); }
    int channels() const override { return 1; }
    bool is_norm_preserving() const override { return true; }
    bool is_random() const override { return true; }

    void eval(int k, const NoisePath& path, Coefficients& out) const override {
        if (!path.has_ou())
            throw std::invalid_argument("ou model: path carries no OU samples");
        if (k < 0 || k > path.grid.steps)
            throw std::invalid_argument("ou model: step index out of range");
        const double x = path.X(k);
        // K(t_k) = -i(H0 - gamma X_k L) - L^2/2 = k0 + X_k * (i gamma L)
        out.H = h0_ - (gamma_ * x) * l_;
        out.R.assign(1, r_);
        out.K = k0_ + x * k1_;
    }

    NoisePath sample_path(const TimeGrid& grid, OUMode mode, RandomStream& stream) const override {
        return ou_path(grid, gamma_, stream, mode);
    }

  private:
    Matrix h0_, l_;
    double gamma_;
    Matrix r_, k0_, k1_;
};

}  // namespace

Matrix drift_K(const Matrix& h, const std::vector<Matrix>& rs) {
    Matrix hh = checked_hermitian(h, "drift_K");
    Matrix k = -kI * hh;
    for (const auto& r : rs) {
        require_same_dim(h, r, "drift_K");
        k -= 0.5 * r.adjoint() * r;
    }
    return k;
}

std::shared_ptr<CoefficientProcess> markovian_model(const Matrix& h,
                                                    const std::vector<Matrix>& ls) {
    Matrix hh = checked_hermitian(h, "markovian_model");
    for (const auto& l : ls) {
        require_same_dim(h, l, "markovian_model");
        require_finite(l, "markovian_model");
    }
    return std::make_shared<MarkovianProcess>(std::move(hh), ls);
}

std::shared_ptr<CoefficientProcess> ou_random_hamiltonian_model(const OUModel& m) {
    return std::make_shared<OUProcess>(m);
}

NormPreservingDecomposition validate_norm_preserving(const Matrix& a, const Matrix& b,
                                                     double tol) {
    require_square(a, "validate_norm_preserving");
    require_same_dim(a, b, "validate_norm_preserving");
    require_finite(a, "validate_norm_preserving");
    require_finite(b, "validate_norm_preserving");

    if (operator_norm(b + b.adjoint()) > tol)
        throw NotSkewAdjointError(
            "validate_norm_preserving: diffusion operator is not skew-adjoint");
    if (operator_norm(a + a.adjoint() + b.adjoint() * b) > tol)
        throw DriftConditionError(
            "validate_norm_preserving: a + a* + b*b != 0, the squared norm "
            "cannot be a martingale");

    NormPreservingDecomposition d;
    d.l = hermitize(kI * b);
    d.h0 = hermitize(kI * (a + 0.5 * d.l * d.l));
    return d;
}

RealVector m_coefficients(const Vector& psi_hat, const std::vector<Matrix>& rs) {
    if (std::abs(psi_hat.squaredNorm() - 1.0) > 1e-8)
        throw std::invalid_argument("m_coefficients: state must be normalized");
    RealVector m(rs.size());
    for (size_t j = 0; j < rs.size(); ++j) {
        if (rs[j].cols() != psi_hat.size())
            throw std::invalid_argument("m_coefficients: dimension mismatch");
        m(static_cast<Eigen::Index>(j)) = 2.0 * psi_hat.dot(rs[j] * psi_hat).real();
    }
    return m;
}

}  // namespace outraj
