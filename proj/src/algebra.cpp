#include "outraj/algebra.hpp"

#include <cmath>

namespace outraj {

void require_square(const Matrix& a, const char* who) {
    if (a.rows() != a.cols())
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
}

void require_same_dim(const Matrix& a, const Matrix& b, const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

void require_finite(const Matrix& a, const char* who) {
    if (!a.allFinite())
        throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

Matrix commutator(const Matrix& a, const Matrix& b) {
    require_same_dim(a, b, "commutator");
    return a * b - b * a;
}

Matrix anticommutator(const Matrix& a, const Matrix& b) {
    require_same_dim(a, b, "anticommutator");
    return a * b + b * a;
}

Matrix dissipator(const Matrix& l, const Matrix& rho) {
    require_same_dim(l, rho, "dissipator");
    Matrix ldl = l.adjoint() * l;
    return l * rho * l.adjoint() - 0.5 * anticommutator(ldl, rho);
}

Vector vec(const Matrix& x) {
    // Eigen matrices are column-major, so this is column stacking.
    return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix devec(const Vector& v, Eigen::Index n) {
    if (v.size() != n * n)
        throw std::invalid_argument("devec: size is not n^2");
    return Eigen::Map<const Matrix>(v.data(), n, n);
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Matrix Superoperator::apply(const Matrix& x) const {
    if (x.rows() != dim || x.cols() != dim)
        throw std::invalid_argument("Superoperator::apply: dimension mismatch");
    return devec(mat * vec(x), dim);
}

Superoperator superop_from_form(const Matrix& left, const Matrix& right) {
    require_square(left, "superop_from_form");
    require_same_dim(left, right, "superop_from_form");
    return Superoperator{left.rows(), kron(right.transpose(), left)};
}

Superoperator superop_zero(Eigen::Index n) {
    return Superoperator{n, Matrix::Zero(n * n, n * n)};
}

Superoperator superop_identity(Eigen::Index n) {
    return Superoperator{n, Matrix::Identity(n * n, n * n)};
}

Superoperator superop_exp(const Superoperator& s, double t) {
    require_finite(s.mat, "superop_exp");
    if (!(t >= 0.0)) throw std::invalid_argument("superop_exp: t must be >= 0");

    const Eigen::Index m = s.mat.rows();
    Matrix a = s.mat * t;

    // Scale so ||a/2^j||_1 <= 1/2, exponentiate the small block by Taylor,
    // square back up.
    double norm1 = 0.0;
    for (Eigen::Index j = 0; j < m; ++j)
        norm1 = std::max(norm1, a.col(j).cwiseAbs().sum());
    int squarings = 0;
    if (norm1 > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
        a /= std::pow(2.0, squarings);
    }

    Matrix result = Matrix::Identity(m, m);
    Matrix term = Matrix::Identity(m, m);
    for (int k = 1; k <= 30; ++k) {
        term = (term * a / static_cast<double>(k)).eval();
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    for (int j = 0; j < squarings; ++j) result = (result * result).eval();
    return Superoperator{s.dim, std::move(result)};
}

double operator_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    return a.jacobiSvd().singularValues()(0);
}

double hermiticity_defect(const Matrix& a) {
    return operator_norm(a - a.adjoint());
}

bool is_hermitian(const Matrix& a, double tol) {
    return a.rows() == a.cols() && hermiticity_defect(a) <= tol;
}

Matrix hermitize(const Matrix& a) {
    return 0.5 * (a + a.adjoint());
}

DensityReport check_density(const Matrix& rho, double tol) {
    require_square(rho, "check_density");
    DensityReport rep;
    rep.herm_defect = hermiticity_defect(rho);
    rep.trace = rho.trace();
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(rho));
    rep.min_eigenvalue = es.eigenvalues().minCoeff();
    rep.pass = rep.herm_defect <= tol && rep.min_eigenvalue >= -tol &&
               std::abs(rep.trace.imag()) <= tol;
    return rep;
}

}  // namespace outraj
