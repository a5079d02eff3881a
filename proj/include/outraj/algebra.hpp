#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace outraj {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

constexpr double kTolHerm = 1e-10;
constexpr double kTolPsd = 1e-10;

// Linear map on n x n matrices, stored densely as n^2 x n^2.
// Column-stacking convention throughout: vec(A X B) = (B^T (x) A) vec(X).
struct Superoperator {
    Eigen::Index dim = 0;   // n, the Hilbert space dimension
    Matrix mat;             // n^2 x n^2

    Matrix apply(const Matrix& x) const;
};

Matrix commutator(const Matrix& a, const Matrix& b);
Matrix anticommutator(const Matrix& a, const Matrix& b);

// R rho R* - 1/2 {R*R, rho}
Matrix dissipator(const Matrix& l, const Matrix& rho);

Vector vec(const Matrix& x);
Matrix devec(const Vector& v, Eigen::Index n);

Matrix kron(const Matrix& a, const Matrix& b);

// Superoperator for X -> left * X * right.
Superoperator superop_from_form(const Matrix& left, const Matrix& right);

// Zero map and identity map on n x n matrices.
Superoperator superop_zero(Eigen::Index n);
Superoperator superop_identity(Eigen::Index n);

// e^{s t} by scaling-and-squaring with a truncated Taylor series.
Superoperator superop_exp(const Superoperator& s, double t);

double operator_norm(const Matrix& a);      // largest singular value
double hermiticity_defect(const Matrix& a); // ||a - a*|| (operator norm)
bool is_hermitian(const Matrix& a, double tol = kTolHerm);
Matrix hermitize(const Matrix& a);          // (a + a*)/2, exact Hermitian output

struct DensityReport {
    double herm_defect = 0.0;
    double min_eigenvalue = 0.0;
    Complex trace{0.0, 0.0};
    bool pass = false;
};

DensityReport check_density(const Matrix& rho, double tol = kTolPsd);

void require_square(const Matrix& a, const char* who);
void require_same_dim(const Matrix& a, const Matrix& b, const char* who);
void require_finite(const Matrix& a, const char* who);

}  // namespace outraj
