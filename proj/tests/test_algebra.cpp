#include <doctest.h>

#include <random>

#include "outraj/algebra.hpp"

using namespace outraj;

namespace {

Matrix random_matrix(Eigen::Index n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Matrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = Complex(g(rng), g(rng));
    return m;
}

Matrix random_hermitian(Eigen::Index n, unsigned seed) {
    return hermitize(random_matrix(n, seed));
}

}  // namespace

TEST_CASE("vec stacks columns and devec inverts it") {
    const Matrix x = random_matrix(3, 1);
    const Vector v = vec(x);
    CHECK(v.size() == 9);
    // column-major stacking: entry (r, c) lands at c*n + r
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index c = 0; c < 3; ++c) CHECK(v(c * 3 + r) == x(r, c));
    CHECK((devec(v, 3) - x).norm() == 0.0);
}

TEST_CASE("superop_from_form matches left * X * right") {
    const Matrix a = random_matrix(3, 2), b = random_matrix(3, 3), x = random_matrix(3, 4);
    const Superoperator s = superop_from_form(a, b);
    const Matrix direct = a * x * b;
    CHECK((s.apply(x) - direct).norm() < 1e-13 * direct.norm());
    CHECK((devec(s.mat * vec(x), 3) - direct).norm() < 1e-13 * direct.norm());
}

TEST_CASE("kron reproduces the elementwise definition") {
    const Matrix a = random_matrix(2, 5), b = random_matrix(3, 6);
    const Matrix k = kron(a, b);
    REQUIRE(k.rows() == 6);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 6; ++j)
            CHECK(k(i, j) == a(i / 3, j / 3) * b(i % 3, j % 3));
}

TEST_CASE("commutator identities") {
    const Matrix a = random_matrix(3, 7), b = random_matrix(3, 8);
    CHECK((commutator(a, b) + commutator(b, a)).norm() < 1e-13);
    CHECK((anticommutator(a, b) - anticommutator(b, a)).norm() < 1e-13);
    CHECK((commutator(a, a)).norm() < 1e-13);
}

TEST_CASE("dissipator is trace free and annihilates stationary states") {
    const Matrix l = random_matrix(3, 9);
    const Matrix rho = random_hermitian(3, 10);
    CHECK(std::abs(dissipator(l, rho).trace()) < 1e-12);
    // identity/d is stationary for unitary l
    Matrix u(2, 2);
    u << 0, 1, 1, 0;
    const Matrix id = Matrix::Identity(2, 2) / 2.0;
    CHECK(dissipator(u, id).norm() < 1e-14);
}

TEST_CASE("superop_exp agrees with a scalar exponential on a diagonal generator") {
    // generator X -> -2X has exp(t gen) = e^{-2t} X
    const Matrix gen = -2.0 * Matrix::Identity(4, 4);
    Superoperator s;
    s.dim = 2;
    s.mat = gen;
    const Matrix x = random_matrix(2, 11);
    const Matrix advanced = superop_exp(s, 0.7).apply(x);
    CHECK((advanced - std::exp(-1.4) * x).norm() < 1e-13);
}

TEST_CASE("superop_exp composes: exp(t) exp(s) = exp(t+s)") {
    Superoperator gen = superop_from_form(random_matrix(2, 12), Matrix::Identity(2, 2));
    gen.mat += superop_from_form(Matrix::Identity(2, 2), random_matrix(2, 13)).mat;
    const Matrix once = superop_exp(gen, 0.9).mat;
    const Matrix twice = superop_exp(gen, 0.45).mat;
    CHECK((twice * twice - once).norm() < 1e-11 * once.norm());
}

TEST_CASE("operator_norm is the largest singular value") {
    Matrix m(2, 2);
    m << 3, 0, 0, -4;
    CHECK(operator_norm(m) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(operator_norm(Matrix::Zero(2, 2)) == 0.0);
}

TEST_CASE("hermitize output passes is_hermitian exactly") {
    const Matrix h = hermitize(random_matrix(4, 14));
    CHECK(hermiticity_defect(h) == 0.0);
    CHECK(is_hermitian(h, 0.0));
    CHECK_FALSE(is_hermitian(random_matrix(4, 15)));
}

TEST_CASE("check_density grades valid and invalid states") {
    Matrix rho(2, 2);
    rho << 0.75, 0.25, 0.25, 0.25;
    const DensityReport good = check_density(rho);
    CHECK(good.pass);
    CHECK(good.min_eigenvalue >= -kTolPsd);
    CHECK(std::abs(good.trace - Complex(1, 0)) < 1e-14);

    Matrix neg(2, 2);
    neg << 1.5, 0, 0, -0.5;  // trace one, negative branch
    CHECK_FALSE(check_density(neg).pass);
}

TEST_CASE("argument guards throw with the caller's name") {
    const Matrix rect = Matrix::Zero(2, 3);
    CHECK_THROWS_WITH_AS(require_square(rect, "frob"), doctest::Contains("frob"),
                         std::invalid_argument);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(require_finite(bad, "frob"), std::invalid_argument);
    CHECK_THROWS_AS(require_same_dim(Matrix::Zero(2, 2), Matrix::Zero(3, 3), "frob"),
                    std::invalid_argument);
}
