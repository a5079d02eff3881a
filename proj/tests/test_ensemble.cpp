#include <doctest.h>

#include <cmath>

#include "outraj/ensemble.hpp"
#include "outraj/memory_master.hpp"

using namespace outraj;

namespace {

Matrix sx() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Matrix sz() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Matrix sminus() {
    Matrix m(2, 2);
    m << 0, 1, 0, 0;
    return m;
}

Vector ket1() {
    Vector v(2);
    v << 0, 1;
    return v;
}

Vector plus() {
    Vector v(2);
    v << std::sqrt(0.5), std::sqrt(0.5);
    return v;
}

bool stats_identical(const EnsembleStats& a, const EnsembleStats& b) {
    if (a.times != b.times || a.N != b.N || a.dead_count != b.dead_count) return false;
    for (std::size_t r = 0; r < a.eta.size(); ++r) {
        if ((a.eta[r].array() != b.eta[r].array()).any()) return false;
        if ((a.se_eta_entry[r].array() != b.se_eta_entry[r].array()).any()) return false;
    }
    if ((a.mean_weight.array() != b.mean_weight.array()).any()) return false;
    if ((a.se_weight.array() != b.se_weight.array()).any()) return false;
    for (std::size_t t = 0; t < a.tracks.size(); ++t) {
        if ((a.tracks[t].mean.array() != b.tracks[t].mean.array()).any()) return false;
        if ((a.tracks[t].se.array() != b.tracks[t].se.array()).any()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("aggregation is independent of the worker count") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.2, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    spec.observables = {{"sz", sz()}};

    spec.workers = 1;
    const EnsembleStats w1 = run_ensemble(*model, g, 300, 99, spec);
    spec.workers = 2;
    const EnsembleStats w2 = run_ensemble(*model, g, 300, 99, spec);
    spec.workers = 8;
    const EnsembleStats w8 = run_ensemble(*model, g, 300, 99, spec);

    CHECK(stats_identical(w1, w2));
    CHECK(stats_identical(w1, w8));
}

TEST_CASE("mean state starts at the initial projector with zero error bar") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.1, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    const EnsembleStats stats = run_ensemble(*model, g, 200, 1, spec);
    const Matrix rho0 = ket1() * ket1().adjoint();
    CHECK((stats.eta[0] - rho0).norm() == 0.0);
    CHECK(stats.se_eta_entry[0].maxCoeff() == 0.0);
}

TEST_CASE("mean state stays Hermitian with trace equal to the mean weight") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.3, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    const EnsembleStats stats = run_ensemble(*model, g, 500, 3, spec);
    for (std::size_t r = 0; r < stats.eta.size(); ++r) {
        CHECK(hermiticity_defect(stats.eta[r]) < 1e-14);
        CHECK(std::abs(stats.eta[r].trace().real() - stats.mean_weight(static_cast<Eigen::Index>(r))) <
              1e-12);
    }
    CHECK(stats.dead_count == 0);
}

TEST_CASE("mean state is positive within tolerance plus error bar") {
    const auto model = ou_random_hamiltonian_model({sx(), sz(), 1.0});
    const TimeGrid g = make_grid(0.5, 0.005);
    RunSpec spec;
    spec.psi0 = plus();
    const EnsembleStats stats = run_ensemble(*model, g, 400, 12, spec);
    const std::size_t last = stats.eta.size() - 1;
    const DensityReport rep = check_density(hermitize(stats.eta[last]));
    CHECK(rep.min_eigenvalue >= -(kTolPsd + stats.se_eta(static_cast<Eigen::Index>(last))));
}

TEST_CASE("error bars shrink like the square root of the ensemble size") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.5, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    const EnsembleStats small = run_ensemble(*model, g, 256, 77, spec);
    const EnsembleStats big = run_ensemble(*model, g, 1024, 78, spec);
    const Eigen::Index last = static_cast<Eigen::Index>(small.eta.size()) - 1;
    const double ratio = small.se_eta(last) / big.se_eta(last);
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.4);
}

TEST_CASE("martingale report flags undefined error bars at N = 1") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.1, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    const EnsembleStats one = run_ensemble(*model, g, 1, 0, spec);
    CHECK_FALSE(martingale_report(one).se_defined);

    const EnsembleStats many = run_ensemble(*model, g, 64, 0, spec);
    const MartingaleReport rep = martingale_report(many);
    CHECK(rep.se_defined);
    CHECK(rep.z(0) == 0.0);  // exact mean 1 at t = 0
    CHECK(std::isfinite(rep.max_abs));
}

TEST_CASE("named tracks equal the physical expectation of the mean state") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.2, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    spec.observables = {{"sz", sz()}};
    const EnsembleStats stats = run_ensemble(*model, g, 300, 5, spec);
    const Track& track = find_track(stats, "sz");
    const RealVector from_eta = physical_expectation(stats, sz());
    for (Eigen::Index k = 0; k < track.mean.size(); ++k)
        CHECK(std::abs(track.mean(k) - from_eta(k)) < 1e-12);
    CHECK_THROWS_AS(find_track(stats, "missing"), std::invalid_argument);
}

TEST_CASE("stride controls the recorded grid") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.4, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    spec.stride = 10;
    const EnsembleStats stats = run_ensemble(*model, g, 32, 4, spec);
    REQUIRE(stats.times.size() == 5);
    CHECK(stats.times[1] == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(stats.eta.size() == 5);

    spec.stride = 7;  // does not divide 40
    CHECK_THROWS_AS(run_ensemble(*model, g, 32, 4, spec), std::invalid_argument);
}

TEST_CASE("recorded noise-state cross moment matches the Gaussian identity") {
    // dephasing: E[X sigma]_01(t) = -i (l0 - l1) (1 - e^{-gamma t}) / (2 gamma)
    //            * eta_01(t), a Stein-type consequence of joint Gaussianity
    const double gamma = 1.0;
    const auto model = ou_random_hamiltonian_model({Matrix::Zero(2, 2), sz(), gamma});
    const TimeGrid g = make_grid(0.5, 0.002);
    RunSpec spec;
    spec.psi0 = plus();
    spec.record_xsigma = true;
    const EnsembleStats stats = run_ensemble(*model, g, 4000, 31, spec);
    REQUIRE(stats.xsigma.size() == stats.eta.size());

    const std::size_t last = stats.eta.size() - 1;
    const double t = stats.times[last];
    const Complex predicted = Complex(0, -1) * 2.0 * (1.0 - std::exp(-gamma * t)) /
                              (2.0 * gamma) * stats.eta[last](0, 1);
    const Complex measured = stats.xsigma[last](0, 1);
    const double slack = 4.0 * stats.se_xsigma_entry[last](0, 1) + 5e-3;
    CHECK(std::abs(measured - predicted) < slack);
}

TEST_CASE("xsigma requires a random model") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.1, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    spec.record_xsigma = true;
    CHECK_THROWS_AS(run_ensemble(*model, g, 8, 0, spec), std::invalid_argument);
}

TEST_CASE("ensemble failure reports the trajectory and step") {
    const auto model = markovian_model(Matrix::Zero(2, 2), {1e80 * sx()});
    const TimeGrid g = make_grid(0.1, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    try {
        run_ensemble(*model, g, 4, 0, spec);
        FAIL("expected EnsembleError");
    } catch (const EnsembleError& e) {
        CHECK(e.trajectory_index >= 0);
        CHECK(e.step >= 0);
        CHECK(doctest::String(e.what()) != doctest::String(""));
    }
}

TEST_CASE("mean-equation residual shrinks into its combined error budget") {
    const OUModel m{sx(), sz(), 1.0};
    const auto model = ou_random_hamiltonian_model(m);
    const TimeGrid g = make_grid(0.2, 0.004);
    RunSpec spec;
    spec.psi0 = plus();
    spec.record_xsigma = true;
    spec.record_residual = true;
    spec.residual_model = m;
    const EnsembleStats stats = run_ensemble(*model, g, 2000, 13, spec);
    const ResidualReport rep = mean_eq_residual(stats, m);
    REQUIRE(rep.times.size() == static_cast<std::size_t>(g.steps) - 1);
    // generous cap: statistical error plus O(dt) discretization bias
    for (Eigen::Index k = 0; k < rep.norm.size(); ++k)
        CHECK(rep.norm(k) <= 4.0 * rep.se(k) + 0.2);
    CHECK(rep.max_norm == rep.norm.maxCoeff());
}

TEST_CASE("residual recording demands a compatible run") {
    const OUModel m{sx(), sz(), 1.0};
    const auto model = ou_random_hamiltonian_model(m);
    const TimeGrid g = make_grid(0.2, 0.01);
    RunSpec spec;
    spec.psi0 = plus();
    spec.record_residual = true;
    spec.residual_model = m;
    spec.stride = 2;  // residuals need every grid point
    CHECK_THROWS_AS(run_ensemble(*model, g, 8, 0, spec), std::invalid_argument);

    const EnsembleStats plain = [&] {
        RunSpec s;
        s.psi0 = plus();
        return run_ensemble(*model, g, 8, 0, s);
    }();
    CHECK_THROWS_AS(mean_eq_residual(plain, m), std::invalid_argument);
}

TEST_CASE("nonlinear ensembles carry unit weights") {
    const auto model = markovian_model(sx(), {sminus()});
    const TimeGrid g = make_grid(0.2, 0.01);
    RunSpec spec;
    spec.psi0 = ket1();
    spec.equation = Equation::nlsse;
    const EnsembleStats stats = run_ensemble(*model, g, 128, 9, spec);
    for (Eigen::Index k = 0; k < stats.mean_weight.size(); ++k)
        CHECK(stats.mean_weight(k) == doctest::Approx(1.0).epsilon(1e-12));
}
