#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qpol/errors.hpp"
#include "qpol/spectral.hpp"

using namespace qpol;

namespace {

const double kPi2 = M_PI * M_PI;

Spectrum small_free_spectrum(int n = 1999, int K = 8) {
    auto grid = SpatialGrid::uniform(n);
    return compute_spectrum(grid, zero_potential(grid), K);
}

}  // namespace

TEST_CASE("free spectrum matches k^2 pi^2") {
    auto grid = SpatialGrid::uniform(1999);
    Spectrum spec = compute_spectrum(grid, zero_potential(grid), 5);
    for (int k = 1; k <= 5; ++k) {
        const double exact = k * k * kPi2;
        CHECK(std::abs(spec.lambda(k) - exact) / exact < 1e-5);
    }
}

TEST_CASE("constant potential shifts the spectrum rigidly") {
    auto grid = SpatialGrid::uniform(499);
    const double c = 7.5;
    Spectrum base = compute_spectrum(grid, zero_potential(grid), 8);
    PotentialFn shifted = make_potential(grid, "zero");
    for (auto& v : shifted.samples) v = c;
    Spectrum spec = compute_spectrum(grid, shifted, 8);
    for (int k = 1; k <= 8; ++k)
        CHECK(std::abs(spec.lambda(k) - base.lambda(k) - c) < 1e-9 * spec.lambda(k));
}

TEST_CASE("linear potential matches the shooting oracle") {
    auto grid = SpatialGrid::uniform(1999);
    Spectrum spec = compute_spectrum(grid, make_potential(grid, "linear 10"), 8);

    // frozen oracle values, shooting/bisection at n = 20000 for V(x) = 10 x
    const double frozen[8] = {14.760099270676559, 44.510924333701347, 93.845926037995042,
                              162.92560983144554, 251.7480402124279,  360.3113744345726,
                              488.61478993300238, 636.65790157362437};
    for (int k = 1; k <= 8; ++k) {
        const double oracle =
            oracles::shooting_eigenvalue([](double x) { return 10.0 * x; }, k);
        CHECK(std::abs(oracle - frozen[k - 1]) < 1e-6 * frozen[k - 1]);
        CHECK(std::abs(spec.lambda(k) - oracle) / oracle < 1e-4);
    }
}

TEST_CASE("truncation and input guards") {
    auto grid = SpatialGrid::uniform(199);
    CHECK_THROWS_AS(compute_spectrum(grid, zero_potential(grid), 20), PreconditionError);
    PotentialFn bad = zero_potential(grid);
    bad.samples[7] = std::nan("");
    CHECK_THROWS_AS(compute_spectrum(grid, bad, 5), PreconditionError);
    PotentialFn wrong_grid{std::vector<double>(53, 0.0)};
    CHECK_THROWS_AS(compute_spectrum(grid, wrong_grid, 5), PreconditionError);
}

TEST_CASE("orthonormality, sign convention and Rayleigh quotients") {
    auto grid = SpatialGrid::uniform(1201);
    PotentialFn V = make_potential(grid, "gauss 30,0.4,0.12");
    Spectrum spec = compute_spectrum(grid, V, 12);

    double defect = 0.0;
    for (int j = 1; j <= 12; ++j)
        for (int k = 1; k <= 12; ++k) {
            const double ip = inner(grid, spec.phi(j), spec.phi(k));
            defect = std::max(defect, std::abs(ip - (j == k ? 1.0 : 0.0)));
        }
    CHECK(defect < 1e-10);

    for (int k = 1; k <= 12; ++k) {
        // first non-negligible value positive
        int j0 = 0;
        while (std::abs(spec.eigenfunctions(j0, k - 1)) <
               1e-12 * spec.eigenfunctions.col(k - 1).cwiseAbs().maxCoeff())
            ++j0;
        CHECK(spec.eigenfunctions(j0, k - 1) > 0.0);

        const double rayleigh = inner(grid, spec.phi(k), apply_operator(grid, V, spec.phi(k)));
        CHECK(std::abs(rayleigh - spec.lambda(k)) / spec.lambda(k) < 1e-8);
    }
}

TEST_CASE("spectral asymptotics stay near k^2 pi^2 + mean(V)") {
    auto grid = SpatialGrid::uniform(1999);
    PotentialFn V = make_potential(grid, "linear 5");
    Spectrum spec = compute_spectrum(grid, V, 20);
    const double mean = trapz(grid, V.samples);
    for (int k = 1; k <= 20; ++k)
        CHECK(std::abs(spec.lambda(k) - k * k * kPi2 - mean) < 2.0);
}

TEST_CASE("projection onto eigenfunctions") {
    Spectrum spec = small_free_spectrum();
    const auto& grid = spec.grid;

    ModalState c3 = project(spec.phi(3).cast<Complex>(), spec);
    for (int k = 1; k <= spec.k_max; ++k)
        CHECK(std::abs(c3.coeffs(k - 1) - (k == 3 ? 1.0 : 0.0)) < 1e-10);

    Eigen::VectorXcd mix = ((spec.phi(1) + spec.phi(2)) / std::sqrt(2.0)).cast<Complex>();
    ModalState cm = project(mix, spec);
    CHECK(std::abs(cm.coeffs(0) - 1.0 / std::sqrt(2.0)) < 1e-10);
    CHECK(std::abs(cm.coeffs(1) - 1.0 / std::sqrt(2.0)) < 1e-10);

    // sqrt(2) sin(2 pi x) is the second eigenfunction of the free operator
    Eigen::VectorXcd sine(grid.n_interior);
    for (int j = 0; j < grid.n_interior; ++j)
        sine(j) = std::sqrt(2.0) * std::sin(2.0 * M_PI * grid.nodes[j]);
    ModalState cs = project(sine, spec);
    CHECK(std::abs(cs.coeffs(1) - 1.0) < 1e-8);
    for (int k = 1; k <= spec.k_max; ++k)
        if (k != 2) CHECK(std::abs(cs.coeffs(k - 1)) < 1e-8);
}

TEST_CASE("project/synthesize roundtrip on the span") {
    auto grid = SpatialGrid::uniform(1201);
    Spectrum spec = compute_spectrum(grid, make_potential(grid, "linear 3"), 10);
    Eigen::VectorXcd coeffs(10);
    for (int k = 0; k < 10; ++k) coeffs(k) = Complex(std::cos(1.0 + k), std::sin(2.0 - k)) / 4.0;
    ModalState s;
    s.coeffs = coeffs / coeffs.norm();
    s.spectrum_id = spec.id;
    ModalState round = project(synthesize(s, spec), spec);
    CHECK((round.coeffs - s.coeffs).norm() < 1e-9);
}

TEST_CASE("sobolev norm uses k^s weights") {
    Spectrum spec = small_free_spectrum(499, 6);
    ModalState e1 = ModalState::basis(1, 6, spec);
    CHECK(sobolev_norm(e1, 0.0) == doctest::Approx(1.0));
    CHECK(sobolev_norm(e1, 5.0) == doctest::Approx(1.0));

    ModalState e3 = ModalState::basis(3, 6, spec);
    CHECK(sobolev_norm(e3, 2.0) == doctest::Approx(9.0));

    ModalState mix = e1;
    mix.coeffs(0) = 1.0 / std::sqrt(2.0);
    mix.coeffs(1) = 1.0 / std::sqrt(2.0);
    CHECK(sobolev_norm(mix, 3.0) == doctest::Approx(std::sqrt(32.5)));
}

TEST_CASE("coupling matrix: identity weight, closed forms, parity zeros") {
    Spectrum spec = small_free_spectrum(1999, 6);
    const auto& grid = spec.grid;

    PotentialFn one{std::vector<double>(grid.n_interior, 1.0)};
    Eigen::MatrixXd I6 = coupling_matrix(one, spec);
    CHECK((I6 - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);

    PotentialFn mu = make_potential(grid, "linear 1");
    Eigen::MatrixXd B = coupling_matrix(mu, spec);
    CHECK((B - B.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    // B_11 = int 2x sin^2(pi x) = 1/2
    CHECK(std::abs(B(0, 0) - 0.5) < 1e-8);

    for (int k = 2; k <= 6; ++k) {
        const double oracle = oracles::simpson(
            [k](double x) { return 2.0 * x * std::sin(M_PI * x) * std::sin(k * M_PI * x); });
        CHECK(std::abs(B(0, k - 1) - oracle) < 1e-8);
        if (k % 2 == 0) {
            // closed form -8k / ((k^2-1)^2 pi^2); k^3 |B_1k| stays in a band
            const double closed = -8.0 * k / ((k * k - 1.0) * (k * k - 1.0) * kPi2);
            CHECK(std::abs(B(0, k - 1) - closed) < 1e-8);
            const double mk = std::pow(k, 3.0) * std::abs(B(0, k - 1));
            CHECK(mk > 0.5);   // limit 8/pi^2 ~ 0.81, largest value 1.44 at k=2
            CHECK(mk < 1.5);
        } else {
            // x - 1/2 is odd about the midpoint: parity zero up to roundoff
            CHECK(std::abs(B(0, k - 1)) < 1e-11);
        }
    }
}

TEST_CASE("parallel coupling assembly agrees with the serial reference") {
    auto grid = SpatialGrid::uniform(801);
    Spectrum spec = compute_spectrum(grid, make_potential(grid, "linear 4"), 14);
    PotentialFn mu = make_potential(grid, "quadratic 1");
    Eigen::MatrixXd par = coupling_matrix(mu, spec);
    Eigen::MatrixXd ser = reference::coupling_matrix(mu, spec);
    CHECK((par - ser).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("eigenstate trajectory carries the free phase") {
    Spectrum spec = small_free_spectrum(499, 4);
    const double t = 0.37;
    ModalState traj = eigenstate_trajectory(spec, 3, t);
    CHECK(std::abs(traj.coeffs(2) - std::exp(Complex(0, -spec.lambda(3) * t))) < 1e-14);
    CHECK(std::abs(traj.coeffs(0)) == 0.0);
}
