#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qpol/errors.hpp"
#include "qpol/moments.hpp"

using namespace qpol;

namespace {

SystemParams slanted_params(int K = 12, int n = 1201) {
    auto grid = SpatialGrid::uniform(n);
    return make_system_params(grid, make_potential(grid, "linear 5"),
                              make_potential(grid, "linear 1"),
                              make_potential(grid, "quadratic 1"), K);
}

// A horizon with e^{-i lambda_1 T} = 1, where the plain and frame H
// conventions coincide (the local frame time of the composition proofs).
double frame_time(const SystemParams& p, int m = 2) {
    return 2.0 * M_PI * m / p.spectrum.lambda(1);
}

ModalState state_from(const SystemParams& p, const Eigen::VectorXcd& coeffs) {
    ModalState s;
    s.coeffs = coeffs;
    s.spectrum_id = p.spectrum.id;
    return s;
}

// independent re-evaluation of every moment equation from the sampled w
double max_residual_by_quadrature(const MomentProblem& mp, const MomentSolution& sol) {
    double worst = std::abs(oracles::trapz_moment(sol.w, mp.T, [](double) { return 1.0; }) -
                            mp.rhs_dc.real());
    worst = std::max(
        worst, std::abs(oracles::trapz_moment(sol.w, mp.T,
                                              [&](double t) { return mp.T - t; }) -
                        mp.rhs_ramp));
    for (int i = 0; i < mp.frequencies.size(); ++i) {
        const double om = mp.frequencies(i);
        const double re =
            oracles::trapz_moment(sol.w, mp.T, [&](double t) { return std::cos(om * t); });
        const double im =
            oracles::trapz_moment(sol.w, mp.T, [&](double t) { return std::sin(om * t); });
        worst = std::max(worst, std::abs(re - mp.rhs_osc(i).real()));
        worst = std::max(worst, std::abs(im - mp.rhs_osc(i).imag()));
    }
    return worst;
}

}  // namespace

TEST_CASE("project_H zeroes exactly the real part of c_1") {
    SystemParams p = slanted_params(4, 401);
    ModalState s = state_from(p, Eigen::Vector4cd(Complex(1, 2), Complex(0.5, 0), 0.0, 1.0));
    ModalState h = project_H(s);
    CHECK(h.coeffs(0) == Complex(0, 2));
    CHECK(h.coeffs(1) == s.coeffs(1));
    CHECK(h.coeffs(3) == s.coeffs(3));
    ModalState hh = project_H(h);
    CHECK(hh.coeffs == h.coeffs);

    ModalState z = state_from(p, Eigen::Vector4cd(0.0, 1.0, 0.0, 0.0));
    CHECK(project_H(z).coeffs == z.coeffs);
}

TEST_CASE("frame projection zeroes the real part of the Phi_1(T) pairing") {
    SystemParams p = slanted_params(4, 401);
    const double T = 0.83;
    ModalState s = state_from(p, Eigen::Vector4cd(Complex(0.4, -0.7), Complex(0.1, 0.2), 0.0, 0.5));
    ModalState h = project_H_frame(s, T, p.spectrum);
    const Complex rot = std::exp(Complex(0, p.spectrum.lambda(1) * T));
    CHECK(std::abs((rot * h.coeffs(0)).real()) < 1e-16);
    CHECK((rot * h.coeffs(0)).imag() == doctest::Approx((rot * s.coeffs(0)).imag()));
    CHECK(h.coeffs(1) == s.coeffs(1));
    CHECK(h.coeffs(3) == s.coeffs(3));
    // idempotent, and coincides with the plain projection at aligned T
    CHECK((project_H_frame(h, T, p.spectrum).coeffs - h.coeffs).norm() < 1e-16);
    const double aligned = 2.0 * M_PI / p.spectrum.lambda(1);
    ModalState ha = project_H_frame(s, aligned, p.spectrum);
    CHECK((ha.coeffs - project_H(s).coeffs).norm() < 1e-10);
}

TEST_CASE("moment targets for single-mode data") {
    SystemParams p = slanted_params();
    const double T = frame_time(p);
    const int K = p.k_max();

    // zero datum -> zero targets
    MomentProblem mp0 = build_moment_problem(
        state_from(p, Eigen::VectorXcd::Zero(K)), T, p);
    CHECK(mp0.rhs_ramp == 0.0);
    CHECK(mp0.rhs_osc.norm() == 0.0);
    CHECK(mp0.rhs_dc == Complex(0, 0));
    for (int i = 1; i < mp0.frequencies.size(); ++i)
        CHECK(mp0.frequencies(i) > mp0.frequencies(i - 1));

    // i eps Phi_1(T): purely a ramp target eps / B11
    const double eps = 1e-3;
    Eigen::VectorXcd c1 = Eigen::VectorXcd::Zero(K);
    c1(0) = Complex(0, eps) * std::exp(Complex(0, -p.spectrum.lambda(1) * T));
    MomentProblem mp1 = build_moment_problem(state_from(p, c1), T, p);
    CHECK(mp1.rhs_ramp == doctest::Approx(eps / p.coupling1(0, 0)).epsilon(1e-10));
    CHECK(mp1.rhs_osc.cwiseAbs().maxCoeff() < 1e-15);

    // eps Phi_2(T): only d_2 = (lambda_1 - lambda_2) eps / B12
    Eigen::VectorXcd c2 = Eigen::VectorXcd::Zero(K);
    c2(1) = eps * std::exp(Complex(0, -p.spectrum.lambda(2) * T));
    MomentProblem mp2 = build_moment_problem(state_from(p, c2), T, p);
    const Complex d2 = mp2.rhs_osc(0);
    const double expected =
        (p.spectrum.lambda(1) - p.spectrum.lambda(2)) * eps / p.coupling1(0, 1);
    CHECK(std::abs(d2 - expected) < 1e-12 * std::abs(expected));
    CHECK(std::abs(mp2.rhs_ramp) < 1e-15);
    for (int i = 1; i < mp2.rhs_osc.size(); ++i) CHECK(std::abs(mp2.rhs_osc(i)) < 1e-15);
}

TEST_CASE("build rejects data outside H and C1 failures") {
    SystemParams p = slanted_params(6, 801);
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(6);
    c(0) = Complex(0.3, 0.1);
    CHECK_THROWS_AS(build_moment_problem(state_from(p, c), 1.0, p), PreconditionError);

    auto grid = SpatialGrid::uniform(801);
    SystemParams bad = make_system_params(grid, zero_potential(grid),
                                          make_potential(grid, "linear 1"),
                                          make_potential(grid, "zero"), 6);
    Eigen::VectorXcd ok = Eigen::VectorXcd::Zero(6);
    ok(1) = 0.01;
    // V = 0, mu1 = x has exact zero couplings at odd k: C1 failure
    CHECK_THROWS_AS(build_moment_problem(state_from(bad, ok), 1.0, bad), PreconditionError);
}

TEST_CASE("homogeneous moment problem returns the zero solution") {
    SystemParams p = slanted_params();
    MomentProblem mp = build_moment_problem(
        state_from(p, Eigen::VectorXcd::Zero(p.k_max())), 2.0, p);
    MomentSolution sol = solve_moment_problem(mp, 1 << 14);
    double wmax = 0.0;
    for (double w : sol.w) wmax = std::max(wmax, std::abs(w));
    CHECK(wmax < 1e-12);
    CHECK(sol.residuals.maxCoeff() < 1e-12);
}

TEST_CASE("single oscillatory target is hit within 1e-8 under quadrature") {
    SystemParams p = slanted_params();
    const double T = 2.0;
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(p.k_max());
    c(1) = Complex(0.01, -0.004) * std::exp(Complex(0, -p.spectrum.lambda(2) * T));
    c = project_H(state_from(p, c)).coeffs;
    MomentProblem mp = build_moment_problem(state_from(p, c), T, p);
    MomentSolution sol = solve_moment_problem(mp, 1 << 15);
    CHECK(sol.residuals.maxCoeff() < 1e-8);
    CHECK(max_residual_by_quadrature(mp, sol) < 1e-8);
}

TEST_CASE("solution map is linear in the targets") {
    SystemParams p = slanted_params(8, 801);
    const double T = 1.5;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    // an H^5-type datum: |c_k| decaying like k^-5, as the linearization
    // produces for regular states; mode 1 imaginary in the frame at T
    Eigen::VectorXcd c(8);
    c(0) = Complex(0, unif(rng)) * 0.01 * std::exp(Complex(0, -p.spectrum.lambda(1) * T));
    for (int k = 1; k < 8; ++k)
        c(k) = Complex(unif(rng), unif(rng)) * 0.01 * std::pow(k + 1.0, -5.0);

    MomentProblem mp = build_moment_problem(state_from(p, c), T, p);
    MomentProblem mp_scaled = build_moment_problem(state_from(p, (2.5 * c).eval()), T, p);
    MomentSolution sol = solve_moment_problem(mp, 1 << 14);
    MomentSolution sol_scaled = solve_moment_problem(mp_scaled, 1 << 14);
    double worst = 0.0;
    for (std::size_t j = 0; j < sol.w.size(); ++j)
        worst = std::max(worst, std::abs(sol_scaled.w[j] - 2.5 * sol.w[j]));
    CHECK(worst < 1e-9);
}

TEST_CASE("moment_control integrates w with exact grid endpoints") {
    MomentSolution zero;
    zero.T = 1.0;
    zero.w.assign(101, 0.0);
    zero.residuals = Eigen::VectorXd::Zero(4);
    ControlSignal v0 = moment_control(zero);
    CHECK(v0.max_abs() == 0.0);

    // w = sin(2 pi t / T): v = (T / 2 pi)(1 - cos(2 pi t / T))
    const double T = 2.0;
    const int n = 40000;
    MomentSolution s;
    s.T = T;
    s.residuals = Eigen::VectorXd::Zero(4);
    s.w.resize(n + 1);
    for (int j = 0; j <= n; ++j) s.w[j] = std::sin(2 * M_PI * j / n);
    ControlSignal v = moment_control(s);
    CHECK(v.values[0] == 0.0);
    CHECK(v.values[n] == 0.0);
    CHECK(v.regularity == ControlClass::H10);
    for (int j = 0; j <= n; j += n / 8) {
        const double t = T * j / n;
        const double exact = (T / (2 * M_PI)) * (1.0 - std::cos(2 * M_PI * t / T));
        CHECK(std::abs(v.values[j] - exact) < 1e-7);
    }

    // solved w: endpoint drift below 1e-7 before the linear correction
    SystemParams p = slanted_params();
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(p.k_max());
    c(2) = 0.02;
    MomentProblem mp = build_moment_problem(state_from(p, c), 1.0, p);
    MomentSolution sol = solve_moment_problem(mp, 1 << 15);
    double acc = 0.0;
    for (int j = 1; j < static_cast<int>(sol.w.size()); ++j)
        acc += 0.5 * (1.0 / (sol.w.size() - 1)) * (sol.w[j - 1] + sol.w[j]);
    CHECK(std::abs(acc) < 1e-7);
    ControlSignal vc = moment_control(sol);
    CHECK(vc.values.front() == 0.0);
    CHECK(vc.values.back() == 0.0);
}

TEST_CASE("linearized endpoint consistency of the full moment chain") {
    SystemParams p = slanted_params();
    const double T = 1.0;
    const int n_steps = 1 << 18;

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXcd c(p.k_max());
    // imaginary in the linearization frame (membership in H at horizon T)
    c(0) = Complex(0, 0.01 * unif(rng)) * std::exp(Complex(0, -p.spectrum.lambda(1) * T));
    for (int k = 1; k < p.k_max(); ++k)
        c(k) = 0.01 * std::pow(k + 1.0, -5.0) * Complex(unif(rng), unif(rng));
    ModalState psi_f = state_from(p, c);

    MomentProblem mp = build_moment_problem(psi_f, T, p);
    MomentSolution sol = solve_moment_problem(mp, n_steps);
    ControlSignal v = moment_control(sol);
    ModalState psi_out = linearized_propagate(v, p);

    // modes 2..K are reproduced; mode 1 keeps the imaginary frame part
    for (int k = 2; k <= p.k_max(); ++k)
        CHECK(std::abs(psi_out.coeffs(k - 1) - psi_f.coeffs(k - 1)) < 1e-5);
    const Complex frame_out =
        std::exp(Complex(0, p.spectrum.lambda(1) * T)) * psi_out.coeffs(0);
    const Complex frame_target =
        std::exp(Complex(0, p.spectrum.lambda(1) * T)) * psi_f.coeffs(0);
    CHECK(std::abs(frame_out.imag() - frame_target.imag()) < 1e-5);
    CHECK(std::abs(frame_out.real()) < 1e-5);
}

TEST_CASE("local exact control: the anchor target needs no control") {
    SystemParams p = slanted_params();
    const double T = 1.0;
    ModalState anchor = eigenstate_trajectory(p.spectrum, 1, T);
    std::vector<NewtonRecord> log;
    ControlSignal u = local_exact_control(anchor, T, p, 1e-9, {}, &log);
    CHECK(u.max_abs() == 0.0);
    CHECK(log.size() == 1);
    CHECK(log[0].defect_l2 < 1e-10);  // free-phase roundoff over ~1e4 steps
}

TEST_CASE("local exact control converges on a mode-2 perturbation") {
    SystemParams p = slanted_params();
    const double T = 1.0;
    Eigen::VectorXcd c = eigenstate_trajectory(p.spectrum, 1, T).coeffs;
    c(1) += 0.01 * std::exp(Complex(0, -p.spectrum.lambda(2) * T));
    c /= c.norm();
    ModalState target = state_from(p, c);

    NewtonOptions opts;
    opts.radius = 0.5;
    opts.n_steps = 1 << 15;
    std::vector<NewtonRecord> log;
    ControlSignal u = local_exact_control(target, T, p, 1e-6, opts, &log);

    ModalState reached = propagate(ModalState::basis(1, p.k_max(), p.spectrum), u, p);
    CHECK((reached.coeffs - target.coeffs).norm() < 1e-6);
    CHECK(static_cast<int>(log.size()) - 1 <= 10);
    CHECK(u.values.front() == 0.0);
    CHECK(u.values.back() == 0.0);
}

TEST_CASE("first Newton increment leaves a quadratically small defect") {
    // a dipole with strong couplings to every low mode, so that mode-3 data
    // stays well inside the linearization regime (mu1 = x couples to odd
    // modes only through the potential slant, weakly)
    auto grid = SpatialGrid::uniform(1201);
    SystemParams p = make_system_params(grid, make_potential(grid, "linear 5"),
                                        make_potential(grid, "gauss 1,0.35,0.12"),
                                        make_potential(grid, "quadratic 1"), 12);
    const double T = 1.0;
    NewtonOptions opts;
    // the mode-3 component carries weight 3^5 in the H^5 metric, so the
    // trust region is widened; locality is covered by the other tests
    opts.radius = 10.0;
    opts.n_steps = 1 << 15;
    opts.max_iterations = 12;

    std::vector<double> log_eps, log_d1;
    for (double eps : {5e-3, 2.5e-3, 1.25e-3, 6.25e-4}) {
        Eigen::VectorXcd c = eigenstate_trajectory(p.spectrum, 1, T).coeffs;
        c(1) += eps * std::exp(Complex(0, -p.spectrum.lambda(2) * T));
        c(2) += eps * std::exp(Complex(0, -p.spectrum.lambda(3) * T));
        c /= c.norm();
        std::vector<NewtonRecord> log;
        local_exact_control(state_from(p, c), T, p, 1e-7, opts, &log);
        REQUIRE(log.size() >= 2);
        log_eps.push_back(std::log(log[0].defect_l2));
        log_d1.push_back(std::log(log[1].defect_l2));
    }
    // slope of log d1 vs log d0 across the perturbation-size ladder
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(log_eps.size());
    for (int i = 0; i < n; ++i) {
        sx += log_eps[i];
        sy += log_d1[i];
        sxx += log_eps[i] * log_eps[i];
        sxy += log_eps[i] * log_d1[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope > 1.7);
    CHECK(slope < 2.3);
}

TEST_CASE("radius monotonicity along the geodesic toward the anchor") {
    SystemParams p = slanted_params();
    const double T = 1.0;
    NewtonOptions opts;
    opts.radius = 0.5;
    opts.n_steps = 1 << 14;

    Eigen::VectorXcd anchor = eigenstate_trajectory(p.spectrum, 1, T).coeffs;
    Eigen::VectorXcd full = anchor;
    full(1) += 0.01 * std::exp(Complex(0, -p.spectrum.lambda(2) * T));
    full /= full.norm();

    for (double s : {0.25, 0.5, 0.75, 1.0}) {
        Eigen::VectorXcd c = (1.0 - s) * anchor + s * full;
        c /= c.norm();
        std::vector<NewtonRecord> log;
        CHECK_NOTHROW(local_exact_control(state_from(p, c), T, p, 1e-6, opts, &log));
    }
}
