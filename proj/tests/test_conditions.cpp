#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qpol/conditions.hpp"
#include "qpol/errors.hpp"

using namespace qpol;

namespace {

SystemParams params_for(const std::string& V, const std::string& mu1, const std::string& mu2,
                        int K, int n = 1201) {
    auto grid = SpatialGrid::uniform(n);
    return make_system_params(grid, make_potential(grid, V), make_potential(grid, mu1),
                              make_potential(grid, mu2), K);
}

}  // namespace

TEST_CASE("C1: zero dipole fails, identity weight fails beyond k=1") {
    SystemParams zero_mu = params_for("linear 5", "zero", "zero", 8);
    C1Result r = check_C1(zero_mu);
    CHECK_FALSE(r.passed);
    CHECK(r.min_coupling == 0.0);

    // mu1 = 1: couplings vanish for k >= 2 by orthonormality
    auto grid = SpatialGrid::uniform(1201);
    PotentialFn one{std::vector<double>(grid.n_interior, 1.0)};
    SystemParams unit = make_system_params(grid, make_potential(grid, "linear 5"), one,
                                           make_potential(grid, "zero"), 8);
    C1Result r1 = check_C1(unit);
    CHECK_FALSE(r1.passed);
    CHECK(r1.argmin_k > 1);
}

TEST_CASE("C1 with V=0 and mu1=x fails on the odd-k parity zeros") {
    // The 1 <-> k couplings of x vanish exactly for odd k >= 3 when V = 0
    // (x - 1/2 is odd about the midpoint), so (C1) cannot hold there; the
    // even-k couplings agree with the quadrature oracle.
    SystemParams p = params_for("zero", "linear 1", "zero", 8, 1999);
    C1Result r = check_C1(p);
    CHECK_FALSE(r.passed);
    CHECK(r.argmin_k % 2 == 1);
    CHECK(r.min_coupling < 1e-11);
    for (int k = 2; k <= 8; k += 2) {
        const double oracle = oracles::simpson(
            [k](double x) { return 2.0 * x * std::sin(M_PI * x) * std::sin(k * M_PI * x); });
        CHECK(std::abs(p.coupling1(0, k - 1) - oracle) < 1e-8);
    }
}

TEST_CASE("C1 passes when the potential breaks the parity") {
    SystemParams p = params_for("linear 5", "linear 1", "zero", 12, 1999);
    C1Result r = check_C1(p);
    CHECK(r.passed);
    CHECK(r.min_coupling > 1e-6);
}

TEST_CASE("C2 fails for the free spectrum with the integer resonances") {
    auto grid = SpatialGrid::uniform(39999);
    Spectrum spec = compute_spectrum(grid, zero_potential(grid), 8);
    C2Result r = check_C2(spec);
    CHECK_FALSE(r.passed);
    // lambda_1 - lambda_4 = lambda_7 - lambda_8 (1 - 16 = 49 - 64 = -15 in
    // units of pi^2) must be among the reported violations
    bool found478 = false;
    for (const auto& w : r.violations)
        if (w.j == 4 && w.p == 7 && w.q == 8) found478 = true;
    CHECK(found478);
}

TEST_CASE("C2 passes for a slanted potential at moderate truncation") {
    SystemParams p = params_for("linear 5", "linear 1", "zero", 12, 1999);
    C2Result r = check_C2(p.spectrum);
    CHECK(r.passed);
    CHECK(r.min_gap > r.floor_abs);
}

TEST_CASE("C2 matches the brute-force enumeration exactly") {
    for (const char* pot : {"linear 5", "gauss 12,0.35,0.1", "zero"}) {
        auto grid = SpatialGrid::uniform(801);
        Spectrum spec = compute_spectrum(grid, make_potential(grid, pot), 8);
        C2Result fast = check_C2(spec);
        C2Result brute = reference::check_C2_bruteforce(spec);
        CHECK(fast.min_gap == brute.min_gap);
        CHECK(fast.witness.j == brute.witness.j);
        CHECK(fast.witness.p == brute.witness.p);
        CHECK(fast.witness.q == brute.witness.q);
        CHECK(fast.violations.size() == brute.violations.size());
        CHECK(fast.passed == brute.passed);
    }
}

TEST_CASE("C2 at K=2 is hand-enumerable") {
    auto grid = SpatialGrid::uniform(801);
    Spectrum spec = compute_spectrum(grid, make_potential(grid, "linear 3"), 2);
    C2Result r = check_C2(spec);
    // j=2; (p,q) in {1,2}^2 minus the tautology (1,2):
    // candidates (1,1): |l1-l2|, (2,1): 2|l1-l2|, (2,2): |l1-l2|
    const double gap12 = spec.lambda(2) - spec.lambda(1);
    CHECK(r.min_gap == doctest::Approx(gap12).epsilon(1e-12));
    CHECK(r.passed);
    C2Result brute = reference::check_C2_bruteforce(spec);
    CHECK(r.min_gap == brute.min_gap);
    CHECK(r.witness.j == brute.witness.j);
}

TEST_CASE("C2 exclusion flag: scanning everything reports the tautology") {
    auto grid = SpatialGrid::uniform(801);
    Spectrum spec = compute_spectrum(grid, make_potential(grid, "linear 3"), 6);
    C2Result all = check_C2(spec, 1e-6, C2Exclusion::None);
    CHECK_FALSE(all.passed);
    CHECK(all.min_gap == 0.0);
    CHECK(all.witness.p == 1);
    CHECK(all.witness.q == all.witness.j);
}

TEST_CASE("C3: zero dipole fails; slanted potential passes; parity class fails") {
    CHECK_FALSE(check_C3(params_for("linear 5", "zero", "zero", 8)).passed);

    SystemParams good = params_for("linear 5", "linear 1", "zero", 12, 1999);
    C3Result r = check_C3(good);
    CHECK(r.passed);
    CHECK(r.min_mk > 1e-10);
    CHECK(r.slope > -0.5);

    // mu1 = x^2 - x is even about the midpoint: couplings to even k vanish
    auto grid = SpatialGrid::uniform(1201);
    PotentialFn mu;
    mu.samples.resize(grid.n_interior);
    for (int j = 0; j < grid.n_interior; ++j)
        mu.samples[j] = grid.nodes[j] * grid.nodes[j] - grid.nodes[j];
    SystemParams parity = make_system_params(grid, zero_potential(grid), mu,
                                             make_potential(grid, "zero"), 8);
    C3Result rp = check_C3(parity);
    CHECK_FALSE(rp.passed);
    REQUIRE(rp.zero_witness.has_value());
    CHECK(*rp.zero_witness % 2 == 0);
    // the quadrature oracle confirms the parity zero
    const int kz = *rp.zero_witness;
    const double oracle = oracles::simpson([kz](double x) {
        return 2.0 * (x * x - x) * std::sin(M_PI * x) * std::sin(kz * M_PI * x);
    });
    CHECK(std::abs(oracle) < 1e-12);
}

TEST_CASE("C3 for V=0, mu1=x reports the odd-k zeros instead of passing") {
    SystemParams p = params_for("zero", "linear 1", "zero", 8, 1999);
    C3Result r = check_C3(p);
    CHECK_FALSE(r.passed);
    REQUIRE(r.zero_witness.has_value());
    CHECK(*r.zero_witness % 2 == 1);
    // over even k the normalized couplings do approach the classical 8/pi^2
    for (int k = 4; k <= 8; k += 2) {
        const double mk = std::pow(k, 3.0) * std::abs(p.coupling1(0, k - 1));
        CHECK(mk > 0.5);
        CHECK(mk < 1.5);
    }
}

TEST_CASE("shifted checks reduce to plain checks when mu1 = mu2 = 0") {
    SystemParams p = params_for("linear 5", "zero", "zero", 8);
    ConditionReport direct = check_conditions(p);
    ConditionReport shifted = check_shifted(p);
    CHECK(shifted.shifted);
    CHECK(shifted.c2.min_gap == doctest::Approx(direct.c2.min_gap).epsilon(1e-12));
    CHECK_FALSE(shifted.c3.passed);  // zero effective dipole
}

TEST_CASE("the mu2 = -(mu1+mu)/4 construction lands on W+mu with dipole -mu") {
    auto grid = SpatialGrid::uniform(801);
    PotentialFn V = make_potential(grid, "linear 5");
    PotentialFn mu1 = make_potential(grid, "linear 1");
    PotentialFn mu = make_potential(grid, "gauss 2,0.6,0.2");
    PotentialFn mu2 = linear_combination({{-0.25, &mu1}, {-0.25, &mu}});

    SystemParams p = make_system_params(grid, V, mu1, mu2, 8);
    SystemParams s = shift_params(p);

    // V - 2 mu1 - 4 mu2 = (V - mu1) + mu sample-wise
    for (int j = 0; j < grid.n_interior; ++j) {
        const double w_plus_mu = V.samples[j] - mu1.samples[j] + mu.samples[j];
        CHECK(s.V.samples[j] == doctest::Approx(w_plus_mu).epsilon(1e-14));
        CHECK(s.mu1.samples[j] == doctest::Approx(-mu.samples[j]).epsilon(1e-14));
    }
}

TEST_CASE("report statistics are finite and flags consistent") {
    SystemParams p = params_for("linear 5", "linear 1", "quadratic 1", 12, 1999);
    ConditionReport rep = check_conditions(p);
    CHECK(rep.k_max == 12);
    CHECK(std::isfinite(rep.c1.min_coupling));
    CHECK(std::isfinite(rep.c2.min_gap));
    CHECK(std::isfinite(rep.c3.min_mk));
    CHECK(rep.c1.passed == (rep.c1.min_coupling > 1e-12));
    CHECK(rep.c2.passed == (rep.c2.min_gap > rep.c2.floor_abs));

    ConditionReport srep = check_shifted(p);
    CHECK(srep.shifted);
    CHECK(std::isfinite(srep.c2.min_gap));
}
