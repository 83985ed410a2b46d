#include "qpol/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qpol/errors.hpp"

namespace qpol {

namespace {

bool witness_less(const GapWitness& a, const GapWitness& b) {
    if (a.gap != b.gap) return a.gap < b.gap;
    if (a.j != b.j) return a.j < b.j;
    if (a.p != b.p) return a.p < b.p;
    return a.q < b.q;
}

// Scan of one j-slice; shared by the parallel scan and the brute force.
void scan_slice(const Eigen::VectorXd& lambda, int j, double floor_abs,
                C2Exclusion exclusion, GapWitness& best, std::vector<GapWitness>& violations) {
    const int K = static_cast<int>(lambda.size());
    const double target = lambda(0) - lambda(j - 1);
    for (int p = 1; p <= K; ++p) {
        for (int q = 1; q <= K; ++q) {
            if (exclusion == C2Exclusion::TautologyOnly && p == 1 && q == j) continue;
            const double gap = std::abs(target - (lambda(p - 1) - lambda(q - 1)));
            GapWitness w{j, p, q, gap};
            if (witness_less(w, best)) best = w;
            if (gap < floor_abs) violations.push_back(w);
        }
    }
}

double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    // least-squares slope of log(y) vs log(x)
    const int n = static_cast<int>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return (n * sxy - sx * sy) / denom;
}

}  // namespace

C1Result check_C1(const SystemParams& p, double floor) {
    C1Result r;
    r.min_coupling = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= p.k_max(); ++k) {
        const double c = std::abs(p.coupling1(0, k - 1));
        if (c < r.min_coupling) {
            r.min_coupling = c;
            r.argmin_k = k;
        }
    }
    r.passed = r.min_coupling > floor;
    return r;
}

C2Result check_C2(const Spectrum& spec, double gap_floor_rel, C2Exclusion exclusion) {
    const int K = spec.k_max;
    if (K < 2) throw PreconditionError("check_C2: needs k_max >= 2");
    const Eigen::VectorXd& lambda = spec.eigenvalues;

    C2Result r;
    r.floor_abs = gap_floor_rel * std::abs(lambda(0));

    std::vector<GapWitness> best_per_j(K + 1);
    std::vector<std::vector<GapWitness>> violations_per_j(K + 1);
    for (auto& b : best_per_j) b.gap = std::numeric_limits<double>::infinity();

#pragma omp parallel for schedule(dynamic)
    for (int j = 2; j <= K; ++j)
        scan_slice(lambda, j, r.floor_abs, exclusion, best_per_j[j], violations_per_j[j]);

    // combine in j-order so the result is independent of scheduling
    r.witness.gap = std::numeric_limits<double>::infinity();
    for (int j = 2; j <= K; ++j) {
        if (witness_less(best_per_j[j], r.witness)) r.witness = best_per_j[j];
        r.violations.insert(r.violations.end(), violations_per_j[j].begin(),
                            violations_per_j[j].end());
    }
    r.min_gap = r.witness.gap;
    r.passed = r.min_gap > r.floor_abs;
    return r;
}

C3Result check_C3(const SystemParams& p) {
    const int K = p.k_max();
    if (K < 5) throw PreconditionError("check_C3: needs k_max >= 5");

    C3Result r;
    r.min_mk = std::numeric_limits<double>::infinity();
    std::vector<double> mk(K);
    for (int k = 1; k <= K; ++k) {
        mk[k - 1] = std::pow(static_cast<double>(k), 3.0) * std::abs(p.coupling1(0, k - 1));
        if (mk[k - 1] < r.min_mk) r.min_mk = mk[k - 1];
        if (mk[k - 1] <= 1e-10 && !r.zero_witness) r.zero_witness = k;
    }
    if (r.min_mk <= 1e-10) {
        r.passed = false;
        r.slope = -std::numeric_limits<double>::infinity();
        return r;
    }
    std::vector<double> xs, ys;
    for (int k = (K + 1) / 2; k <= K; ++k) {
        xs.push_back(static_cast<double>(k));
        ys.push_back(mk[k - 1]);
    }
    r.slope = fit_loglog_slope(xs, ys);
    r.passed = r.slope > -0.5;
    return r;
}

ConditionReport check_conditions(const SystemParams& p) {
    ConditionReport rep;
    rep.k_max = p.k_max();
    rep.c1 = check_C1(p);
    rep.c2 = check_C2(p.spectrum);
    rep.c3 = check_C3(p);
    return rep;
}

ConditionReport check_shifted(const SystemParams& p) {
    ConditionReport rep = check_conditions(shift_params(p));
    rep.shifted = true;
    return rep;
}

namespace reference {

C2Result check_C2_bruteforce(const Spectrum& spec, double gap_floor_rel, C2Exclusion exclusion) {
    const int K = spec.k_max;
    if (K < 2) throw PreconditionError("check_C2_bruteforce: needs k_max >= 2");
    const Eigen::VectorXd& lambda = spec.eigenvalues;

    C2Result r;
    r.floor_abs = gap_floor_rel * std::abs(lambda(0));
    r.witness.gap = std::numeric_limits<double>::infinity();
    for (int j = 2; j <= K; ++j) {
        for (int p = 1; p <= K; ++p) {
            for (int q = 1; q <= K; ++q) {
                if (exclusion == C2Exclusion::TautologyOnly && p == 1 && q == j) continue;
                const double gap =
                    std::abs((lambda(0) - lambda(j - 1)) - (lambda(p - 1) - lambda(q - 1)));
                GapWitness w{j, p, q, gap};
                if (witness_less(w, r.witness)) r.witness = w;
                if (gap < r.floor_abs) r.violations.push_back(w);
            }
        }
    }
    r.min_gap = r.witness.gap;
    r.passed = r.min_gap > r.floor_abs;
    return r;
}

}  // namespace reference

}  // namespace qpol
