// Numerical audit of the spectral hypotheses (C1)/(C2)/(C3) and their
// shifted variants (C2')/(C3') at finite truncation. All statistics use
// absolute values, so they are invariant under eigenfunction sign flips,
// and every report is labeled with the truncation it was computed at:
// nothing here certifies the infinite-k conditions.
#pragma once

#include <optional>
#include <vector>

#include "qpol/dynamics.hpp"
#include "qpol/spectral.hpp"

namespace qpol {

struct GapWitness {
    int j = 0, p = 0, q = 0;  // 1-based mode indices
    double gap = 0.0;          // |(lambda_1 - lambda_j) - (lambda_p - lambda_q)|
};

// Which (j,p,q) triples are excluded from the C2 scan. The paper's
// quantifier taken literally includes the tautology (p,q) = (1,j); the
// default skips exactly that and nothing else.
enum class C2Exclusion { TautologyOnly, None };

struct C1Result {
    bool passed = false;
    double min_coupling = 0.0;  // min_k |B1[1,k]|
    int argmin_k = 0;
};

struct C2Result {
    bool passed = false;
    double min_gap = 0.0;
    GapWitness witness;                 // the minimizing triple
    std::vector<GapWitness> violations; // every triple with gap below the floor
    double floor_abs = 0.0;             // the absolute floor used (rel * lambda_1)
};

struct C3Result {
    bool passed = false;
    double min_mk = 0.0;   // min_k k^3 |B1[1,k]|
    double slope = 0.0;    // log-log trend of m_k over k in [K/2, K]
    std::optional<int> zero_witness;  // a k with an (effectively) vanishing coupling
};

struct ConditionReport {
    int k_max = 0;
    C1Result c1;
    C2Result c2;
    C3Result c3;
    bool shifted = false;  // set when the report describes (C2')/(C3')
};

// (C1): min_{k<=K} |<mu1 phi_1, phi_k>| > floor.
C1Result check_C1(const SystemParams& p, double floor = 1e-12);

// (C2): scan all j,p,q <= K with j != 1, excluding (p,q) = (1,j); passes iff
// the minimal gap exceeds gap_floor_rel * lambda_1. OpenMP-parallel over j
// with a deterministic lexicographic reduction.
C2Result check_C2(const Spectrum& spec, double gap_floor_rel = 1e-6,
                  C2Exclusion exclusion = C2Exclusion::TautologyOnly);

// (C3): m_k = k^3 |B1[1,k]| must stay above 1e-10 and must not decay faster
// than would be visible as a log-log slope < -0.5 over k in [K/2, K].
C3Result check_C3(const SystemParams& p);

ConditionReport check_conditions(const SystemParams& p);

// (C2')/(C3'): the same checks on shift_params(p), the numerical surrogate
// for membership of mu2 in the residual set Q_{V,mu1}.
ConditionReport check_shifted(const SystemParams& p);

namespace reference {
// Exhaustive triple loop, kept independent of the parallel scan.
C2Result check_C2_bruteforce(const Spectrum& spec, double gap_floor_rel = 1e-6,
                             C2Exclusion exclusion = C2Exclusion::TautologyOnly);
}  // namespace reference

}  // namespace qpol
