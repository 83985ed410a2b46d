// Dirichlet Sturm-Liouville spectra of A_V = -d^2/dx^2 + V on (0,1):
// second-order finite differences on a uniform grid, symmetric tridiagonal
// eigensolver, eigenbasis projections, modal Sobolev norms and coupling
// matrices.
#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "qpol/grid.hpp"

namespace qpol {

// Truncated eigen-decomposition of A_V. Eigenvalues ascend strictly;
// eigenfunctions are L2-normalized w.r.t. the trapezoid rule and carry the
// sign convention that the first nonzero grid value is positive, which
// pins the phase so coupling matrices are reproducible across runs.
struct Spectrum {
    int k_max = 0;
    SpatialGrid grid;
    Eigen::VectorXd eigenvalues;       // lambda_1 < ... < lambda_K
    Eigen::MatrixXd eigenfunctions;    // n_interior x k_max, column k-1 is phi_k
    std::vector<double> potential;     // samples of V used
    std::uint64_t id = 0;              // tag derived from (n, K, V)

    double lambda(int k) const { return eigenvalues(k - 1); }                 // 1-based
    Eigen::VectorXd phi(int k) const { return eigenfunctions.col(k - 1); }    // 1-based
};

// A state as complex coefficients in a Spectrum's eigenbasis.
struct ModalState {
    Eigen::VectorXcd coeffs;
    std::uint64_t spectrum_id = 0;

    double norm() const { return coeffs.norm(); }
    int modes() const { return static_cast<int>(coeffs.size()); }

    static ModalState basis(int k, int k_max, const Spectrum& spec);
};

void require_same_basis(const ModalState& state, const Spectrum& spec);
void require_unit(const ModalState& state, double tol = 1e-8);

// Lowest k_max eigenpairs of the finite-difference matrix
// tridiag(-1/h^2, 2/h^2 + V_j, -1/h^2). Enforces k_max <= n_interior/10.
Spectrum compute_spectrum(const SpatialGrid& grid, const PotentialFn& V, int k_max);

// c_k = <psi, phi_k> by trapezoid quadrature.
ModalState project(const Eigen::VectorXcd& state_on_grid, const Spectrum& spec);

// sum_k c_k phi_k on the grid.
Eigen::VectorXcd synthesize(const ModalState& state, const Spectrum& spec);

// Modal Sobolev norm (sum_k |k^s c_k|^2)^(1/2). Note: this is the k^s-weighted
// norm, not lambda_k^(s/2); the two are equivalent as norms but numerically
// different. The k^s form is implemented here; the tail beyond k_max is
// truncated, not estimated.
double sobolev_norm(const ModalState& state, double s);

// B_jk = <mu phi_j, phi_k>, symmetric by construction. OpenMP-parallel over
// entries; see qpol::reference for the serial version used in tests.
Eigen::MatrixXd coupling_matrix(const PotentialFn& mu, const Spectrum& spec);

// The eigenstate trajectory Phi_k(t) = e^{-i lambda_k t} phi_k, as modal
// coefficients.
ModalState eigenstate_trajectory(const Spectrum& spec, int k, double t);

// Apply the finite-difference operator A_V to a grid function (used by the
// Rayleigh-quotient consistency checks).
Eigen::VectorXd apply_operator(const SpatialGrid& grid, const PotentialFn& V,
                               const Eigen::VectorXd& f);

namespace reference {
// Serial reference implementation kept for testing and benchmarking.
Eigen::MatrixXd coupling_matrix(const PotentialFn& mu, const Spectrum& spec);
}  // namespace reference

}  // namespace qpol
