#include "qpol/spectral.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include <lapacke.h>

#include "qpol/errors.hpp"

namespace qpol {

namespace {

std::uint64_t spectrum_tag(const SpatialGrid& grid, const PotentialFn& V, int k_max) {
    std::uint64_t h = fnv1a(&grid.n_interior, sizeof(grid.n_interior));
    h = fnv1a(&k_max, sizeof(k_max), h);
    h = fnv1a(V.samples.data(), V.samples.size() * sizeof(double), h);
    return h;
}

}  // namespace

ModalState ModalState::basis(int k, int k_max, const Spectrum& spec) {
    if (k < 1 || k > k_max) throw PreconditionError("ModalState::basis: k out of range");
    ModalState s;
    s.coeffs = Eigen::VectorXcd::Zero(k_max);
    s.coeffs(k - 1) = 1.0;
    s.spectrum_id = spec.id;
    return s;
}

void require_same_basis(const ModalState& state, const Spectrum& spec) {
    if (state.spectrum_id != spec.id || state.modes() != spec.k_max)
        throw PreconditionError("modal state does not belong to this spectrum");
}

void require_unit(const ModalState& state, double tol) {
    if (std::abs(state.norm() - 1.0) > tol)
        throw PreconditionError("state is not unit-norm");
}

Spectrum compute_spectrum(const SpatialGrid& grid, const PotentialFn& V, int k_max) {
    const int n = grid.n_interior;
    if (k_max < 1) throw PreconditionError("compute_spectrum: k_max must be >= 1");
    if (k_max > n / 10)
        throw PreconditionError("compute_spectrum: truncation too large (k_max > n_interior/10)");
    if (V.size() != n) throw PreconditionError("compute_spectrum: potential/grid mismatch");
    require_finite(V, "potential");

    const double inv_h2 = 1.0 / (grid.h * grid.h);
    std::vector<double> diag(n), offdiag(n > 1 ? n - 1 : 0);
    for (int j = 0; j < n; ++j) diag[j] = 2.0 * inv_h2 + V.samples[j];
    for (int j = 0; j + 1 < n; ++j) offdiag[j] = -inv_h2;

    Eigen::MatrixXd z(n, k_max);
    std::vector<double> w(n);
    std::vector<lapack_int> isuppz(2 * std::max(1, k_max));
    lapack_int m = 0;
    lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), offdiag.data(),
                                     0.0, 0.0, 1, k_max, 0.0, &m, w.data(), z.data(), n,
                                     isuppz.data());
    if (info != 0) throw NumericalError("dstevr failed with info=" + std::to_string(info));
    if (m != k_max) throw NumericalError("dstevr returned fewer eigenpairs than requested");

    Spectrum spec;
    spec.k_max = k_max;
    spec.grid = grid;
    spec.eigenvalues = Eigen::Map<Eigen::VectorXd>(w.data(), k_max);
    spec.potential = V.samples;
    spec.id = spectrum_tag(grid, V, k_max);

    for (int k = 1; k < k_max; ++k)
        if (spec.eigenvalues(k) <= spec.eigenvalues(k - 1))
            throw NumericalError("eigenvalues not strictly increasing");

    // LAPACK vectors are Euclidean-normalized; dividing by sqrt(h) makes them
    // trapezoid-L2-normalized. Sign: first non-negligible value positive.
    const double scale = 1.0 / std::sqrt(grid.h);
    spec.eigenfunctions.resize(n, k_max);
    for (int c = 0; c < k_max; ++c) {
        Eigen::VectorXd v = z.col(c) * scale;
        const double floor = 1e-12 * v.cwiseAbs().maxCoeff();
        for (int j = 0; j < n; ++j) {
            if (std::abs(v(j)) > floor) {
                if (v(j) < 0) v = -v;
                break;
            }
        }
        spec.eigenfunctions.col(c) = v;
    }
    return spec;
}

ModalState project(const Eigen::VectorXcd& state_on_grid, const Spectrum& spec) {
    if (state_on_grid.size() != spec.grid.n_interior)
        throw PreconditionError("project: grid mismatch");
    ModalState s;
    s.coeffs.resize(spec.k_max);
    for (int k = 0; k < spec.k_max; ++k) {
        // <psi, phi_k> with real phi_k
        s.coeffs(k) = spec.grid.h * (spec.eigenfunctions.col(k).cast<Complex>().dot(state_on_grid));
    }
    s.spectrum_id = spec.id;
    return s;
}

Eigen::VectorXcd synthesize(const ModalState& state, const Spectrum& spec) {
    require_same_basis(state, spec);
    return spec.eigenfunctions.cast<Complex>() * state.coeffs;
}

double sobolev_norm(const ModalState& state, double s) {
    if (s < 0) throw PreconditionError("sobolev_norm: s must be >= 0");
    if (!state.coeffs.allFinite()) throw PreconditionError("sobolev_norm: non-finite coefficients");
    double acc = 0.0;
    for (int k = 0; k < state.modes(); ++k) {
        double w = std::pow(static_cast<double>(k + 1), s);
        acc += std::norm(w * state.coeffs(k));
    }
    return std::sqrt(acc);
}

Eigen::MatrixXd coupling_matrix(const PotentialFn& mu, const Spectrum& spec) {
    const int n = spec.grid.n_interior;
    const int K = spec.k_max;
    if (mu.size() != n) throw PreconditionError("coupling_matrix: grid mismatch");
    require_finite(mu, "coupling weight");

    Eigen::MatrixXd B(K, K);
    const Eigen::Map<const Eigen::VectorXd> muv(mu.samples.data(), n);
    // Independent upper-triangle entries; each pair writes its own slot, so
    // the parallel result is bit-identical to the serial one.
    const int n_pairs = K * (K + 1) / 2;
#pragma omp parallel for schedule(static)
    for (int idx = 0; idx < n_pairs; ++idx) {
        // unflatten idx -> (j <= k)
        int j = static_cast<int>((std::sqrt(8.0 * idx + 1.0) - 1.0) / 2.0);
        while ((j + 1) * (j + 2) / 2 <= idx) ++j;
        while (j * (j + 1) / 2 > idx) --j;
        int k = idx - j * (j + 1) / 2;
        double v = spec.grid.h *
                   (spec.eigenfunctions.col(j).cwiseProduct(muv).dot(spec.eigenfunctions.col(k)));
        B(j, k) = v;
        B(k, j) = v;
    }
    return B;
}

ModalState eigenstate_trajectory(const Spectrum& spec, int k, double t) {
    ModalState s = ModalState::basis(k, spec.k_max, spec);
    s.coeffs(k - 1) = std::exp(Complex(0.0, -spec.lambda(k) * t));
    return s;
}

Eigen::VectorXd apply_operator(const SpatialGrid& grid, const PotentialFn& V,
                               const Eigen::VectorXd& f) {
    const int n = grid.n_interior;
    if (f.size() != n || V.size() != n) throw PreconditionError("apply_operator: grid mismatch");
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    Eigen::VectorXd out(n);
    for (int j = 0; j < n; ++j) {
        double left = (j > 0) ? f(j - 1) : 0.0;
        double right = (j + 1 < n) ? f(j + 1) : 0.0;
        out(j) = (2.0 * f(j) - left - right) * inv_h2 + V.samples[j] * f(j);
    }
    return out;
}

namespace reference {

Eigen::MatrixXd coupling_matrix(const PotentialFn& mu, const Spectrum& spec) {
    const int n = spec.grid.n_interior;
    const int K = spec.k_max;
    if (mu.size() != n) throw PreconditionError("coupling_matrix: grid mismatch");
    Eigen::MatrixXd B(K, K);
    for (int j = 0; j < K; ++j) {
        for (int k = 0; k <= j; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += spec.eigenfunctions(i, j) * mu.samples[i] * spec.eigenfunctions(i, k);
            B(j, k) = B(k, j) = spec.grid.h * acc;
        }
    }
    return B;
}

}  // namespace reference

}  // namespace qpol
