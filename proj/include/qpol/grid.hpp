// Uniform Dirichlet grid on (0,1), sampled real functions on it, and the
// composite trapezoid quadrature used consistently across the project
// (boundary values are zero, so the rule reduces to h * sum over interior
// nodes; this matches the discrete orthogonality of the finite-difference
// eigenvectors).
#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qpol {

using Complex = std::complex<double>;

struct SpatialGrid {
    int n_interior = 0;          // number of interior nodes
    double h = 0.0;              // spacing, h * (n_interior + 1) = 1
    std::vector<double> nodes;   // nodes[j] = (j+1) * h

    static SpatialGrid uniform(int n_interior);

    bool operator==(const SpatialGrid& other) const {
        return n_interior == other.n_interior;
    }
};

// A real function sampled at the interior nodes of a SpatialGrid.
// Houses potentials V as well as the dipole/polarizability moments.
struct PotentialFn {
    std::vector<double> samples;

    int size() const { return static_cast<int>(samples.size()); }
};

PotentialFn zero_potential(const SpatialGrid& grid);

// Builtin families: "zero", "linear a" (a*x), "quadratic a" (a*x^2),
// "gauss a,x0,w" (a*exp(-(x-x0)^2/(2 w^2))), or "file <path>" with a
// two-column (x, value) table interpolated linearly onto the grid.
PotentialFn make_potential(const SpatialGrid& grid, const std::string& spec);

// Sum of scaled sampled functions, used by the parameter-shift transform.
PotentialFn linear_combination(const std::vector<std::pair<double, const PotentialFn*>>& terms);

void require_finite(const PotentialFn& f, const std::string& what);

// Composite trapezoid with implicit zero boundary values.
double trapz(const SpatialGrid& grid, const std::vector<double>& f);
double inner(const SpatialGrid& grid, const Eigen::VectorXd& f, const Eigen::VectorXd& g);
Complex inner(const SpatialGrid& grid, const Eigen::VectorXcd& f, const Eigen::VectorXcd& g);

// FNV-1a over raw bytes; used for cheap identity tags on spectra/configs.
std::uint64_t fnv1a(const void* data, std::size_t n_bytes, std::uint64_t seed = 1469598103934665603ull);

}  // namespace qpol
