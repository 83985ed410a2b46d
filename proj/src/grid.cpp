#include "qpol/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qpol/errors.hpp"

namespace qpol {

SpatialGrid SpatialGrid::uniform(int n_interior) {
    if (n_interior < 1) throw PreconditionError("grid: n_interior must be positive");
    SpatialGrid g;
    g.n_interior = n_interior;
    g.h = 1.0 / (n_interior + 1);
    g.nodes.resize(n_interior);
    for (int j = 0; j < n_interior; ++j) g.nodes[j] = (j + 1) * g.h;
    return g;
}

PotentialFn zero_potential(const SpatialGrid& grid) {
    return PotentialFn{std::vector<double>(grid.n_interior, 0.0)};
}

namespace {

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, delim)) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

double parse_number(const std::string& s, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw PreconditionError("potential spec: bad number '" + s + "' in " + ctx);
    }
}

PotentialFn load_table(const SpatialGrid& grid, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("potential file not found: " + path);
    std::vector<double> xs, vs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double x, v;
        if (ls >> x >> v) {
            xs.push_back(x);
            vs.push_back(v);
        }
    }
    if (xs.size() < 2) throw PreconditionError("potential file needs at least two rows: " + path);
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] <= xs[i - 1]) throw PreconditionError("potential table x-column must increase: " + path);
    if (xs.front() > grid.nodes.front() || xs.back() < grid.nodes.back())
        throw PreconditionError("potential table does not cover the grid: " + path);

    PotentialFn f;
    f.samples.resize(grid.n_interior);
    std::size_t seg = 0;
    for (int j = 0; j < grid.n_interior; ++j) {
        double x = grid.nodes[j];
        while (seg + 2 < xs.size() && xs[seg + 1] < x) ++seg;
        double t = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
        f.samples[j] = (1.0 - t) * vs[seg] + t * vs[seg + 1];
    }
    return f;
}

}  // namespace

PotentialFn make_potential(const SpatialGrid& grid, const std::string& spec) {
    std::istringstream ss(spec);
    std::string family;
    ss >> family;
    std::string rest;
    std::getline(ss, rest);
    while (!rest.empty() && rest.front() == ' ') rest.erase(rest.begin());

    PotentialFn f;
    f.samples.resize(grid.n_interior);
    if (family == "zero") {
        std::fill(f.samples.begin(), f.samples.end(), 0.0);
    } else if (family == "linear") {
        double a = parse_number(rest, "linear");
        for (int j = 0; j < grid.n_interior; ++j) f.samples[j] = a * grid.nodes[j];
    } else if (family == "quadratic") {
        double a = parse_number(rest, "quadratic");
        for (int j = 0; j < grid.n_interior; ++j) f.samples[j] = a * grid.nodes[j] * grid.nodes[j];
    } else if (family == "gauss") {
        auto parts = split(rest, ',');
        if (parts.size() != 3) throw PreconditionError("gauss potential needs 'a,x0,w': " + spec);
        double a = parse_number(parts[0], "gauss");
        double x0 = parse_number(parts[1], "gauss");
        double w = parse_number(parts[2], "gauss");
        if (w <= 0) throw PreconditionError("gauss potential needs w > 0");
        for (int j = 0; j < grid.n_interior; ++j) {
            double d = grid.nodes[j] - x0;
            f.samples[j] = a * std::exp(-d * d / (2.0 * w * w));
        }
    } else if (family == "file") {
        if (rest.empty()) throw PreconditionError("file potential needs a path");
        f = load_table(grid, rest);
    } else {
        throw PreconditionError("unknown potential family '" + family + "' (" + spec + ")");
    }
    require_finite(f, spec);
    return f;
}

PotentialFn linear_combination(const std::vector<std::pair<double, const PotentialFn*>>& terms) {
    if (terms.empty()) throw PreconditionError("linear_combination: empty term list");
    const int n = terms.front().second->size();
    PotentialFn out;
    out.samples.assign(n, 0.0);
    for (const auto& [c, f] : terms) {
        if (f->size() != n) throw PreconditionError("linear_combination: grid mismatch");
        for (int j = 0; j < n; ++j) out.samples[j] += c * f->samples[j];
    }
    return out;
}

void require_finite(const PotentialFn& f, const std::string& what) {
    for (double v : f.samples)
        if (!std::isfinite(v)) throw PreconditionError("non-finite samples in " + what);
}

double trapz(const SpatialGrid& grid, const std::vector<double>& f) {
    if (static_cast<int>(f.size()) != grid.n_interior)
        throw PreconditionError("trapz: grid mismatch");
    double s = 0.0;
    for (double v : f) s += v;
    return grid.h * s;
}

double inner(const SpatialGrid& grid, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
    if (f.size() != grid.n_interior || g.size() != grid.n_interior)
        throw PreconditionError("inner: grid mismatch");
    return grid.h * f.dot(g);
}

Complex inner(const SpatialGrid& grid, const Eigen::VectorXcd& f, const Eigen::VectorXcd& g) {
    if (f.size() != grid.n_interior || g.size() != grid.n_interior)
        throw PreconditionError("inner: grid mismatch");
    // left-linear convention: <f,g> = integral of f * conj(g)
    return grid.h * g.dot(f);
}

std::uint64_t fnv1a(const void* data, std::size_t n_bytes, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t hash = seed;
    for (std::size_t i = 0; i < n_bytes; ++i) {
        hash ^= p[i];
        hash *= 1099511628211ull;
    }
    return hash;
}

}  // namespace qpol
