#include "qpol/moments.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "qpol/errors.hpp"

namespace qpol {

namespace {

constexpr double kCouplingFloor = 1e-12;
constexpr double kMomentResidualTol = 1e-8;
constexpr double kEndpointTol = 1e-7;
constexpr double kRidge = 1e-12;

// Basis layout: [1, t, cos(w_k t), sin(w_k t) for each k, cos(w_2 t / 2),
// sin(w_2 t / 2)]. The subharmonic pair keeps the system underdetermined so
// the minimum-norm solution is well defined.
std::vector<double> basis_frequencies(const MomentProblem& mp) {
    std::vector<double> freqs(mp.frequencies.data(),
                              mp.frequencies.data() + mp.frequencies.size());
    freqs.push_back(0.5 * mp.frequencies(0));
    return freqs;
}

int basis_dimension(const MomentProblem& mp) {
    return 2 + 2 * (static_cast<int>(mp.frequencies.size()) + 1);
}

// Sample basis function m on the uniform grid into out (n+1 samples).
void sample_basis(int m, const MomentProblem& mp, const std::vector<double>& bfreqs,
                  int n_steps, std::vector<double>& out) {
    const double dt = mp.T / n_steps;
    if (m == 0) {
        std::fill(out.begin(), out.end(), 1.0);
        return;
    }
    if (m == 1) {
        for (int j = 0; j <= n_steps; ++j) out[j] = j * dt;
        return;
    }
    const int pair = (m - 2) / 2;
    const bool is_sin = (m - 2) % 2 == 1;
    const double omega = bfreqs[pair];
    const Complex rot = std::exp(Complex(0.0, omega * dt));
    Complex phase(1.0, 0.0);
    for (int j = 0; j <= n_steps; ++j) {
        out[j] = is_sin ? phase.imag() : phase.real();
        phase *= rot;
    }
}

// Sample the moment kernel of equation e (same layout as the rhs vector).
void sample_kernel(int e, const MomentProblem& mp, int n_steps, std::vector<double>& out) {
    const double dt = mp.T / n_steps;
    if (e == 0) {
        std::fill(out.begin(), out.end(), 1.0);
        return;
    }
    if (e == 1) {
        for (int j = 0; j <= n_steps; ++j) out[j] = mp.T - j * dt;
        return;
    }
    const int pair = (e - 2) / 2;
    const bool is_sin = (e - 2) % 2 == 1;
    const double omega = mp.frequencies(pair);
    const Complex rot = std::exp(Complex(0.0, omega * dt));
    Complex phase(1.0, 0.0);
    for (int j = 0; j <= n_steps; ++j) {
        out[j] = is_sin ? phase.imag() : phase.real();
        phase *= rot;
    }
}

double trapz_product(const std::vector<double>& f, const std::vector<double>& g, double dt) {
    const int n = static_cast<int>(f.size()) - 1;
    double acc = 0.5 * (f[0] * g[0] + f[n] * g[n]);
    for (int j = 1; j < n; ++j) acc += f[j] * g[j];
    return dt * acc;
}

Eigen::VectorXd rhs_vector(const MomentProblem& mp) {
    const int n_osc = static_cast<int>(mp.frequencies.size());
    Eigen::VectorXd b(2 + 2 * n_osc);
    b(0) = mp.rhs_dc.real();
    b(1) = mp.rhs_ramp;
    for (int i = 0; i < n_osc; ++i) {
        b(2 + 2 * i) = mp.rhs_osc(i).real();
        b(3 + 2 * i) = mp.rhs_osc(i).imag();
    }
    return b;
}

Eigen::MatrixXd assemble(const MomentProblem& mp, int n_steps, bool parallel) {
    const int n_eq = 2 + 2 * static_cast<int>(mp.frequencies.size());
    const int n_basis = basis_dimension(mp);
    const auto bfreqs = basis_frequencies(mp);
    const double dt = mp.T / n_steps;
    Eigen::MatrixXd A(n_eq, n_basis);

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int e = 0; e < n_eq; ++e) {
        std::vector<double> kernel(n_steps + 1), basis(n_steps + 1);
        sample_kernel(e, mp, n_steps, kernel);
        for (int m = 0; m < n_basis; ++m) {
            sample_basis(m, mp, bfreqs, n_steps, basis);
            A(e, m) = trapz_product(kernel, basis, dt);
        }
    }
    return A;
}

}  // namespace

ModalState project_H(const ModalState& psi) {
    ModalState out = psi;
    out.coeffs(0) = Complex(0.0, psi.coeffs(0).imag());
    return out;
}

ModalState project_H_frame(const ModalState& psi, double T, const Spectrum& spec) {
    require_same_basis(psi, spec);
    const Complex rot = std::exp(Complex(0.0, spec.lambda(1) * T));
    ModalState out = psi;
    out.coeffs(0) = std::conj(rot) * Complex(0.0, (rot * psi.coeffs(0)).imag());
    return out;
}

MomentProblem build_moment_problem(const ModalState& psi_f, double T, const SystemParams& p) {
    require_same_basis(psi_f, p.spectrum);
    if (T <= 0) throw PreconditionError("build_moment_problem: T must be positive");
    const Complex frame_c1 =
        std::exp(Complex(0.0, p.spectrum.lambda(1) * T)) * psi_f.coeffs(0);
    if (std::abs(frame_c1.real()) > 1e-10 * (1.0 + psi_f.norm()))
        throw PreconditionError(
            "build_moment_problem: datum not in H (Re<Psi_f, Phi_1(T)> != 0)");

    const int K = p.k_max();
    const Eigen::VectorXd& lambda = p.spectrum.eigenvalues;
    for (int k = 1; k <= K; ++k)
        if (std::abs(p.coupling1(0, k - 1)) <= kCouplingFloor)
            throw PreconditionError("build_moment_problem: vanishing coupling B1[1," +
                                    std::to_string(k) + "] (C1 failure)");

    MomentProblem mp;
    mp.T = T;
    mp.frequencies.resize(K - 1);
    mp.rhs_osc.resize(K - 1);
    mp.rhs_dc = 0.0;
    // <Psi_f, Phi_k(T)> = e^{+i lambda_k T} c_k maps the datum into the
    // linearization frame.
    const Complex pairing1 =
        std::exp(Complex(0.0, lambda(0) * T)) * psi_f.coeffs(0);
    mp.rhs_ramp = pairing1.imag() / p.coupling1(0, 0);
    for (int k = 2; k <= K; ++k) {
        mp.frequencies(k - 2) = lambda(k - 1) - lambda(0);
        const Complex pairing =
            std::exp(Complex(0.0, lambda(k - 1) * T)) * psi_f.coeffs(k - 1);
        mp.rhs_osc(k - 2) = (lambda(0) - lambda(k - 1)) / p.coupling1(0, k - 1) * pairing;
    }
    for (int i = 1; i < mp.frequencies.size(); ++i)
        if (mp.frequencies(i) <= mp.frequencies(i - 1))
            throw NumericalError("build_moment_problem: frequencies not increasing");
    return mp;
}

Eigen::MatrixXd moment_matrix(const MomentProblem& mp, int n_steps) {
    return assemble(mp, n_steps, true);
}

namespace reference {
Eigen::MatrixXd moment_matrix(const MomentProblem& mp, int n_steps) {
    return assemble(mp, n_steps, false);
}
}  // namespace reference

MomentSolution solve_moment_problem(const MomentProblem& mp, int n_steps) {
    if (mp.frequencies.size() < 1)
        throw PreconditionError("solve_moment_problem: needs at least one frequency");
    if (n_steps < 4 * static_cast<int>(mp.frequencies.size()))
        throw PreconditionError("solve_moment_problem: time grid too coarse for the basis");
    if (mp.rhs_dc != Complex(0.0, 0.0))
        throw PreconditionError("solve_moment_problem: the dc target must be zero");

    const int n_eq = 2 + 2 * static_cast<int>(mp.frequencies.size());
    const int n_basis = basis_dimension(mp);
    if (n_eq > n_basis)
        throw PreconditionError("solve_moment_problem: basis smaller than equation count");

    Eigen::MatrixXd A = moment_matrix(mp, n_steps);
    Eigen::VectorXd b = rhs_vector(mp);

    // Minimum-norm solution of the underdetermined system through the ridge-
    // regularized Gram matrix.
    Eigen::MatrixXd G = A * A.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double gmax = es.eigenvalues().maxCoeff();
    const double gmin = es.eigenvalues().minCoeff();
    MomentSolution sol;
    sol.T = mp.T;
    sol.condition_estimate = (gmin > 0) ? gmax / gmin : std::numeric_limits<double>::infinity();
    if (!(gmin > gmax * 1e-15))
        throw NumericalError(
            "solve_moment_problem: Gram matrix numerically singular (condition ~" +
            std::to_string(sol.condition_estimate) + "); a larger T separates the frequencies");

    const double ridge = kRidge * G.trace() / n_eq;
    Eigen::MatrixXd G_ridged = G;
    G_ridged.diagonal().array() += ridge;
    auto ldlt = G_ridged.ldlt();
    Eigen::VectorXd y = ldlt.solve(b);
    // one refinement pass takes the ridge-induced residual down to second
    // order without changing the regularizer
    y += ldlt.solve(b - G * y);
    Eigen::VectorXd coef = A.transpose() * y;

    sol.residuals = (A * coef - b).cwiseAbs();
    if (sol.residuals.maxCoeff() > kMomentResidualTol) {
        char msg[128];
        std::snprintf(msg, sizeof(msg),
                      "solve_moment_problem: residual %.3g above tolerance; "
                      "a larger T may be needed",
                      sol.residuals.maxCoeff());
        throw NumericalError(msg);
    }

    // sample w on the control grid
    const auto bfreqs = basis_frequencies(mp);
    sol.w.assign(n_steps + 1, 0.0);
    std::vector<double> basis(n_steps + 1);
    for (int m = 0; m < n_basis; ++m) {
        if (coef(m) == 0.0) continue;
        sample_basis(m, mp, bfreqs, n_steps, basis);
        for (int j = 0; j <= n_steps; ++j) sol.w[j] += coef(m) * basis[j];
    }
    return sol;
}

ControlSignal moment_control(const MomentSolution& sol) {
    const int n = static_cast<int>(sol.w.size()) - 1;
    if (n < 1) throw PreconditionError("moment_control: empty solution");
    if (sol.residuals.size() > 0 && sol.residuals.maxCoeff() > kMomentResidualTol)
        throw PreconditionError("moment_control: moment residuals above tolerance");

    ControlSignal v = ControlSignal::zero(sol.T, n, ControlClass::H10);
    const double dt = sol.T / n;
    double acc = 0.0;
    for (int j = 1; j <= n; ++j) {
        acc += 0.5 * dt * (sol.w[j - 1] + sol.w[j]);
        v.values[j] = acc;
    }
    const double drift = v.values[n];
    if (std::abs(drift) > kEndpointTol)
        throw NumericalError("moment_control: endpoint drift " + std::to_string(drift) +
                             " (dc residual too large)");
    // linear correction; j/n is exactly 1 at the endpoint
    for (int j = 1; j <= n; ++j) v.values[j] -= drift * (static_cast<double>(j) / n);
    return v;
}

double control_h1_norm(const ControlSignal& u) {
    const double dt = u.dt();
    double l2 = 0.0, d2 = 0.0;
    for (int j = 0; j < u.n_steps; ++j) {
        const double mid = 0.5 * (u.values[j] + u.values[j + 1]);
        const double der = (u.values[j + 1] - u.values[j]) / dt;
        l2 += mid * mid * dt;
        d2 += der * der * dt;
    }
    return std::sqrt(l2 + d2);
}

ControlSignal local_exact_control(const ModalState& psi_f, double T, const SystemParams& p,
                                  double tol, const NewtonOptions& opts,
                                  std::vector<NewtonRecord>* log) {
    require_same_basis(psi_f, p.spectrum);
    require_unit(psi_f);
    if (tol <= 0) throw PreconditionError("local_exact_control: tol must be positive");

    // (C1) guards every division below; (C3) is the solvability margin.
    for (int k = 1; k <= p.k_max(); ++k)
        if (std::abs(p.coupling1(0, k - 1)) <= kCouplingFloor)
            throw PreconditionError("local_exact_control: C1 fails at k=" + std::to_string(k));

    // trust radius in the truncated H^5 distance to Phi_1(T)
    ModalState anchor = eigenstate_trajectory(p.spectrum, 1, T);
    ModalState diff = psi_f;
    diff.coeffs -= anchor.coeffs;
    if (sobolev_norm(diff, 5.0) > opts.radius)
        throw PreconditionError("local_exact_control: target outside the local radius " +
                                std::to_string(opts.radius));

    const int n_steps = opts.n_steps > 0 ? opts.n_steps : default_time_steps(T, p, 0.5);
    ControlSignal u = ControlSignal::zero(T, n_steps, ControlClass::H10);
    ModalState phi1 = ModalState::basis(1, p.k_max(), p.spectrum);

    double prev_defect = std::numeric_limits<double>::infinity();
    int grew = 0;
    double last_residual = 0.0;
    for (int m = 0; m <= opts.max_iterations; ++m) {
        ModalState psi_T = propagate(phi1, u, p);
        ModalState defect = psi_T;
        defect.coeffs = psi_f.coeffs - psi_T.coeffs;
        const double defect_l2 = defect.coeffs.norm();
        if (log) log->push_back({m, defect_l2, last_residual, control_h1_norm(u)});
        if (defect_l2 < tol) return u;
        if (defect_l2 >= prev_defect) {
            if (++grew >= 2)
                throw NumericalError(
                    "local_exact_control: defect grew twice in a row (divergence); shrink the "
                    "radius");
        } else {
            grew = 0;
        }
        prev_defect = defect_l2;

        MomentProblem mp =
            build_moment_problem(project_H_frame(defect, T, p.spectrum), T, p);
        MomentSolution sol = solve_moment_problem(mp, n_steps);
        last_residual = sol.residuals.maxCoeff();
        ControlSignal v = moment_control(sol);
        for (int j = 0; j <= n_steps; ++j) u.values[j] += v.values[j];
    }
    throw NumericalError("local_exact_control: no convergence within " +
                         std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace qpol
