#include "qpol/dynamics.hpp"

#include <cmath>

#include "qpol/errors.hpp"

namespace qpol {

ControlSignal ControlSignal::zero(double t_final, int n_steps, ControlClass cls) {
    if (t_final <= 0 || n_steps < 1)
        throw PreconditionError("control: t_final and n_steps must be positive");
    ControlSignal u;
    u.t_final = t_final;
    u.n_steps = n_steps;
    u.values.assign(n_steps + 1, 0.0);
    u.regularity = cls;
    return u;
}

ControlSignal ControlSignal::empty() {
    ControlSignal u;
    u.t_final = 0.0;
    u.n_steps = 0;
    u.values = {0.0};
    u.regularity = ControlClass::C20;
    return u;
}

double ControlSignal::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

void ControlSignal::validate() const {
    if (static_cast<int>(values.size()) != n_steps + 1)
        throw PreconditionError("control: sample count does not match n_steps");
    for (double v : values)
        if (!std::isfinite(v)) throw PreconditionError("control: non-finite sample");
    if (regularity == ControlClass::H10 || regularity == ControlClass::C20) {
        if (values.front() != 0.0 || values.back() != 0.0)
            throw PreconditionError("control: H10/C20 class requires u(0) = u(T) = 0");
    }
    if (regularity == ControlClass::C20 && n_steps >= 2) {
        // endpoint derivative zero at grid resolution
        const double tol = 10.0 * dt() * max_abs() + 1e-12;
        if (std::abs(values[1] - values[0]) > tol ||
            std::abs(values[n_steps] - values[n_steps - 1]) > tol)
            throw PreconditionError("control: C20 class requires du/dt = 0 at the endpoints");
    }
}

SystemParams make_system_params(const SpatialGrid& grid, const PotentialFn& V,
                                const PotentialFn& mu1, const PotentialFn& mu2, int k_max) {
    SystemParams p;
    p.grid = grid;
    p.V = V;
    p.mu1 = mu1;
    p.mu2 = mu2;
    p.spectrum = compute_spectrum(grid, V, k_max);
    p.coupling1 = coupling_matrix(mu1, p.spectrum);
    p.coupling2 = coupling_matrix(mu2, p.spectrum);
    return p;
}

namespace {

// One propagation's scratch space; reused across steps to avoid per-step
// allocation in the dense solves.
struct CnWorkspace {
    Eigen::MatrixXd H;
    Eigen::MatrixXcd plus, minus;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
    Eigen::VectorXcd rhs;
    Eigen::VectorXcd half_phase;

    explicit CnWorkspace(int K)
        : H(K, K), plus(K, K), minus(K, K), rhs(K), half_phase(K) {}
};

// Advance one CN step: c <- E . Cayley(-u_mid (B1 + u_mid B2)) . E . c with
// E = diag(e^{-i lambda dt/2}).
void cn_step(Eigen::VectorXcd& c, double u_mid, double dt, const SystemParams& p,
             CnWorkspace& ws) {
    const int K = p.k_max();
    c.array() *= ws.half_phase.array();
    if (u_mid != 0.0) {
        const double alpha = 0.5 * dt;
        // H = -u (B1 + u B2), real symmetric; Cayley of the real matrix keeps
        // the step exactly unitary.
        ws.H = (-u_mid) * p.coupling1 - (u_mid * u_mid) * p.coupling2;
        for (int i = 0; i < K; ++i) {
            for (int j = 0; j < K; ++j) {
                const double im = alpha * ws.H(i, j);
                const double re = (i == j) ? 1.0 : 0.0;
                ws.plus(i, j) = Complex(re, im);
                ws.minus(i, j) = Complex(re, -im);
            }
        }
        ws.rhs.noalias() = ws.minus * c;
        ws.lu.compute(ws.plus);
        c.noalias() = ws.lu.solve(ws.rhs);
    }
    c.array() *= ws.half_phase.array();
}

}  // namespace

ModalState propagate(const ModalState& psi0, const ControlSignal& u, const SystemParams& p) {
    require_same_basis(psi0, p.spectrum);
    require_unit(psi0);
    if (u.is_empty()) return psi0;
    u.validate();

    const int K = p.k_max();
    const double dt = u.dt();
    CnWorkspace ws(K);
    for (int k = 0; k < K; ++k)
        ws.half_phase(k) = std::exp(Complex(0.0, -0.5 * dt * p.spectrum.eigenvalues(k)));

    Eigen::VectorXcd c = psi0.coeffs;
    for (int j = 0; j < u.n_steps; ++j) {
        const double u_mid = 0.5 * (u.values[j] + u.values[j + 1]);
        cn_step(c, u_mid, dt, p, ws);
        if (std::abs(c.norm() - 1.0) > 1e-6)
            throw NumericalError("propagate: norm drift " + std::to_string(c.norm() - 1.0) +
                                 " at step " + std::to_string(j + 1) + " of " +
                                 std::to_string(u.n_steps));
    }
    ModalState out;
    out.coeffs = std::move(c);
    out.spectrum_id = p.spectrum.id;
    return out;
}

Trajectory propagate_trajectory(const ModalState& psi0, const ControlSignal& u,
                                const SystemParams& p, int store_stride) {
    require_same_basis(psi0, p.spectrum);
    require_unit(psi0);
    u.validate();
    if (store_stride < 1) throw PreconditionError("propagate_trajectory: stride must be >= 1");

    const int K = p.k_max();
    const double dt = u.dt();
    CnWorkspace ws(K);
    for (int k = 0; k < K; ++k)
        ws.half_phase(k) = std::exp(Complex(0.0, -0.5 * dt * p.spectrum.eigenvalues(k)));

    Trajectory traj;
    Eigen::VectorXcd c = psi0.coeffs;
    traj.times.push_back(0.0);
    traj.states.push_back(c);
    for (int j = 0; j < u.n_steps; ++j) {
        const double u_mid = 0.5 * (u.values[j] + u.values[j + 1]);
        cn_step(c, u_mid, dt, p, ws);
        if (std::abs(c.norm() - 1.0) > 1e-6)
            throw NumericalError("propagate_trajectory: norm drift at step " +
                                 std::to_string(j + 1));
        if ((j + 1) % store_stride == 0 || j + 1 == u.n_steps) {
            traj.times.push_back((j + 1) * dt);
            traj.states.push_back(c);
        }
    }
    return traj;
}

ModalState linearized_propagate(const ControlSignal& v, const SystemParams& p) {
    v.validate();
    const int K = p.k_max();
    const double T = v.t_final;
    const double dt = v.dt();
    const int n = v.n_steps;

    ModalState out;
    out.coeffs.resize(K);
    out.spectrum_id = p.spectrum.id;
    const double lambda1 = p.spectrum.eigenvalues(0);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < K; ++k) {
        const double omega = p.spectrum.eigenvalues(k) - lambda1;
        // trapezoid of v(t) e^{i omega t} via a phase recurrence
        const Complex rot = std::exp(Complex(0.0, omega * dt));
        Complex phase(1.0, 0.0);
        Complex acc = 0.5 * v.values[0] * phase;
        for (int j = 1; j < n; ++j) {
            phase *= rot;
            acc += v.values[j] * phase;
        }
        phase *= rot;
        acc += 0.5 * v.values[n] * phase;
        acc *= dt;
        out.coeffs(k) = Complex(0.0, 1.0) * p.coupling1(0, k) * acc *
                        std::exp(Complex(0.0, -p.spectrum.eigenvalues(k) * T));
    }
    return out;
}

ControlSignal reverse_control(const ControlSignal& u) {
    ControlSignal r = u;
    std::reverse(r.values.begin(), r.values.end());
    return r;
}

ModalState conjugate(const ModalState& psi) {
    ModalState out = psi;
    out.coeffs = psi.coeffs.conjugate();
    return out;
}

SystemParams shift_params(const SystemParams& p) {
    PotentialFn shifted_V =
        linear_combination({{1.0, &p.V}, {-2.0, &p.mu1}, {-4.0, &p.mu2}});
    PotentialFn shifted_mu1 = linear_combination({{1.0, &p.mu1}, {4.0, &p.mu2}});
    return make_system_params(p.grid, shifted_V, shifted_mu1, p.mu2, p.k_max());
}

double default_dt(const SystemParams& p, double u_max) {
    const double scale = p.spectrum.eigenvalues(p.k_max() - 1) +
                         std::abs(u_max) * p.coupling1.operatorNorm() +
                         u_max * u_max * p.coupling2.operatorNorm();
    return 0.1 / scale;
}

int default_time_steps(double t_final, const SystemParams& p, double u_max) {
    int n = static_cast<int>(std::ceil(t_final / default_dt(p, u_max)));
    return std::max(n, 16);
}

ControlSignal concatenate(const std::vector<ControlSignal>& parts) {
    std::vector<const ControlSignal*> live;
    for (const auto& part : parts)
        if (!part.is_empty()) live.push_back(&part);
    if (live.empty()) return ControlSignal::empty();

    const double dt0 = live.front()->dt();
    ControlSignal out;
    out.t_final = 0.0;
    out.n_steps = 0;
    out.values = {live.front()->values.front()};
    out.regularity = ControlClass::Free;
    for (const ControlSignal* part : live) {
        if (std::abs(part->dt() - dt0) > 1e-12 * dt0)
            throw PreconditionError("concatenate: segments must share dt");
        if (std::abs(part->values.front() - out.values.back()) > 1e-12)
            throw PreconditionError("concatenate: control discontinuous at junction");
        out.values.insert(out.values.end(), part->values.begin() + 1, part->values.end());
        out.n_steps += part->n_steps;
        out.t_final += part->t_final;
    }
    // dt is t_final / n_steps; rebuild t_final from the shared dt to avoid
    // accumulation drift.
    out.t_final = dt0 * out.n_steps;
    if (out.values.front() == 0.0 && out.values.back() == 0.0)
        out.regularity = ControlClass::H10;
    return out;
}

}  // namespace qpol
