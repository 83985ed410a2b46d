// Propagation of the controlled Schrodinger equation in the truncated
// eigenbasis, i c' = (diag(lambda) - u(t) B1 - u(t)^2 B2) c, together with
// its linearization around the free ground-state trajectory and the
// time-reversal / parameter-shift transforms used by the transfer pipeline.
#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qpol/grid.hpp"
#include "qpol/spectral.hpp"

namespace qpol {

// H10: u(0) = u(T) = 0. C20: additionally du/dt(0) = du/dt(T) = 0 at grid
// resolution. Free: raw samples, used internally for the u+2 shifted-frame
// checks where the boundary values are deliberately nonzero.
enum class ControlClass { H10, C20, Free };

// A real control sampled on the uniform time grid t_j = j * dt,
// dt = t_final / n_steps.
struct ControlSignal {
    double t_final = 0.0;
    int n_steps = 0;
    std::vector<double> values;  // length n_steps + 1
    ControlClass regularity = ControlClass::H10;

    double dt() const { return n_steps > 0 ? t_final / n_steps : 0.0; }
    bool is_empty() const { return n_steps == 0; }

    static ControlSignal zero(double t_final, int n_steps,
                              ControlClass cls = ControlClass::C20);
    // The do-nothing control (t_final = 0); propagation through it is the
    // identity and concatenation skips it.
    static ControlSignal empty();
    // Samples an analytic control; boundary samples are forced to zero for
    // the H10/C20 classes.
    template <typename F>
    static ControlSignal sample(double t_final, int n_steps, ControlClass cls, F&& f) {
        ControlSignal u = zero(t_final, n_steps, cls);
        const double dt = u.dt();
        for (int j = 0; j <= n_steps; ++j) u.values[j] = f(j * dt);
        if (cls != ControlClass::Free) {
            u.values.front() = 0.0;
            u.values.back() = 0.0;
        }
        return u;
    }

    double max_abs() const;
    void validate() const;  // finiteness + class boundary conditions
};

// Immutable bundle: potential, moments, spectrum and coupling matrices, all
// on one grid. Propagations share it read-only.
struct SystemParams {
    SpatialGrid grid;
    PotentialFn V, mu1, mu2;
    Spectrum spectrum;
    Eigen::MatrixXd coupling1, coupling2;

    int k_max() const { return spectrum.k_max; }
};

SystemParams make_system_params(const SpatialGrid& grid, const PotentialFn& V,
                                const PotentialFn& mu1, const PotentialFn& mu2, int k_max);

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXcd> states;
};

// Crank-Nicolson with the control evaluated at the midpoint of each step,
// arranged as  e^{-i L dt/2} . Cayley(-u (B1 + u B2)) . e^{-i L dt/2}
// so the diagonal part is advanced exactly: free evolution is exact, the
// one-step map is exactly unitary up to roundoff, and conjugation +
// control reversal inverts it step for step.
ModalState propagate(const ModalState& psi0, const ControlSignal& u, const SystemParams& p);
Trajectory propagate_trajectory(const ModalState& psi0, const ControlSignal& u,
                                const SystemParams& p, int store_stride = 1);

// Endpoint of the linearized system around the free trajectory of phi_1:
// Psi_k(T) = i B1[1,k] (int_0^T v(t) e^{i(lambda_k - lambda_1)t} dt) e^{-i lambda_k T},
// integrals by composite trapezoid on the control grid. Non-normalized.
ModalState linearized_propagate(const ControlSignal& v, const SystemParams& p);

// t -> u(T - t), same class.
ControlSignal reverse_control(const ControlSignal& u);

// Pointwise conjugation of the coefficients (eigenfunctions are real).
ModalState conjugate(const ModalState& psi);

// The shifted frame of the u -> u+2 substitution:
// (V, mu1, mu2) -> (V - 2 mu1 - 4 mu2, mu1 + 4 mu2, mu2), with spectrum and
// couplings recomputed.
SystemParams shift_params(const SystemParams& p);

// Default step size from dt * (lambda_K + u_max ||B1|| + u_max^2 ||B2||) < 0.1.
double default_dt(const SystemParams& p, double u_max);
int default_time_steps(double t_final, const SystemParams& p, double u_max);

// Concatenate controls sharing the same dt; junction samples must agree.
ControlSignal concatenate(const std::vector<ControlSignal>& parts);

}  // namespace qpol
