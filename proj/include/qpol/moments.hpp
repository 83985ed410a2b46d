// The linearized control problem as a trigonometric moment system: given a
// target endpoint Psi_f of the linearization, find w with
//   int w dt = 0,
//   int w(t) (T-t) dt = ramp target,
//   int w(t) e^{i omega_k t} dt = d_k,   omega_k = lambda_k - lambda_1,
// then v = int_0^t w is an H10 control steering the linearized system to
// Psi_f. A quasi-Newton loop on top of it realizes local exact control
// around the ground-state trajectory.
//
// All moment functionals are composite-trapezoid sums on the control grid,
// matching the quadrature used by linearized_propagate; w is represented on
// the truncated basis {1, t, cos/sin(omega_k t)} plus one subharmonic
// cos/sin pair, and solved by ridge-regularized minimum-norm least squares.
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qpol/dynamics.hpp"
#include "qpol/spectral.hpp"

namespace qpol {

struct MomentProblem {
    double T = 0.0;
    Eigen::VectorXd frequencies;   // omega_k for k = 2..K, strictly increasing
    Complex rhs_dc = 0.0;          // int w dt target (always 0)
    double rhs_ramp = 0.0;         // int w(t)(T-t) dt target
    Eigen::VectorXcd rhs_osc;      // d_k for k = 2..K
};

struct MomentSolution {
    std::vector<double> w;         // sampled on the control grid
    Eigen::VectorXd residuals;     // per-equation absolute residuals
    double condition_estimate = 0.0;
    double T = 0.0;
};

struct NewtonRecord {
    int iteration = 0;
    double defect_l2 = 0.0;
    double residual_max = 0.0;
    double control_h1 = 0.0;
};

struct NewtonOptions {
    double radius = 5e-2;        // trust radius in the truncated H^5 distance
    int max_iterations = 10;
    int n_steps = 0;             // 0 -> default_time_steps for the system
    double moment_tolerance = 1e-8;
};

// Zero the real part of c_1, leave everything else.
ModalState project_H(const ModalState& psi);

// The same projection applied in the linearization frame at time T: zero
// the real part of <psi, Phi_1(T)> = e^{i lambda_1 T} c_1. The two coincide
// at the aligned horizons e^{-i lambda_1 T} = 1 used in the composition
// proofs; at a generic T this is the one the moment problem can honor.
ModalState project_H_frame(const ModalState& psi, double T, const Spectrum& spec);

// Targets per the moment display; the pairings <Psi_f, Phi_k(T)> map the
// datum into the linearization frame. The untargetable real part of the
// Phi_1(T)-pairing is dropped (norm conservation makes it dependent).
MomentProblem build_moment_problem(const ModalState& psi_f, double T, const SystemParams& p);

MomentSolution solve_moment_problem(const MomentProblem& mp, int n_steps);

// v(t) = cumulative trapezoid of w; the residual endpoint drift (below
// 1e-7, else an error) is removed by a linear correction so v(0) = v(T) = 0
// exactly in the grid sense.
ControlSignal moment_control(const MomentSolution& sol);

// Quasi-Newton realization of the local controllability map: iterate
// u <- u + M(defect mapped to the linearization frame) with the derivative
// frozen at u = 0, until ||psi(T, phi_1, u) - psi_f||_L2 < tol.
ControlSignal local_exact_control(const ModalState& psi_f, double T, const SystemParams& p,
                                  double tol, const NewtonOptions& opts = {},
                                  std::vector<NewtonRecord>* log = nullptr);

// Discrete H1 norm of a control (used in diagnostics logs).
double control_h1_norm(const ControlSignal& u);

namespace reference {
// Serial assembly of the moment matrix (rows = equations, columns = basis
// functions), kept for tests and the kernel benchmark.
Eigen::MatrixXd moment_matrix(const MomentProblem& mp, int n_steps);
}  // namespace reference

// Parallel version of the same assembly (rows are independent).
Eigen::MatrixXd moment_matrix(const MomentProblem& mp, int n_steps);

}  // namespace qpol
