// Lyapunov descent toward the ground state:
//   L(psi) = gamma * sum_{k>=2} lambda_k^6 |c_k|^2 + 1 - |c_1|^2,
// realized as resonant C20 pulses whose per-frequency amplitudes and phases
// come from the first variation of L along the linearized dynamics, with a
// backtracking line search on the overall pulse amplitude.
#pragma once

#include <random>
#include <vector>

#include "qpol/dynamics.hpp"
#include "qpol/spectral.hpp"

namespace qpol {

// Below this ground-state overlap the descent direction is numerically
// ill-conditioned.
inline constexpr double kOverlapFloor = 1e-3;

struct LyapunovConfig {
    double gamma = 0.0;             // <= 0: choose_gamma at the start state
    double pulse_amplitude = 0.3;   // line-search start amplitude
    double pulse_duration = 0.0;    // <= 0: 4*pi / (smallest frequency separation)
    std::vector<int> resonant_modes;  // empty: all k with |c_k| > 1e-6, capped at 8
    double descent_tolerance = 1e-9;  // relative L-decrease treated as progress
    int max_iterations = 600;
    double dt = 0.0;                // time step shared by all pulses; <= 0: default_dt
    // ensure_overlap keeps pulsing until this much ground-state population;
    // a comfortable anchor makes choose_gamma weight the high modes sanely
    double overlap_target = 0.3;
};

double lyapunov_value(const ModalState& psi, const Spectrum& spec, double gamma);

// gamma = |c_1|^2 / (2 sum_{k>=2} lambda_k^6 |c_k|^2), so that
// L(psi0) = 1 - |c_1|^2/2 < 1; falls back to 1e-12 at the ground state.
double choose_gamma(const ModalState& psi0, const Spectrum& spec);

// min over the global phase of || psi - e^{i theta} phi_1 || in the
// truncated modal H^5 norm: sqrt((1-|c_1|)^2 + sum_{k>=2} k^10 |c_k|^2).
double phase_min_h5_distance(const ModalState& psi);

// One pulse's carrier frequencies omega_k = lambda_k - lambda_1 with the
// per-frequency weights/phases read off the first variation; dLda is the
// derivative of L along the pulse amplitude at a = 0 (negative for a
// descent direction).
struct DescentDirection {
    std::vector<int> modes;      // 1-based k of each carrier
    std::vector<double> beta;    // weights, max-normalized
    std::vector<double> theta;   // phases
    double t_pulse = 0.0;
    double dLda = 0.0;
};

DescentDirection descent_direction(const ModalState& psi, const SystemParams& p, double gamma,
                                   const LyapunovConfig& cfg);

// u(t) = a sin^2(pi t / T_p) sum_k beta_k sin(omega_k t + theta_k), C20,
// on the shared step size dt (the pulse length is rounded to a multiple).
ControlSignal descent_pulse(const DescentDirection& dir, double amplitude,
                            const SystemParams& p, double dt);

struct DescentResult {
    ControlSignal pulse;
    ModalState next;
    double lyapunov_before = 0.0;
    double lyapunov_after = 0.0;
    double amplitude = 0.0;
};

// Lemma-2.2 surrogate: returns a pulse with L(psi_next) < L(psi) strictly,
// or throws NumericalError("no descent ...") after line-search exhaustion
// (re-randomized phase retries included, driven by rng).
DescentResult descent_step(const ModalState& psi, const SystemParams& p,
                           const LyapunovConfig& cfg, std::mt19937_64& rng);

struct SteerRecord {
    int iteration = 0;
    double lyapunov = 0.0;
    double c1_abs = 0.0;
    double h5_distance = 0.0;
    double cumulative_t = 0.0;
};

struct SteerResult {
    ControlSignal control;     // concatenated C20 pulses (empty when psi0 is done)
    ModalState final_state;
    double h5_distance = 0.0;
    std::vector<SteerRecord> log;
};

// Iterate descent steps until the phase-minimized truncated-H^5 distance to
// phi_1 drops below eps.
SteerResult steer_to_ground(const ModalState& psi0, const SystemParams& p, double eps,
                            const LyapunovConfig& cfg, std::mt19937_64& rng);

// No-op when the ground-state population already exceeds overlap_target.
// From a (near-)zero overlap a short fixed resonant pulse at the 2->1
// frequency creates it (re-seeded phases on failure); further pulses with
// first-variation phases then grow |<psi, phi_1>| to the target.
std::pair<ControlSignal, ModalState> ensure_overlap(const ModalState& psi0,
                                                    const SystemParams& p,
                                                    const LyapunovConfig& cfg,
                                                    std::mt19937_64& rng);

}  // namespace qpol
