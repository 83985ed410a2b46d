// Global state transfer composed from the building blocks: overlap
// creation, Lyapunov steering of both endpoints, a locally exact moment/
// Newton connection at the ground state, time-reversal stitching, and the
// u -> u+2 shifted-frame wrapper that turns polarizability into an
// effective dipole.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpol/dynamics.hpp"
#include "qpol/lyapunov.hpp"
#include "qpol/moments.hpp"

namespace qpol {

struct PlanSegment {
    std::string label;  // ramp_up | steer_fwd | local_connect | steer_bwd_reversed | ramp_down
    ControlSignal control;
};

struct TransferPlan {
    std::vector<PlanSegment> segments;
    double total_t = 0.0;
    double achieved_error = 0.0;  // re-simulated final L2 distance to the target
};

struct TransferOptions {
    double dt = 0.0;        // shared step size of every segment; <= 0: default rule
    double t_local = 1.0;   // horizon of the local connection
    double t_ramp = 1.0;    // duration of the 0 -> 2 ramp (shifted transfer)
    LyapunovConfig steer;
    NewtonOptions newton;
    std::uint64_t seed = 12345;
};

// The concatenated control of a plan (empty plan -> empty control).
ControlSignal plan_control(const TransferPlan& plan);

// Re-simulate a plan from psi0 and return the final L2 distance to psi_f.
double replay(const TransferPlan& plan, const ModalState& psi0, const ModalState& psi_f,
              const SystemParams& p);

// Theorem-4.1-style transfer: requires (C2)/(C3) to hold numerically for p.
// Throws VerificationError when the re-simulated error exceeds eps.
TransferPlan global_transfer_basic(const ModalState& psi0, const ModalState& psi_f,
                                   const SystemParams& p, double eps,
                                   const TransferOptions& opts = {});

// Theorem-1.1-style transfer through the shifted frame: requires
// (C2')/(C3') on shift_params(p). The plan's ramp_up/ramp_down are the
// quintic 0 <-> 2 ramps; the inner segments carry the +2 plateau.
TransferPlan global_transfer_shifted(const ModalState& psi0, const ModalState& psi_f,
                                     const SystemParams& p, double eps,
                                     const TransferOptions& opts = {});

// Express a state of one eigenbasis in another one on the same grid
// (renormalized; throws when the truncation loss is substantial).
ModalState rebase(const ModalState& state, const Spectrum& from, const Spectrum& to);

}  // namespace qpol
