#include "qpol/pipeline.hpp"

#include <cmath>

#include "qpol/conditions.hpp"
#include "qpol/errors.hpp"

namespace qpol {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

ControlSignal zero_wait(double tau, double dt) {
    const int n = static_cast<int>(std::lround(tau / dt));
    if (n < 1) return ControlSignal::empty();
    return ControlSignal::zero(n * dt, n, ControlClass::C20);
}

// Free evolution for an integer number of steps (exact phases).
ModalState free_evolve(const ModalState& psi, const SystemParams& p, double tau) {
    ModalState out = psi;
    for (int k = 0; k < p.k_max(); ++k)
        out.coeffs(k) *= std::exp(Complex(0.0, -p.spectrum.eigenvalues(k) * tau));
    return out;
}

// Wait time aligning the ground-mode phase of psi with the target phase:
// arg(c_1) - lambda_1 tau = target (mod 2 pi), rounded to the step grid.
double phase_wait(const ModalState& psi, double lambda1, double target_phase, double dt) {
    const double alpha = std::arg(psi.coeffs(0));
    double tau = (alpha - target_phase) / lambda1;
    const double period = kTwoPi / lambda1;
    tau = std::fmod(tau, period);
    if (tau < 0) tau += period;
    return std::lround(tau / dt) * dt;
}

void append_segment(std::vector<PlanSegment>& segments, const std::string& label,
                    const ControlSignal& control) {
    if (!control.is_empty()) segments.push_back({label, control});
}

ControlSignal offset_control(const ControlSignal& u, double offset) {
    ControlSignal out = u;
    for (auto& v : out.values) v += offset;
    out.regularity = ControlClass::Free;
    return out;
}

}  // namespace

ControlSignal plan_control(const TransferPlan& plan) {
    std::vector<ControlSignal> parts;
    parts.reserve(plan.segments.size());
    for (const auto& seg : plan.segments) parts.push_back(seg.control);
    return concatenate(parts);
}

double replay(const TransferPlan& plan, const ModalState& psi0, const ModalState& psi_f,
              const SystemParams& p) {
    ModalState end = propagate(psi0, plan_control(plan), p);
    return (end.coeffs - psi_f.coeffs).norm();
}

TransferPlan global_transfer_basic(const ModalState& psi0, const ModalState& psi_f,
                                   const SystemParams& p, double eps,
                                   const TransferOptions& opts) {
    require_unit(psi0);
    require_unit(psi_f);
    require_same_basis(psi0, p.spectrum);
    require_same_basis(psi_f, p.spectrum);
    if (eps <= 0) throw PreconditionError("global_transfer: eps must be positive");

    {
        C2Result c2 = check_C2(p.spectrum);
        if (!c2.passed)
            throw PreconditionError("global_transfer: (C2) fails with gap " +
                                    std::to_string(c2.min_gap));
        C3Result c3 = check_C3(p);
        if (!c3.passed)
            throw PreconditionError("global_transfer: (C3) fails (min k^3 coupling " +
                                    std::to_string(c3.min_mk) + ")");
    }

    TransferPlan plan;
    if ((psi0.coeffs - psi_f.coeffs).norm() < 1e-12) {
        plan.achieved_error = replay(plan, psi0, psi_f, p);
        return plan;
    }

    TransferOptions o = opts;
    if (o.dt <= 0) o.dt = default_dt(p, std::max(o.steer.pulse_amplitude, 1.0));
    o.steer.dt = o.dt;
    const double lambda1 = p.spectrum.eigenvalues(0);
    const double t_local = std::max(16, static_cast<int>(std::lround(o.t_local / o.dt))) * o.dt;

    std::mt19937_64 rng(o.seed);
    const double radius = o.newton.radius;
    const double eps_steer_fwd = 0.45 * eps;
    const double eps_steer_bwd = 0.8 * radius;
    const double tol_local = std::min(0.5 * eps, 1e-6);

    // Forward leg: psi0 -> overlap -> near phi_1, then a zero-control wait
    // aligning the ground phase with phi_1 itself.
    auto [ramp_up, psi0_overlap] = ensure_overlap(psi0, p, o.steer, rng);
    SteerResult fwd = steer_to_ground(psi0_overlap, p, eps_steer_fwd, o.steer, rng);
    const double tau_fwd = phase_wait(fwd.final_state, lambda1, 0.0, o.dt);
    ControlSignal steer_fwd = concatenate({fwd.control, zero_wait(tau_fwd, o.dt)});

    // Backward leg, forward in time on conj(psi_f): steer to near phi_1 and
    // align the phase so the conjugated endpoint sits next to Phi_1(t_local).
    auto [ramp_down_fwd, chi_overlap] = ensure_overlap(conjugate(psi_f), p, o.steer, rng);
    SteerResult bwd = steer_to_ground(chi_overlap, p, eps_steer_bwd, o.steer, rng);
    const double tau_bwd = phase_wait(bwd.final_state, lambda1, lambda1 * t_local, o.dt);
    ModalState eta_bwd = free_evolve(bwd.final_state, p, tau_bwd);

    // Exact connection: from phi_1 to the conjugate of the steered backward
    // endpoint; the reversed backward leg then finishes at psi_f exactly.
    ModalState target = conjugate(eta_bwd);
    NewtonOptions newton = o.newton;
    if (newton.n_steps <= 0) newton.n_steps = static_cast<int>(std::lround(t_local / o.dt));
    ControlSignal local = local_exact_control(target, t_local, p, tol_local, newton);

    ControlSignal steer_bwd_reversed =
        concatenate({zero_wait(tau_bwd, o.dt), reverse_control(bwd.control)});

    append_segment(plan.segments, "ramp_up", ramp_up);
    append_segment(plan.segments, "steer_fwd", steer_fwd);
    append_segment(plan.segments, "local_connect", local);
    append_segment(plan.segments, "steer_bwd_reversed", steer_bwd_reversed);
    append_segment(plan.segments, "ramp_down", reverse_control(ramp_down_fwd));

    ControlSignal full = plan_control(plan);
    plan.total_t = full.t_final;
    plan.achieved_error = replay(plan, psi0, psi_f, p);
    if (plan.achieved_error > eps)
        throw VerificationError("global_transfer_basic: achieved error " +
                                std::to_string(plan.achieved_error) + " exceeds eps " +
                                std::to_string(eps));
    return plan;
}

ModalState rebase(const ModalState& state, const Spectrum& from, const Spectrum& to) {
    require_same_basis(state, from);
    ModalState out = project(synthesize(state, from), to);
    const double kept = out.coeffs.norm();
    if (kept < 0.9)
        throw NumericalError("rebase: truncation keeps only " + std::to_string(kept) +
                             " of the norm; raise k_max");
    out.coeffs /= kept;
    return out;
}

TransferPlan global_transfer_shifted(const ModalState& psi0, const ModalState& psi_f,
                                     const SystemParams& p, double eps,
                                     const TransferOptions& opts) {
    require_unit(psi0);
    require_unit(psi_f);
    require_same_basis(psi0, p.spectrum);
    require_same_basis(psi_f, p.spectrum);
    if (eps <= 0) throw PreconditionError("global_transfer: eps must be positive");

    SystemParams shifted = shift_params(p);
    {
        C2Result c2 = check_C2(shifted.spectrum);
        C3Result c3 = check_C3(shifted);
        if (!c2.passed || !c3.passed)
            throw PreconditionError(
                "global_transfer_shifted: (C2')/(C3') fail for the shifted system");
    }

    TransferOptions o = opts;
    if (o.dt <= 0) o.dt = default_dt(p, std::max(o.steer.pulse_amplitude + 2.0, 2.5));
    const int n_ramp = std::max(16, static_cast<int>(std::lround(o.t_ramp / o.dt)));
    const double t_ramp = n_ramp * o.dt;

    // quintic ramp: u1(0) = 0, u1(t_ramp) = 2, endpoint derivatives zero
    ControlSignal ramp =
        ControlSignal::sample(t_ramp, n_ramp, ControlClass::Free, [&](double t) {
            const double s = t / t_ramp;
            return 2.0 * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        });

    // both endpoints ride the ramp in the original frame
    ModalState psi0_ramped = propagate(psi0, ramp, p);
    ModalState chif_ramped = propagate(conjugate(psi_f), ramp, p);

    ModalState inner_start = rebase(psi0_ramped, p.spectrum, shifted.spectrum);
    ModalState inner_target = conjugate(rebase(chif_ramped, p.spectrum, shifted.spectrum));

    TransferOptions inner_opts = o;
    inner_opts.dt = o.dt;
    TransferPlan inner = global_transfer_basic(inner_start, inner_target, shifted, 0.5 * eps,
                                               inner_opts);

    TransferPlan plan;
    append_segment(plan.segments, "ramp_up", ramp);
    for (const auto& seg : inner.segments)
        append_segment(plan.segments, seg.label, offset_control(seg.control, 2.0));
    append_segment(plan.segments, "ramp_down", reverse_control(ramp));

    ControlSignal full = plan_control(plan);
    plan.total_t = full.t_final;
    plan.achieved_error = replay(plan, psi0, psi_f, p);
    if (plan.achieved_error > eps)
        throw VerificationError("global_transfer_shifted: achieved error " +
                                std::to_string(plan.achieved_error) + " exceeds eps " +
                                std::to_string(eps));
    return plan;
}

}  // namespace qpol
