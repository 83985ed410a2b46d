#include "qpol/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qpol/conditions.hpp"
#include "qpol/errors.hpp"

namespace qpol {

namespace {

double mode_weight_sum(const ModalState& psi, const Spectrum& spec) {
    // sum_{k>=2} lambda_k^6 |c_k|^2
    double acc = 0.0;
    for (int k = 2; k <= psi.modes(); ++k) {
        const double l = spec.lambda(k);
        acc += std::pow(l, 6.0) * std::norm(psi.coeffs(k - 1));
    }
    return acc;
}

void require_descent_preconditions(const ModalState& psi, const SystemParams& p) {
    require_unit(psi);
    if (std::abs(psi.coeffs(0)) <= kOverlapFloor)
        throw PreconditionError("lyapunov: ground-state overlap below the floor");
    C1Result c1 = check_C1(p);
    if (!c1.passed)
        throw PreconditionError("lyapunov: (C1) fails at k=" + std::to_string(c1.argmin_k));
    C2Result c2 = check_C2(p.spectrum);
    if (!c2.passed)
        throw PreconditionError("lyapunov: (C2) fails, gap " + std::to_string(c2.min_gap) +
                                " at (j,p,q)=(" + std::to_string(c2.witness.j) + "," +
                                std::to_string(c2.witness.p) + "," + std::to_string(c2.witness.q) +
                                ")");
}

// First-variation density g(t): dL(v) = int v(t) g(t) dt for the
// linearization around the free trajectory of psi.
std::vector<double> variation_density(const ModalState& psi, const SystemParams& p, double gamma,
                                      double t_pulse, int n_steps) {
    const int K = p.k_max();
    const double dt = t_pulse / n_steps;
    const Eigen::VectorXd& lambda = p.spectrum.eigenvalues;

    Eigen::VectorXd w(K);
    w(0) = -1.0;
    for (int k = 2; k <= K; ++k) w(k - 1) = gamma * std::pow(lambda(k - 1), 6.0);

    Eigen::VectorXcd rot(K), phase(K);
    for (int k = 0; k < K; ++k) {
        rot(k) = std::exp(Complex(0.0, lambda(k) * dt));
        phase(k) = 1.0;
    }

    std::vector<double> g(n_steps + 1);
    Eigen::VectorXcd tmp(K);
    for (int j = 0; j <= n_steps; ++j) {
        // g = 2 Re( i sum_k w_k conj(c_k) p_k [B1 (c .* conj(p))]_k )
        tmp.noalias() = p.coupling1 * psi.coeffs.cwiseProduct(phase.conjugate());
        Complex acc = 0.0;
        for (int k = 0; k < K; ++k)
            acc += w(k) * std::conj(psi.coeffs(k)) * phase(k) * tmp(k);
        g[j] = 2.0 * (Complex(0.0, 1.0) * acc).real();
        phase.array() *= rot.array();
    }
    return g;
}

std::vector<int> pick_resonant_modes(const ModalState& psi, const LyapunovConfig& cfg) {
    if (!cfg.resonant_modes.empty()) return cfg.resonant_modes;
    std::vector<int> candidates;
    for (int k = 2; k <= psi.modes(); ++k)
        if (std::abs(psi.coeffs(k - 1)) > 1e-6) candidates.push_back(k);
    if (candidates.empty()) {
        // only numerical dust above mode 1: aim at the largest remnant
        int best = 2;
        for (int k = 2; k <= psi.modes(); ++k)
            if (std::abs(psi.coeffs(k - 1)) > std::abs(psi.coeffs(best - 1))) best = k;
        return {best};
    }
    std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
        return std::abs(psi.coeffs(a - 1)) > std::abs(psi.coeffs(b - 1));
    });
    if (candidates.size() > 8) candidates.resize(8);
    std::sort(candidates.begin(), candidates.end());
    return candidates;
}

double frequency_separation(const std::vector<double>& omegas) {
    // minimal separation between the used frequencies, and from zero
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        gap = std::min(gap, omegas[i]);
        for (std::size_t j = i + 1; j < omegas.size(); ++j)
            gap = std::min(gap, std::abs(omegas[j] - omegas[i]));
    }
    return gap;
}

}  // namespace

double lyapunov_value(const ModalState& psi, const Spectrum& spec, double gamma) {
    if (gamma <= 0) throw PreconditionError("lyapunov_value: gamma must be positive");
    require_unit(psi);
    return gamma * mode_weight_sum(psi, spec) + 1.0 - std::norm(psi.coeffs(0));
}

double choose_gamma(const ModalState& psi0, const Spectrum& spec) {
    require_unit(psi0);
    const double overlap2 = std::norm(psi0.coeffs(0));
    if (std::sqrt(overlap2) <= kOverlapFloor)
        throw PreconditionError("choose_gamma: zero ground-state overlap");
    const double tail = mode_weight_sum(psi0, spec);
    if (tail == 0.0) return 1e-12;  // psi0 is the ground state itself
    return overlap2 / (2.0 * tail);
}

double phase_min_h5_distance(const ModalState& psi) {
    double acc = (1.0 - std::abs(psi.coeffs(0))) * (1.0 - std::abs(psi.coeffs(0)));
    for (int k = 2; k <= psi.modes(); ++k)
        acc += std::pow(static_cast<double>(k), 10.0) * std::norm(psi.coeffs(k - 1));
    return std::sqrt(acc);
}

DescentDirection descent_direction(const ModalState& psi, const SystemParams& p, double gamma,
                                   const LyapunovConfig& cfg) {
    const Eigen::VectorXd& lambda = p.spectrum.eigenvalues;
    DescentDirection dir;
    dir.modes = pick_resonant_modes(psi, cfg);

    std::vector<double> omegas;
    for (int k : dir.modes) {
        if (k < 2 || k > p.k_max())
            throw PreconditionError("descent_direction: resonant mode out of range");
        omegas.push_back(lambda(k - 1) - lambda(0));
    }
    const double gap = frequency_separation(omegas);
    dir.t_pulse = cfg.pulse_duration > 0 ? cfg.pulse_duration : 4.0 * M_PI / gap;

    const int n_steps = default_time_steps(dir.t_pulse, p, cfg.pulse_amplitude);
    const std::vector<double> g = variation_density(psi, p, gamma, dir.t_pulse, n_steps);
    const double dt = dir.t_pulse / n_steps;

    // project g onto the pulse family env * {sin, cos}(omega t)
    dir.beta.resize(dir.modes.size());
    dir.theta.resize(dir.modes.size());
    std::vector<double> response(dir.modes.size());
    for (std::size_t i = 0; i < dir.modes.size(); ++i) {
        const Complex rot = std::exp(Complex(0.0, omegas[i] * dt));
        Complex phase(1.0, 0.0);
        double gs = 0.0, gc = 0.0;
        for (int j = 0; j <= n_steps; ++j) {
            const double t = j * dt;
            const double env = std::sin(M_PI * t / dir.t_pulse);
            const double weight = (j == 0 || j == n_steps) ? 0.5 : 1.0;
            gs += weight * env * env * phase.imag() * g[j];
            gc += weight * env * env * phase.real() * g[j];
            phase *= rot;
        }
        gs *= dt;
        gc *= dt;
        response[i] = std::hypot(gs, gc);
        dir.theta[i] = std::atan2(-gc, -gs);
    }

    // Phases come from the first variation (the sign rule); the carrier
    // weights equalize the per-mode emptying amplitude |c_k| / |B1[1,k]|,
    // otherwise a strongly coupled, already-converged mode pins the line
    // search at a tiny amplitude while weakly coupled remnants crawl.
    const double max_response = *std::max_element(response.begin(), response.end());
    double max_coupling = 0.0;
    for (int k : dir.modes)
        max_coupling = std::max(max_coupling, std::abs(p.coupling1(0, k - 1)));
    for (std::size_t i = 0; i < dir.modes.size(); ++i) {
        if (response[i] <= 1e-6 * max_response) {
            dir.beta[i] = 0.0;  // no reliable phase for this carrier
            continue;
        }
        const double coupling =
            std::max(std::abs(p.coupling1(0, dir.modes[i] - 1)), 1e-3 * max_coupling);
        dir.beta[i] = std::abs(psi.coeffs(dir.modes[i] - 1)) / coupling;
    }
    const double max_beta = *std::max_element(dir.beta.begin(), dir.beta.end());
    dir.dLda = 0.0;
    if (max_beta > 0) {
        for (auto& b : dir.beta) b /= max_beta;
        for (std::size_t i = 0; i < dir.modes.size(); ++i) dir.dLda -= dir.beta[i] * response[i];
    }
    return dir;
}

ControlSignal descent_pulse(const DescentDirection& dir, double amplitude,
                            const SystemParams& p, double dt) {
    const Eigen::VectorXd& lambda = p.spectrum.eigenvalues;
    const int n_steps = std::max(16, static_cast<int>(std::lround(dir.t_pulse / dt)));
    const double t_pulse = n_steps * dt;
    std::vector<double> omegas;
    for (int k : dir.modes) omegas.push_back(lambda(k - 1) - lambda(0));
    return ControlSignal::sample(t_pulse, n_steps, ControlClass::C20, [&](double t) {
        const double env = std::sin(M_PI * t / t_pulse);
        double carrier = 0.0;
        for (std::size_t i = 0; i < omegas.size(); ++i)
            carrier += dir.beta[i] * std::sin(omegas[i] * t + dir.theta[i]);
        return amplitude * env * env * carrier;
    });
}

namespace {

// Backtracking over the halving ladder, largest amplitude first; candidates
// are evaluated in parallel batches and selected in ladder order, so the
// outcome does not depend on scheduling.
struct LineSearchOutcome {
    bool found = false;
    double amplitude = 0.0;
    ModalState next;
    double lyap_next = 0.0;
};

LineSearchOutcome line_search(const ModalState& psi, const SystemParams& p, double gamma,
                              const DescentDirection& dir, double start_amplitude,
                              double lyap_now, double dt) {
    constexpr int kMaxHalvings = 14;
    LineSearchOutcome out;
    int i = 0;
    while (i < kMaxHalvings && !out.found) {
        const int batch = std::min(kMaxHalvings - i, 4);
        std::vector<ModalState> states(batch);
        std::vector<double> lyaps(batch, std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(static)
        for (int b = 0; b < batch; ++b) {
            try {
                const double a = start_amplitude * std::ldexp(1.0, -(i + b));
                ControlSignal pulse = descent_pulse(dir, a, p, dt);
                states[b] = propagate(psi, pulse, p);
                lyaps[b] = lyapunov_value(states[b], p.spectrum, gamma);
            } catch (const Error&) {
                // candidate rejected (kept at +inf)
            }
        }
        for (int b = 0; b < batch; ++b) {
            if (lyaps[b] < lyap_now) {
                out.found = true;
                out.amplitude = start_amplitude * std::ldexp(1.0, -(i + b));
                out.next = states[b];
                out.lyap_next = lyaps[b];
                break;
            }
        }
        i += batch;
    }
    return out;
}

}  // namespace

DescentResult descent_step(const ModalState& psi, const SystemParams& p,
                           const LyapunovConfig& cfg, std::mt19937_64& rng) {
    require_descent_preconditions(psi, p);
    const double gamma = cfg.gamma > 0 ? cfg.gamma : choose_gamma(psi, p.spectrum);
    const double lyap_now = lyapunov_value(psi, p.spectrum, gamma);
    if (lyap_now <= 0.0)
        throw PreconditionError("descent_step: L(psi) = 0, minimum already attained");

    DescentDirection dir = descent_direction(psi, p, gamma, cfg);
    const double dt = cfg.dt > 0 ? cfg.dt : default_dt(p, cfg.pulse_amplitude);
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);

    for (int attempt = 0; attempt < 4; ++attempt) {
        if (attempt > 0) {
            // trapped: re-randomize the carrier phases
            for (auto& th : dir.theta) th = unif(rng);
            for (auto& b : dir.beta) b = 1.0;
        }
        LineSearchOutcome ls = line_search(psi, p, gamma, dir, cfg.pulse_amplitude, lyap_now, dt);
        if (ls.found) {
            DescentResult res;
            res.pulse = descent_pulse(dir, ls.amplitude, p, dt);
            res.next = ls.next;
            res.lyapunov_before = lyap_now;
            res.lyapunov_after = ls.lyap_next;
            res.amplitude = ls.amplitude;
            return res;
        }
    }
    throw NumericalError("descent_step: no descent found after line-search exhaustion");
}

SteerResult steer_to_ground(const ModalState& psi0, const SystemParams& p, double eps,
                            const LyapunovConfig& cfg, std::mt19937_64& rng) {
    if (eps <= 0) throw PreconditionError("steer_to_ground: eps must be positive");
    require_unit(psi0);
    if (std::abs(psi0.coeffs(0)) <= kOverlapFloor)
        throw PreconditionError("steer_to_ground: ground-state overlap below the floor");

    SteerResult result;
    result.final_state = psi0;
    result.h5_distance = phase_min_h5_distance(psi0);
    result.log.push_back({0, 0.0, std::abs(psi0.coeffs(0)), result.h5_distance, 0.0});
    if (result.h5_distance < eps) {
        result.control = ControlSignal::empty();
        return result;
    }

    LyapunovConfig run_cfg = cfg;
    if (run_cfg.gamma <= 0) run_cfg.gamma = choose_gamma(psi0, p.spectrum);
    if (run_cfg.dt <= 0) run_cfg.dt = default_dt(p, run_cfg.pulse_amplitude);
    result.log.front().lyapunov = lyapunov_value(psi0, p.spectrum, run_cfg.gamma);

    std::vector<ControlSignal> pulses;
    ModalState psi = psi0;
    double cumulative_t = 0.0;
    double last_amplitude = run_cfg.pulse_amplitude;
    for (int it = 1; it <= run_cfg.max_iterations; ++it) {
        LyapunovConfig step_cfg = run_cfg;
        step_cfg.pulse_amplitude = std::min(2.0 * last_amplitude, run_cfg.pulse_amplitude);
        DescentResult step = descent_step(psi, p, step_cfg, rng);
        last_amplitude = step.amplitude;
        psi = step.next;
        pulses.push_back(step.pulse);
        cumulative_t += step.pulse.t_final;

        const double dist = phase_min_h5_distance(psi);
        result.log.push_back(
            {it, step.lyapunov_after, std::abs(psi.coeffs(0)), dist, cumulative_t});
        if (dist < eps) {
            result.final_state = psi;
            result.h5_distance = dist;
            result.control = concatenate(pulses);
            return result;
        }
        const double decrease = step.lyapunov_before - step.lyapunov_after;
        if (decrease < run_cfg.descent_tolerance * std::abs(step.lyapunov_before))
            throw NumericalError("steer_to_ground: descent stagnated at L=" +
                                 std::to_string(step.lyapunov_after));
    }
    throw NumericalError("steer_to_ground: max iterations exceeded, distance " +
                         std::to_string(phase_min_h5_distance(psi)));
}

std::pair<ControlSignal, ModalState> ensure_overlap(const ModalState& psi0,
                                                    const SystemParams& p,
                                                    const LyapunovConfig& cfg,
                                                    std::mt19937_64& rng) {
    require_unit(psi0);
    const double target = std::max(kOverlapFloor, cfg.overlap_target);
    if (std::abs(psi0.coeffs(0)) > target) return {ControlSignal::empty(), psi0};

    const double omega2 = p.spectrum.eigenvalues(1) - p.spectrum.eigenvalues(0);
    const double amp = cfg.pulse_amplitude;
    const double dt = cfg.dt > 0 ? cfg.dt : default_dt(p, amp);
    const double t_raw = cfg.pulse_duration > 0 ? cfg.pulse_duration : 6.0 * M_PI / omega2;
    const int n_steps = std::max(16, static_cast<int>(std::lround(t_raw / dt)));
    const double t_pulse = n_steps * dt;
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);

    std::vector<ControlSignal> pulses;
    ModalState psi = psi0;

    // the first variation of |c_1|^2 vanishes at zero overlap, so the seed
    // pulse is a fixed resonant kick (random phases when it happens to land
    // on a node)
    for (int attempt = 0; attempt < 8 && std::abs(psi.coeffs(0)) <= kOverlapFloor; ++attempt) {
        const double theta = (attempt == 0) ? 0.0 : unif(rng);
        ControlSignal kick =
            ControlSignal::sample(t_pulse, n_steps, ControlClass::C20, [&](double t) {
                const double env = std::sin(M_PI * t / t_pulse);
                return amp * env * env * std::sin(omega2 * t + theta);
            });
        ModalState next = propagate(psi0, kick, p);
        if (std::abs(next.coeffs(0)) > kOverlapFloor) {
            pulses.push_back(kick);
            psi = next;
        }
    }
    if (std::abs(psi.coeffs(0)) <= kOverlapFloor)
        throw NumericalError("ensure_overlap: overlap not created after 8 pulse seeds");

    // grow the overlap with phase-aligned resonant pulses; a vanishing gamma
    // reduces the Lyapunov first variation to the pure |c_1|^2 objective
    constexpr double kGrowthGamma = 1e-300;
    LyapunovConfig grow_cfg = cfg;
    grow_cfg.dt = dt;
    for (int it = 0; it < 400 && std::abs(psi.coeffs(0)) <= target; ++it) {
        DescentDirection dir = descent_direction(psi, p, kGrowthGamma, grow_cfg);
        bool advanced = false;
        for (int halving = 0; halving < 6 && !advanced; ++halving) {
            ControlSignal pulse = descent_pulse(dir, amp * std::ldexp(1.0, -halving), p, dt);
            ModalState next = propagate(psi, pulse, p);
            if (std::abs(next.coeffs(0)) > std::abs(psi.coeffs(0)) * (1.0 + 1e-9)) {
                pulses.push_back(pulse);
                psi = next;
                advanced = true;
            }
        }
        if (!advanced) {
            // stuck on a stationary phase configuration: random re-phasing,
            // kept only while the overlap survives
            for (auto& th : dir.theta) th = unif(rng);
            ControlSignal pulse = descent_pulse(dir, amp, p, dt);
            ModalState next = propagate(psi, pulse, p);
            if (std::abs(next.coeffs(0)) > kOverlapFloor) {
                pulses.push_back(pulse);
                psi = next;
            }
        }
    }
    return {concatenate(pulses), psi};
}

}  // namespace qpol
