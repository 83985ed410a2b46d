// qpol command-line harness. Every subcommand reads a flat key = value
// config, writes machine-readable outputs plus a manifest into --out, and
// exits 0 on success, 2 on config/precondition errors, 3 on numerical
// failures, 4 on verification failures.
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <random>

#include <CLI11.hpp>

#include "qpol/conditions.hpp"
#include "qpol/errors.hpp"
#include "qpol/io.hpp"
#include "qpol/pipeline.hpp"

using namespace qpol;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::int64_t seed_override = -1;
    bool quiet = false;
};

struct Session {
    ExperimentConfig cfg;
    fs::path out;
    std::uint64_t seed = 0;
    bool quiet = false;

    void log(const char* fmt, auto... args) const {
        if (!quiet) {
            std::printf(fmt, args...);
            std::printf("\n");
        }
    }
};

Session open_session(const CommonArgs& args, const std::string& command) {
    Session s;
    s.cfg = load_config(args.config_path);
    s.out = args.out_dir;
    s.quiet = args.quiet;
    fs::create_directories(s.out);
    s.seed = args.seed_override >= 0 ? static_cast<std::uint64_t>(args.seed_override)
                                     : static_cast<std::uint64_t>(s.cfg.number_or("seed", 12345));
    write_manifest(s.out, s.cfg, command, s.seed);
    return s;
}

SystemParams load_system(const Session& s) {
    const int n = s.cfg.integer_or("n_interior", 1999);
    const int k_max = s.cfg.integer_or("k_max", 30);
    auto grid = SpatialGrid::uniform(n);
    PotentialFn V = make_potential(grid, s.cfg.get_or("potential", "zero"));
    PotentialFn mu1 = make_potential(grid, s.cfg.get_or("dipole", "zero"));
    PotentialFn mu2 = make_potential(grid, s.cfg.get_or("polarizability", "zero"));
    return make_system_params(grid, V, mu1, mu2, k_max);
}

LyapunovConfig steer_config(const Session& s) {
    LyapunovConfig cfg;
    cfg.gamma = s.cfg.number_or("gamma", 0.0);
    cfg.pulse_amplitude = s.cfg.number_or("pulse_amplitude", 0.3);
    cfg.pulse_duration = s.cfg.number_or("pulse_duration", 0.0);
    cfg.descent_tolerance = s.cfg.number_or("descent_tolerance", 1e-9);
    cfg.max_iterations = s.cfg.integer_or("max_iterations", 600);
    cfg.dt = s.cfg.number_or("dt", 0.0);
    cfg.overlap_target = s.cfg.number_or("overlap_target", 0.3);
    return cfg;
}

TransferOptions transfer_options(const Session& s) {
    TransferOptions o;
    o.dt = s.cfg.number_or("dt", 0.0);
    o.t_local = s.cfg.number_or("t_local", 1.0);
    o.t_ramp = s.cfg.number_or("t_ramp", 1.0);
    o.steer = steer_config(s);
    o.newton.radius = s.cfg.number_or("newton_radius", 5e-2);
    o.newton.max_iterations = s.cfg.integer_or("newton_max_iterations", 10);
    o.seed = s.seed;
    return o;
}

std::string system_comment(const Session& s) {
    return "potential=" + s.cfg.get_or("potential", "zero") +
           " dipole=" + s.cfg.get_or("dipole", "zero") +
           " polarizability=" + s.cfg.get_or("polarizability", "zero") +
           " n_interior=" + std::to_string(s.cfg.integer_or("n_interior", 1999)) +
           " k_max=" + std::to_string(s.cfg.integer_or("k_max", 30));
}

int run_spectrum(const CommonArgs& args) {
    Session s = open_session(args, "spectrum");
    SystemParams p = load_system(s);
    write_spectrum_csv(s.out / "spectrum.csv", p.spectrum);
    write_eigenfunctions_txt(s.out / "eigenfunctions.txt", p.spectrum);
    s.log("spectrum: k_max=%d, lambda_1=%.12g, lambda_K=%.12g", p.k_max(),
          p.spectrum.lambda(1), p.spectrum.lambda(p.k_max()));
    return 0;
}

int run_propagate(const CommonArgs& args) {
    Session s = open_session(args, "propagate");
    SystemParams p = load_system(s);
    ModalState psi0 = parse_state_spec(s.cfg.get("initial_state"), p.spectrum);

    ControlSignal u;
    if (s.cfg.has("control_file")) {
        u = read_control_csv(s.cfg.get("control_file"));
    } else {
        const double T = s.cfg.number("t_final");
        int n_steps = s.cfg.integer_or("n_steps", 0);
        if (n_steps <= 0) n_steps = default_time_steps(T, p, 1.0);
        u = ControlSignal::zero(T, n_steps, ControlClass::H10);
    }
    const int stride = s.cfg.integer_or("store_stride", std::max(1, u.n_steps / 1000));
    Trajectory traj = propagate_trajectory(psi0, u, p, stride);
    write_trajectory_csv(s.out / "trajectory.csv", traj);
    ModalState end;
    end.coeffs = traj.states.back();
    end.spectrum_id = p.spectrum.id;
    write_state_csv(s.out / "final_state.csv", end);
    s.log("propagate: T=%g, %d steps, final norm defect %.3g", u.t_final, u.n_steps,
          std::abs(end.norm() - 1.0));
    return 0;
}

int run_check_conditions(const CommonArgs& args) {
    Session s = open_session(args, "check-conditions");
    SystemParams p = load_system(s);
    ConditionReport plain = check_conditions(p);
    ConditionReport shifted = check_shifted(p);
    const std::string json_text = condition_report_json(plain, shifted);
    {
        std::ofstream out(s.out / "conditions.json");
        out << json_text << "\n";
    }
    s.log("conditions: C1 %s (min %.3g), C2 %s (gap %.3g), C3 %s (min k^3|B| %.3g)",
          plain.c1.passed ? "pass" : "FAIL", plain.c1.min_coupling,
          plain.c2.passed ? "pass" : "FAIL", plain.c2.min_gap,
          plain.c3.passed ? "pass" : "FAIL", plain.c3.min_mk);
    s.log("shifted:    C2' %s (gap %.3g), C3' %s (min k^3|B| %.3g)",
          shifted.c2.passed ? "pass" : "FAIL", shifted.c2.min_gap,
          shifted.c3.passed ? "pass" : "FAIL", shifted.c3.min_mk);
    return 0;
}

int run_lyapunov_steer(const CommonArgs& args) {
    Session s = open_session(args, "lyapunov-steer");
    SystemParams p = load_system(s);
    ModalState psi0 = parse_state_spec(s.cfg.get("initial_state"), p.spectrum);
    const double eps = s.cfg.number_or("eps", 5e-2);
    LyapunovConfig cfg = steer_config(s);
    std::mt19937_64 rng(s.seed);

    auto [overlap_pulse, psi1] = ensure_overlap(psi0, p, cfg, rng);
    SteerResult res = steer_to_ground(psi1, p, eps, cfg, rng);
    ControlSignal full = concatenate({overlap_pulse, res.control});
    write_control_csv(s.out / "control.csv", full);
    write_steer_log_csv(s.out / "convergence.csv", res.log);
    write_state_csv(s.out / "final_state.csv", res.final_state);
    s.log("steer: %zu descent steps, T=%g, final H5 distance %.3g", res.log.size() - 1,
          full.t_final, res.h5_distance);
    return 0;
}

int run_local_control(const CommonArgs& args) {
    Session s = open_session(args, "local-control");
    SystemParams p = load_system(s);
    ModalState target = parse_state_spec(s.cfg.get("target_state"), p.spectrum);
    const double T = s.cfg.number_or("t_local", 1.0);
    const double tol = s.cfg.number_or("tol", 1e-6);
    NewtonOptions opts;
    opts.radius = s.cfg.number_or("newton_radius", 5e-2);
    opts.max_iterations = s.cfg.integer_or("newton_max_iterations", 10);
    opts.n_steps = s.cfg.integer_or("n_steps", 0);

    std::vector<NewtonRecord> log;
    ControlSignal u = local_exact_control(target, T, p, tol, opts, &log);
    write_control_csv(s.out / "control.csv", u);
    write_newton_log_csv(s.out / "newton.csv", log);
    s.log("local-control: %zu Newton iterations, final defect %.3g", log.size() - 1,
          log.back().defect_l2);
    return 0;
}

int run_global_transfer(const CommonArgs& args) {
    Session s = open_session(args, "global-transfer");
    SystemParams p = load_system(s);
    ModalState psi0 = parse_state_spec(s.cfg.get("initial_state"), p.spectrum);
    ModalState psif = parse_state_spec(s.cfg.get("target_state"), p.spectrum);
    const double eps = s.cfg.number_or("eps", 5e-2);
    TransferOptions opts = transfer_options(s);
    const std::string mode = s.cfg.get_or("transfer", "basic");

    TransferPlan plan;
    if (mode == "shifted") {
        plan = global_transfer_shifted(psi0, psif, p, eps, opts);
    } else if (mode == "basic") {
        plan = global_transfer_basic(psi0, psif, p, eps, opts);
    } else {
        throw PreconditionError("config: transfer must be 'basic' or 'shifted'");
    }
    write_plan_json(s.out / "plan.json", plan, system_comment(s), psi0.coeffs, psif.coeffs);
    write_control_csv(s.out / "control.csv", plan_control(plan));
    ModalState end = propagate(psi0, plan_control(plan), p);
    write_state_csv(s.out / "final_state.csv", end);
    s.log("global-transfer (%s): %zu segments, T=%g, achieved error %.6g", mode.c_str(),
          plan.segments.size(), plan.total_t, plan.achieved_error);
    return 0;
}

int run_replay(const CommonArgs& args, const std::string& plan_path) {
    Session s = open_session(args, "replay");
    SystemParams p = load_system(s);
    StoredPlan stored = plan_from_json(plan_path);
    if (stored.initial.size() != p.k_max())
        throw PreconditionError("replay: plan truncation does not match the config");
    ModalState psi0, psif;
    psi0.coeffs = stored.initial;
    psi0.spectrum_id = p.spectrum.id;
    psif.coeffs = stored.target;
    psif.spectrum_id = p.spectrum.id;
    const double err = replay(stored.plan, psi0, psif, p);
    {
        std::ofstream out(s.out / "replay.json");
        out << "{\"achieved_error\":" << format_double(err)
            << ",\"stored_error\":" << format_double(stored.plan.achieved_error) << "}\n";
    }
    s.log("replay: achieved error %.17g (stored %.17g)", err, stored.plan.achieved_error);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qpol: control synthesis for the 1D Schrodinger equation with dipole and "
                 "polarizability coupling"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string plan_path;

    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* opt = sub->add_option("--config", args.config_path, "experiment config file");
        if (needs_config) opt->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed_override, "override the config seed");
        sub->add_flag("--quiet", args.quiet, "suppress progress output");
    };

    add_common(app.add_subcommand("spectrum", "eigenvalue table and eigenfunction dump"));
    add_common(app.add_subcommand("propagate", "integrate the controlled equation"));
    add_common(app.add_subcommand("check-conditions", "audit (C1)/(C2)/(C3) and (C2')/(C3')"));
    add_common(app.add_subcommand("lyapunov-steer", "descent control toward the ground state"));
    add_common(app.add_subcommand("local-control", "Newton/moment control near the ground state"));
    add_common(app.add_subcommand("global-transfer", "full state-transfer pipeline"));
    auto* replay_cmd = app.add_subcommand("replay", "re-simulate a stored plan");
    add_common(replay_cmd);
    replay_cmd->add_option("--plan", plan_path, "stored plan.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("spectrum")) return run_spectrum(args);
        if (app.got_subcommand("propagate")) return run_propagate(args);
        if (app.got_subcommand("check-conditions")) return run_check_conditions(args);
        if (app.got_subcommand("lyapunov-steer")) return run_lyapunov_steer(args);
        if (app.got_subcommand("local-control")) return run_local_control(args);
        if (app.got_subcommand("global-transfer")) return run_global_transfer(args);
        if (app.got_subcommand("replay")) return run_replay(args, plan_path);
    } catch (const PreconditionError& e) {
        std::fprintf(stderr, "{\"error\":\"precondition\",\"message\":\"%s\"}\n", e.what());
        return 2;
    } catch (const VerificationError& e) {
        std::fprintf(stderr, "{\"error\":\"verification\",\"message\":\"%s\"}\n", e.what());
        return 4;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "{\"error\":\"numerical\",\"message\":\"%s\"}\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "{\"error\":\"internal\",\"message\":\"%s\"}\n", e.what());
        return 3;
    }
    return 2;
}
