// File formats: two-column CSV controls, trajectory/convergence CSVs,
// JSON condition reports and transfer plans, the flat key=value experiment
// config, and the run manifest. All floating-point output uses %.17g so
// identical runs produce bit-identical files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qpol/conditions.hpp"
#include "qpol/dynamics.hpp"
#include "qpol/lyapunov.hpp"
#include "qpol/moments.hpp"
#include "qpol/pipeline.hpp"

namespace qpol {

std::string format_double(double v);

// controls: header "t,u"
void write_control_csv(const std::filesystem::path& path, const ControlSignal& u);
ControlSignal read_control_csv(const std::filesystem::path& path,
                               ControlClass cls = ControlClass::Free);

// trajectories: header "t,re_c1,im_c1,..."
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

// spectra: "k,lambda" plus a text dump of eigenfunctions (x column first)
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spec);
void write_eigenfunctions_txt(const std::filesystem::path& path, const Spectrum& spec);

// states: "k,re,im"
void write_state_csv(const std::filesystem::path& path, const ModalState& state);

void write_steer_log_csv(const std::filesystem::path& path, const std::vector<SteerRecord>& log);
void write_newton_log_csv(const std::filesystem::path& path,
                          const std::vector<NewtonRecord>& log);

std::string condition_report_json(const ConditionReport& plain, const ConditionReport& shifted);

// Plans are stored together with the endpoint states so a replay needs only
// the plan file plus the system config.
struct StoredPlan {
    TransferPlan plan;
    Eigen::VectorXcd initial, target;
    std::string params;
};

std::string plan_json(const TransferPlan& plan, const std::string& params_comment,
                      const Eigen::VectorXcd& initial, const Eigen::VectorXcd& target);
StoredPlan plan_from_json(const std::filesystem::path& path);
void write_plan_json(const std::filesystem::path& path, const TransferPlan& plan,
                     const std::string& params_comment, const Eigen::VectorXcd& initial,
                     const Eigen::VectorXcd& target);

// Flat key = value configuration (lines starting with '#' are comments).
struct ExperimentConfig {
    std::map<std::string, std::string> values;
    std::string raw_text;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    int integer(const std::string& key) const;
    int integer_or(const std::string& key, int fallback) const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// "basis:k", "mix:1=re+imi,2=...", or "file:path" (a state CSV); the result
// is normalized.
ModalState parse_state_spec(const std::string& spec, const Spectrum& sp);

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    const std::string& command, std::uint64_t seed);

}  // namespace qpol
