#include "qpol/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qpol/errors.hpp"

namespace qpol {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw PreconditionError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot open: " + path.string());
    return in;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

json control_to_json(const ControlSignal& u) {
    json j;
    j["t_final"] = u.t_final;
    j["n_steps"] = u.n_steps;
    j["class"] = u.regularity == ControlClass::H10   ? "H10"
                 : u.regularity == ControlClass::C20 ? "C20"
                                                     : "free";
    j["values"] = u.values;
    return j;
}

ControlSignal control_from_json(const json& j) {
    ControlSignal u;
    u.t_final = j.at("t_final").get<double>();
    u.n_steps = j.at("n_steps").get<int>();
    const std::string cls = j.at("class").get<std::string>();
    u.regularity = cls == "H10"   ? ControlClass::H10
                   : cls == "C20" ? ControlClass::C20
                                  : ControlClass::Free;
    u.values = j.at("values").get<std::vector<double>>();
    return u;
}

}  // namespace

void write_control_csv(const std::filesystem::path& path, const ControlSignal& u) {
    auto out = open_out(path);
    out << "t,u\n";
    const double dt = u.dt();
    for (int j = 0; j < static_cast<int>(u.values.size()); ++j)
        out << format_double(j * dt) << "," << format_double(u.values[j]) << "\n";
}

ControlSignal read_control_csv(const std::filesystem::path& path, ControlClass cls) {
    auto in = open_in(path);
    std::string line;
    std::vector<double> ts, us;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == 't') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double t, u;
        if (ls >> t >> u) {
            ts.push_back(t);
            us.push_back(u);
        }
    }
    if (ts.size() < 2) throw PreconditionError("control CSV needs at least two samples");
    const int n = static_cast<int>(ts.size()) - 1;
    const double dt = ts[1] - ts[0];
    for (int j = 1; j <= n; ++j)
        if (std::abs(ts[j] - j * dt) > 1e-9 * std::max(1.0, std::abs(ts[n])))
            throw PreconditionError("control CSV must be on a uniform time grid");
    ControlSignal u;
    u.t_final = ts[n];
    u.n_steps = n;
    u.values = us;
    u.regularity = cls;
    u.validate();
    return u;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    auto out = open_out(path);
    const int K = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
    out << "t";
    for (int k = 1; k <= K; ++k) out << ",re_c" << k << ",im_c" << k;
    out << "\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        out << format_double(traj.times[i]);
        for (int k = 0; k < K; ++k)
            out << "," << format_double(traj.states[i](k).real()) << ","
                << format_double(traj.states[i](k).imag());
        out << "\n";
    }
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spec) {
    auto out = open_out(path);
    out << "k,lambda\n";
    for (int k = 1; k <= spec.k_max; ++k)
        out << k << "," << format_double(spec.lambda(k)) << "\n";
}

void write_eigenfunctions_txt(const std::filesystem::path& path, const Spectrum& spec) {
    auto out = open_out(path);
    out << "# x phi_1 ... phi_" << spec.k_max << "\n";
    for (int j = 0; j < spec.grid.n_interior; ++j) {
        out << format_double(spec.grid.nodes[j]);
        for (int k = 0; k < spec.k_max; ++k)
            out << " " << format_double(spec.eigenfunctions(j, k));
        out << "\n";
    }
}

void write_state_csv(const std::filesystem::path& path, const ModalState& state) {
    auto out = open_out(path);
    out << "k,re,im\n";
    for (int k = 0; k < state.modes(); ++k)
        out << (k + 1) << "," << format_double(state.coeffs(k).real()) << ","
            << format_double(state.coeffs(k).imag()) << "\n";
}

void write_steer_log_csv(const std::filesystem::path& path, const std::vector<SteerRecord>& log) {
    auto out = open_out(path);
    out << "iteration,lyapunov,c1_abs,h5_distance,cumulative_t\n";
    for (const auto& r : log)
        out << r.iteration << "," << format_double(r.lyapunov) << "," << format_double(r.c1_abs)
            << "," << format_double(r.h5_distance) << "," << format_double(r.cumulative_t)
            << "\n";
}

void write_newton_log_csv(const std::filesystem::path& path,
                          const std::vector<NewtonRecord>& log) {
    auto out = open_out(path);
    out << "iteration,defect_l2,residual_max,control_h1\n";
    for (const auto& r : log)
        out << r.iteration << "," << format_double(r.defect_l2) << ","
            << format_double(r.residual_max) << "," << format_double(r.control_h1) << "\n";
}

namespace {

json condition_to_json(const ConditionReport& rep) {
    json j;
    j["k_max"] = rep.k_max;
    j["shifted"] = rep.shifted;
    j["c1"] = {{"passed", rep.c1.passed},
               {"min_coupling", rep.c1.min_coupling},
               {"argmin_k", rep.c1.argmin_k}};
    json viols = json::array();
    for (const auto& w : rep.c2.violations)
        viols.push_back({{"j", w.j}, {"p", w.p}, {"q", w.q}, {"gap", w.gap}});
    j["c2"] = {{"passed", rep.c2.passed},
               {"min_gap", rep.c2.min_gap},
               {"floor_abs", rep.c2.floor_abs},
               {"witness",
                {{"j", rep.c2.witness.j},
                 {"p", rep.c2.witness.p},
                 {"q", rep.c2.witness.q},
                 {"gap", rep.c2.witness.gap}}},
               {"violations", viols}};
    j["c3"] = {{"passed", rep.c3.passed}, {"min_k3_coupling", rep.c3.min_mk},
               {"slope", std::isfinite(rep.c3.slope) ? rep.c3.slope : -1e308}};
    if (rep.c3.zero_witness) j["c3"]["zero_witness_k"] = *rep.c3.zero_witness;
    return j;
}

}  // namespace

std::string condition_report_json(const ConditionReport& plain, const ConditionReport& shifted) {
    json j;
    j["conditions"] = condition_to_json(plain);
    j["conditions_shifted"] = condition_to_json(shifted);
    return j.dump(2);
}

namespace {

json state_to_json(const Eigen::VectorXcd& v) {
    json j = json::array();
    for (int k = 0; k < v.size(); ++k) j.push_back({v(k).real(), v(k).imag()});
    return j;
}

Eigen::VectorXcd state_from_json(const json& j) {
    Eigen::VectorXcd v(j.size());
    for (std::size_t k = 0; k < j.size(); ++k)
        v(k) = Complex(j[k][0].get<double>(), j[k][1].get<double>());
    return v;
}

}  // namespace

std::string plan_json(const TransferPlan& plan, const std::string& params_comment,
                      const Eigen::VectorXcd& initial, const Eigen::VectorXcd& target) {
    json j;
    j["params"] = params_comment;
    j["total_t"] = plan.total_t;
    j["achieved_error"] = plan.achieved_error;
    j["initial_state"] = state_to_json(initial);
    j["target_state"] = state_to_json(target);
    json segs = json::array();
    for (const auto& seg : plan.segments) {
        json s;
        s["label"] = seg.label;
        s["control"] = control_to_json(seg.control);
        segs.push_back(s);
    }
    j["segments"] = segs;
    return j.dump();
}

void write_plan_json(const std::filesystem::path& path, const TransferPlan& plan,
                     const std::string& params_comment, const Eigen::VectorXcd& initial,
                     const Eigen::VectorXcd& target) {
    auto out = open_out(path);
    out << plan_json(plan, params_comment, initial, target) << "\n";
}

StoredPlan plan_from_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    json j;
    in >> j;
    StoredPlan sp;
    sp.params = j.value("params", "");
    sp.plan.total_t = j.at("total_t").get<double>();
    sp.plan.achieved_error = j.at("achieved_error").get<double>();
    sp.initial = state_from_json(j.at("initial_state"));
    sp.target = state_from_json(j.at("target_state"));
    for (const auto& s : j.at("segments"))
        sp.plan.segments.push_back({s.at("label").get<std::string>(),
                                    control_from_json(s.at("control"))});
    return sp;
}

std::string ExperimentConfig::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw PreconditionError("config: missing key '" + key + "'");
    return it->second;
}

std::string ExperimentConfig::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double ExperimentConfig::number(const std::string& key) const {
    const std::string s = get(key);
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw PreconditionError("config: key '" + key + "' is not a number: " + s);
    }
}

double ExperimentConfig::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

int ExperimentConfig::integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v)) throw PreconditionError("config: key '" + key + "' must be integer");
    return static_cast<int>(v);
}

int ExperimentConfig::integer_or(const std::string& key, int fallback) const {
    return has(key) ? integer(key) : fallback;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    cfg.raw_text = text;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw PreconditionError("config: line " + std::to_string(lineno) +
                                    " is not 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw PreconditionError("config: empty key at line " +
                                                 std::to_string(lineno));
        cfg.values[key] = value;
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [k, v] : cfg.values) {
        h = fnv1a(k.data(), k.size(), h);
        h = fnv1a("=", 1, h);
        h = fnv1a(v.data(), v.size(), h);
    }
    return h;
}

ModalState parse_state_spec(const std::string& spec, const Spectrum& sp) {
    auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw PreconditionError("state spec needs 'basis:k', 'mix:...' or 'file:path': " + spec);
    const std::string kind = spec.substr(0, colon);
    const std::string rest = spec.substr(colon + 1);

    ModalState s;
    s.coeffs = Eigen::VectorXcd::Zero(sp.k_max);
    s.spectrum_id = sp.id;
    if (kind == "basis") {
        const int k = std::stoi(rest);
        if (k < 1 || k > sp.k_max) throw PreconditionError("state spec: mode out of range");
        s.coeffs(k - 1) = 1.0;
        return s;
    }
    if (kind == "mix") {
        // mix:1=0.707+0i,2=0.5-0.5i
        std::istringstream ss(rest);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto eq = item.find('=');
            if (eq == std::string::npos)
                throw PreconditionError("state spec: bad mix item '" + item + "'");
            const int k = std::stoi(trim(item.substr(0, eq)));
            if (k < 1 || k > sp.k_max) throw PreconditionError("state spec: mode out of range");
            std::string num = trim(item.substr(eq + 1));
            double re = 0, im = 0;
            char sign = '+';
            auto ipos = num.find('i');
            if (ipos == std::string::npos) {
                re = std::stod(num);
            } else {
                // split re and im at the last +/- that is not an exponent sign
                std::size_t split = std::string::npos;
                for (std::size_t i = 1; i + 1 < num.size(); ++i) {
                    if ((num[i] == '+' || num[i] == '-') && num[i - 1] != 'e' && num[i - 1] != 'E')
                        split = i;
                }
                if (split == std::string::npos)
                    throw PreconditionError("state spec: bad complex '" + num + "'");
                re = std::stod(num.substr(0, split));
                sign = num[split];
                const std::string imtxt = num.substr(split + 1, num.size() - split - 2);
                im = imtxt.empty() ? 1.0 : std::stod(imtxt);
                if (sign == '-') im = -im;
            }
            s.coeffs(k - 1) = Complex(re, im);
        }
    } else if (kind == "file") {
        auto in = open_in(rest);
        std::string line;
        while (std::getline(in, line)) {
            line = trim(line);
            if (line.empty() || line[0] == '#' || line[0] == 'k') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            int k;
            double re, im;
            if (ls >> k >> re >> im) {
                if (k < 1 || k > sp.k_max)
                    throw PreconditionError("state file: mode out of range");
                s.coeffs(k - 1) = Complex(re, im);
            }
        }
    } else {
        throw PreconditionError("state spec: unknown kind '" + kind + "'");
    }
    const double n = s.coeffs.norm();
    if (n == 0.0) throw PreconditionError("state spec: zero state");
    s.coeffs /= n;
    return s;
}

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    const std::string& command, std::uint64_t seed) {
    json j;
    j["tool"] = "qpol";
    j["version"] = "0.1.0";
    j["command"] = command;
    j["config_hash"] = config_hash(cfg);
    j["seed"] = seed;
    auto out = open_out(dir / "manifest.json");
    out << j.dump(2) << "\n";
}

}  // namespace qpol
