#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypstab/controller.hpp"
#include "hypstab/csv.hpp"
#include "hypstab/errors.hpp"
#include "hypstab/kernel_solver.hpp"
#include "hypstab/profile.hpp"
#include "hypstab/simulator.hpp"
#include "hypstab/transport_geometry.hpp"
#include "hypstab/volterra.hpp"

namespace hypstab {

// ============================================================================
// Experiment configuration
// ============================================================================

enum class RunMode { OpenLoop, ClosedLoop, Both, KernelsOnly, TargetCheck };

inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::OpenLoop: return "open-loop";
        case RunMode::ClosedLoop: return "closed-loop";
        case RunMode::Both: return "both";
        case RunMode::KernelsOnly: return "kernels-only";
        case RunMode::TargetCheck: return "target-check";
    }
    return "?";
}

struct CoefficientSpec {
    enum class Kind { PaperEq60, Constant, CustomSamples } kind = Kind::PaperEq60;
    double lambda = 1.0, mu = 1.0, b = 0.0, c = 0.0;  // Constant
    std::string path;                                 // CustomSamples
};

struct ExperimentConfig {
    CoefficientSpec coefficients;
    RunMode mode = RunMode::Both;
    int forced_case = 0;  // 0 = auto
    KernelSolveOptions kernel;
    std::size_t phi_nodes = 2048;
    std::size_t profile_nodes = 512;
    SimConfig plant;
    std::string initial = "paper";  // paper | zero | bump
    double classify_tol = 1e-10;
    double volterra_tol = 1e-12;
    std::string output_dir = "out";
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) { ok = true; break; }
        }
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("key '") + key + "' has the wrong type");
    }
}

}  // namespace detail

/// Full schema validation with defaults applied; unknown keys rejected.
inline ExperimentConfig validate_config(const nlohmann::json& root) {
    if (!root.is_object()) throw ConfigError("config must be a JSON object");

    std::vector<std::string> missing;
    if (!root.contains("coefficients")) missing.push_back("coefficients");
    if (!root.contains("mode")) missing.push_back("mode");
    if (!missing.empty()) {
        std::string msg = "missing required key(s): ";
        for (std::size_t i = 0; i < missing.size(); ++i) {
            if (i) msg += ", ";
            msg += missing[i];
        }
        throw ConfigError(msg);
    }
    detail::reject_unknown_keys(root, "config",
                                {"coefficients", "mode", "case", "kernel", "phi_nodes",
                                 "profile_nodes", "plant", "initial", "classify_tol",
                                 "volterra_tol", "output_dir"});

    ExperimentConfig cfg;

    const auto& co = root.at("coefficients");
    if (!co.is_object() || !co.contains("kind")) {
        throw ConfigError("coefficients must be an object with a 'kind'");
    }
    const std::string kind = co.at("kind").get<std::string>();
    if (kind == "paper-eq60") {
        detail::reject_unknown_keys(co, "coefficients", {"kind"});
        cfg.coefficients.kind = CoefficientSpec::Kind::PaperEq60;
    } else if (kind == "constant") {
        detail::reject_unknown_keys(co, "coefficients", {"kind", "lambda", "mu", "b", "c"});
        cfg.coefficients.kind = CoefficientSpec::Kind::Constant;
        cfg.coefficients.lambda = detail::get_or(co, "lambda", 1.0);
        cfg.coefficients.mu = detail::get_or(co, "mu", 1.0);
        cfg.coefficients.b = detail::get_or(co, "b", 0.0);
        cfg.coefficients.c = detail::get_or(co, "c", 0.0);
        if (!(cfg.coefficients.lambda > 0.0) || !(cfg.coefficients.mu > 0.0)) {
            throw ConfigError("constant speeds must be positive");
        }
    } else if (kind == "custom-samples") {
        detail::reject_unknown_keys(co, "coefficients", {"kind", "path"});
        cfg.coefficients.kind = CoefficientSpec::Kind::CustomSamples;
        cfg.coefficients.path = detail::get_or<std::string>(co, "path", "");
        if (cfg.coefficients.path.empty()) throw ConfigError("custom-samples needs a 'path'");
        if (!std::filesystem::exists(cfg.coefficients.path)) {
            throw ConfigError("sample file does not exist: " + cfg.coefficients.path);
        }
    } else {
        throw ConfigError("coefficients.kind must be paper-eq60 | constant | custom-samples");
    }

    const std::string mode = root.at("mode").get<std::string>();
    if (mode == "open-loop") cfg.mode = RunMode::OpenLoop;
    else if (mode == "closed-loop") cfg.mode = RunMode::ClosedLoop;
    else if (mode == "both") cfg.mode = RunMode::Both;
    else if (mode == "kernels-only") cfg.mode = RunMode::KernelsOnly;
    else if (mode == "target-check") cfg.mode = RunMode::TargetCheck;
    else throw ConfigError("mode must be open-loop | closed-loop | both | kernels-only | target-check");

    const std::string cs = detail::get_or<std::string>(root, "case", "auto");
    if (cs == "auto") cfg.forced_case = 0;
    else if (cs == "1" || cs == "2" || cs == "3") cfg.forced_case = cs[0] - '0';
    else throw ConfigError("case must be auto | 1 | 2 | 3");

    if (root.contains("kernel")) {
        const auto& k = root.at("kernel");
        detail::reject_unknown_keys(k, "kernel", {"n_w", "n_s", "tol", "max_iterations", "threads"});
        cfg.kernel.n_w = detail::get_or<std::size_t>(k, "n_w", cfg.kernel.n_w);
        cfg.kernel.n_s = detail::get_or<std::size_t>(k, "n_s", cfg.kernel.n_s);
        cfg.kernel.tol = detail::get_or(k, "tol", cfg.kernel.tol);
        cfg.kernel.max_iterations =
            detail::get_or<std::size_t>(k, "max_iterations", cfg.kernel.max_iterations);
        cfg.kernel.threads = detail::get_or<unsigned>(k, "threads", cfg.kernel.threads);
    }
    if (cfg.kernel.n_w < 33 || cfg.kernel.n_s < 33) {
        throw ConfigError("kernel grid must be at least 33x33");
    }
    if (!(cfg.kernel.tol > 0.0)) throw ConfigError("kernel.tol must be positive");

    cfg.phi_nodes = detail::get_or<std::size_t>(root, "phi_nodes", cfg.phi_nodes);
    if (cfg.phi_nodes < 16) throw ConfigError("phi_nodes must be at least 16");
    cfg.profile_nodes = detail::get_or<std::size_t>(root, "profile_nodes", cfg.profile_nodes);
    if (cfg.profile_nodes < 16) throw ConfigError("profile_nodes must be at least 16");

    if (root.contains("plant")) {
        const auto& p = root.at("plant");
        detail::reject_unknown_keys(p, "plant", {"n_x", "cfl", "t_final", "record_every"});
        cfg.plant.n_x = detail::get_or<std::size_t>(p, "n_x", cfg.plant.n_x);
        cfg.plant.cfl = detail::get_or(p, "cfl", cfg.plant.cfl);
        cfg.plant.t_final = detail::get_or(p, "t_final", cfg.plant.t_final);
        cfg.plant.record_every = detail::get_or<std::size_t>(p, "record_every", cfg.plant.record_every);
    }
    cfg.plant.validate();

    cfg.initial = detail::get_or<std::string>(root, "initial", cfg.initial);
    if (cfg.initial != "paper" && cfg.initial != "zero" && cfg.initial != "bump") {
        throw ConfigError("initial must be paper | zero | bump");
    }
    cfg.classify_tol = detail::get_or(root, "classify_tol", cfg.classify_tol);
    cfg.volterra_tol = detail::get_or(root, "volterra_tol", cfg.volterra_tol);
    cfg.output_dir = detail::get_or<std::string>(root, "output_dir", cfg.output_dir);
    return cfg;
}

inline ExperimentConfig validate_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw ConfigError("missing required key(s): coefficients, mode");
        }
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return validate_config(j);
}

// ============================================================================
// Profile and initial-data construction
// ============================================================================

inline CoefficientProfile build_profile(const ExperimentConfig& cfg) {
    switch (cfg.coefficients.kind) {
        case CoefficientSpec::Kind::PaperEq60:
            return paper_eq60_profile(cfg.profile_nodes);
        case CoefficientSpec::Kind::Constant:
            return constant_profile(cfg.coefficients.lambda, cfg.coefficients.mu,
                                    cfg.coefficients.b, cfg.coefficients.c, cfg.profile_nodes);
        case CoefficientSpec::Kind::CustomSamples: {
            CsvTable t = read_csv(cfg.coefficients.path);
            auto col = [&](const std::string& name) -> std::optional<std::size_t> {
                for (std::size_t i = 0; i < t.header.size(); ++i) {
                    if (t.header[i] == name) return i;
                }
                return std::nullopt;
            };
            for (const char* req : {"w", "lambda", "mu", "b", "c"}) {
                if (!col(req)) throw ConfigError(cfg.coefficients.path + ": missing column '" + req + "'");
            }
            const std::size_t n = t.rows.size();
            if (n < 17) throw ConfigError(cfg.coefficients.path + ": need at least 17 sample rows");
            const std::size_t iw = *col("w");
            std::vector<double> la(n), mu(n), b(n), c(n);
            const double dw = 2.0 / static_cast<double>(n - 1);
            for (std::size_t r = 0; r < n; ++r) {
                const double expect = -1.0 + dw * static_cast<double>(r);
                if (std::fabs(t.rows[r][iw] - expect) > 1e-9) {
                    throw ConfigError(cfg.coefficients.path + ": w column must be uniform over [-1,1]");
                }
                la[r] = t.rows[r][*col("lambda")];
                mu[r] = t.rows[r][*col("mu")];
                b[r] = t.rows[r][*col("b")];
                c[r] = t.rows[r][*col("c")];
                if (!(la[r] > 0.0) || !(mu[r] > 0.0)) {
                    throw ConfigError(cfg.coefficients.path + ": speed columns must be strictly positive");
                }
            }
            if (col("a") || col("d")) {
                std::vector<double> a(n, 0.0), d(n, 0.0);
                for (std::size_t r = 0; r < n; ++r) {
                    if (col("a")) a[r] = t.rows[r][*col("a")];
                    if (col("d")) d[r] = t.rows[r][*col("d")];
                }
                require_zero_diagonal(a, d);
            }
            return CoefficientProfile::from_samples(std::move(la), std::move(mu), std::move(b),
                                                    std::move(c));
        }
    }
    throw ConfigError("unreachable coefficient kind");
}

inline double smooth_bump(double w, double center, double radius) {
    const double x = (w - center) / radius;
    if (std::fabs(x) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - x * x));
}

/// Smooth over [-1,1], vanishing at both ends; gentle derivatives make it the
/// right probe for convergence-order studies.
inline double trig_hump(double w) { return 0.5 * (1.0 + std::cos(3.14159265358979323846 * w)); }

inline std::pair<std::function<double(double)>, std::function<double(double)>> initial_data(
    const std::string& kind) {
    if (kind == "zero") {
        return {[](double) { return 0.0; }, [](double) { return 0.0; }};
    }
    if (kind == "bump") {
        return {[](double w) { return smooth_bump(w, -0.3, 0.4); },
                [](double w) { return smooth_bump(w, 0.3, 0.4); }};
    }
    // "paper": u0 = w^2, v0 = e^w
    return {[](double w) { return w * w; }, [](double w) { return std::exp(w); }};
}

// ============================================================================
// Artifact writers
// ============================================================================

namespace detail {

inline void write_gains_csv(std::ostream& os, const ControlGains& g) {
    os << "z,g11,g12,g21,g22\n";
    for (std::size_t j = 0; j < g.z.size(); ++j) {
        os << fmt17(g.z[j]) << ',' << fmt17(g.g11[j]) << ',' << fmt17(g.g12[j]) << ','
           << fmt17(g.g21[j]) << ',' << fmt17(g.g22[j]) << '\n';
    }
}

inline void write_trace_csv(std::ostream& os, const std::vector<SimRecord>& trace) {
    os << "t,l2_uv,l2_alphabeta,U1,U2\n";
    for (const auto& r : trace) {
        os << fmt17(r.t) << ',' << fmt17(r.l2_uv) << ',' << fmt17(r.l2_alphabeta) << ','
           << fmt17(r.U1) << ',' << fmt17(r.U2) << '\n';
    }
}

inline void write_snapshots_csv(std::ostream& os, const SimulationResult& res) {
    const bool with_target = !res.target_snapshots.empty();
    os << (with_target ? "t,w,u,v,alpha,beta\n" : "t,w,u,v\n");
    for (std::size_t s = 0; s < res.snapshots.size(); ++s) {
        const PlantState& st = res.snapshots[s];
        const std::size_t n = st.n_x();
        const double dx = 2.0 / static_cast<double>(n);
        for (std::size_t i = 0; i <= n; ++i) {
            const double w = -1.0 + dx * static_cast<double>(i);
            os << fmt17(st.t) << ',' << fmt17(w) << ',' << fmt17(st.u[i]) << ',' << fmt17(st.v[i]);
            if (with_target) {
                os << ',' << fmt17(res.target_snapshots[s].alpha[i]) << ','
                   << fmt17(res.target_snapshots[s].beta[i]);
            }
            os << '\n';
        }
    }
}

}  // namespace detail

// ============================================================================
// run_experiment
// ============================================================================

struct ExperimentResult {
    nlohmann::ordered_json summary;
    std::vector<std::string> files;
    SpeedCase speed_case;
    double tf = 0.0;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    ExperimentResult result;
    nlohmann::ordered_json& summary = result.summary;

    const CoefficientProfile profile = build_profile(cfg);
    const SpeedCase speed_case = classify_speed_case(profile, cfg.classify_tol);
    result.speed_case = speed_case;
    if (cfg.forced_case != 0) {
        const int actual = static_cast<int>(speed_case.tag) + 1;
        if (actual != cfg.forced_case) {
            throw CaseMismatch("requested case " + std::to_string(cfg.forced_case) +
                               " but the coefficients classify as case " + std::to_string(actual));
        }
    }
    const PhiMaps phi = build_phi_maps(profile, cfg.phi_nodes);
    const double tf = settling_time(phi, speed_case.tag);
    result.tf = tf;

    summary["mode"] = to_string(cfg.mode);
    summary["case"] = static_cast<int>(speed_case.tag) + 1;
    summary["classification"] = to_string(speed_case.tag);
    summary["classification_margin"] = speed_case.margin;
    summary["tf"] = tf;
    summary["phi_spans"] = {phi.spans[0], phi.spans[1], phi.spans[2], phi.spans[3]};
    summary["config"] = {{"n_x", cfg.plant.n_x},      {"cfl", cfg.plant.cfl},
                         {"t_final", cfg.plant.t_final}, {"n_w", cfg.kernel.n_w},
                         {"n_s", cfg.kernel.n_s},      {"phi_nodes", cfg.phi_nodes},
                         {"kernel_tol", cfg.kernel.tol}, {"initial", cfg.initial}};

    std::vector<std::string> file_names;
    auto emit_file = [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
        const std::string path = (fs::path(cfg.output_dir) / name).string();
        std::ofstream os(path);
        if (!os) throw ConfigError("cannot write " + path);
        body(os);
        result.files.push_back(path);
        file_names.push_back(name);
    };

    const bool needs_kernels = cfg.mode != RunMode::OpenLoop &&
                               !(cfg.mode == RunMode::TargetCheck && speed_case.tag == SpeedCaseTag::Equal);

    std::optional<KernelGrid> kernels;
    std::optional<SolverDiagnostics> diag;
    if (needs_kernels) {
        auto solved = solve_kernels(profile, phi, speed_case, cfg.kernel);
        kernels.emplace(std::move(solved.first));
        diag.emplace(std::move(solved.second));
        const ResidualReport rr = kernel_residual(*kernels, profile);
        const BoundCheckReport bc = kernel_bound_check(*kernels, *diag);
        diag->final_residual = rr.max_sup();
        summary["kernel"] = {
            {"iterations", diag->iterations},
            {"envelope_ok", diag->envelope_ok},
            {"residual_sup",
             {{"L11", rr.sup_l11}, {"L12", rr.sup_l12}, {"L21", rr.sup_l21}, {"L22", rr.sup_l22}}},
            {"bound_check", {{"pass", bc.pass}, {"worst_margin", bc.worst_margin}}},
            {"warnings", diag->warnings}};
        emit_file("kernels.csv", [&](std::ostream& os) { kernels->write_csv(os); });
    }

    std::optional<ControlGains> gains;
    if (kernels) {
        gains.emplace(gains_from_kernels(*kernels, phi, cfg.plant.n_x));
        emit_file("gains.csv", [&](std::ostream& os) { detail::write_gains_csv(os, *gains); });
    }

    const auto [u0, v0] = initial_data(cfg.initial);

    auto run_open = [&]() {
        SimulationResult open = simulate(profile, cfg.plant, {}, {}, u0, v0);
        const double l2_0 = open.trace.front().l2_uv;
        const double l2_T = open.trace.back().l2_uv;
        summary["open_loop"] = {{"initial_l2", l2_0},
                                {"final_l2", l2_T},
                                {"growth_factor", l2_0 > 0 ? l2_T / l2_0 : 0.0}};
        emit_file("open_norms.csv", [&](std::ostream& os) { detail::write_trace_csv(os, open.trace); });
        emit_file("open_snapshots.csv",
                  [&](std::ostream& os) { detail::write_snapshots_csv(os, open); });
    };

    auto run_closed = [&]() {
        BacksteppingTransform transform(*kernels, cfg.plant.n_x);
        SimulationResult closed =
            simulate(profile, cfg.plant, make_feedback_controller(*gains),
                     [&](const PlantState& s) { return transform.apply(s); }, u0, v0);
        const double l2_0 = closed.trace.front().l2_uv;
        double settle = -1.0;
        double max_alpha_rel = 0.0, max_beta_rel = 0.0;
        for (std::size_t k = 0; k < closed.trace.size(); ++k) {
            const auto& rec = closed.trace[k];
            if (settle < 0.0 && l2_0 > 0.0 && rec.l2_uv <= 1e-2 * l2_0) settle = rec.t;
            const auto& ts = closed.target_snapshots[k];
            const double denom = std::max(rec.l2_uv, 1e-300);
            max_alpha_rel = std::max(max_alpha_rel, std::fabs(ts.alpha.front()) / denom);
            max_beta_rel = std::max(max_beta_rel, std::fabs(ts.beta.back()) / denom);
        }
        summary["closed_loop"] = {{"initial_l2", l2_0},
                                  {"final_l2", closed.trace.back().l2_uv},
                                  {"final_rel_l2", l2_0 > 0 ? closed.trace.back().l2_uv / l2_0 : 0.0},
                                  {"settling_time_1pct", settle},
                                  {"max_boundary_alpha_rel", max_alpha_rel},
                                  {"max_boundary_beta_rel", max_beta_rel}};
        emit_file("closed_norms.csv",
                  [&](std::ostream& os) { detail::write_trace_csv(os, closed.trace); });
        emit_file("closed_snapshots.csv",
                  [&](std::ostream& os) { detail::write_snapshots_csv(os, closed); });
    };

    auto run_target_check = [&]() {
        if (speed_case.tag == SpeedCaseTag::Equal) {
            // explicit-solution comparison over a refinement sequence
            const auto a0 = [](double w) { return trig_hump(w); };
            const auto b0 = [](double w) { return trig_hump(w); };
            const double t_star = 0.5 * std::max(phi.phi1_span(), phi.phi2_span());
            std::vector<std::size_t> grids = {cfg.plant.n_x / 4, cfg.plant.n_x / 2, cfg.plant.n_x};
            nlohmann::ordered_json rows = nlohmann::ordered_json::array();
            std::vector<double> errs;
            for (std::size_t n : grids) {
                SimConfig tc = cfg.plant;
                tc.n_x = n;
                tc.t_final = t_star;
                tc.record_every = 1000000;  // final snapshot only
                TargetSimulationResult sim = simulate_target(profile, speed_case, tc, a0, b0);
                const TargetState& last = sim.snapshots.back();
                double err = 0.0;
                const double dx = 2.0 / static_cast<double>(n);
                for (std::size_t i = 0; i <= n; ++i) {
                    const double w = -1.0 + dx * static_cast<double>(i);
                    const auto [ea, eb] = explicit_target_case1(a0, b0, phi, w, last.t);
                    err = std::max(err, std::fabs(last.alpha[i] - ea));
                    err = std::max(err, std::fabs(last.beta[i] - eb));
                }
                errs.push_back(err);
                rows.push_back({{"n_x", n}, {"linf_error", err}});
            }
            nlohmann::ordered_json orders = nlohmann::ordered_json::array();
            for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
                orders.push_back(std::log2(errs[k] / errs[k + 1]));
            }
            summary["target_check"] = {{"t_star", t_star}, {"grids", rows}, {"observed_orders", orders}};
            emit_file("target_errors.csv", [&](std::ostream& os) {
                os << "n_x,linf_error\n";
                for (std::size_t k = 0; k < grids.size(); ++k) {
                    os << grids[k] << ',' << fmt17(errs[k]) << '\n';
                }
            });
        } else {
            // feedforward computation and finite-time annihilation of the target
            const PiecewiseLinear pq = speed_case.tag == SpeedCaseTag::LambdaFaster
                                           ? compute_p(*kernels, profile)
                                           : compute_q(*kernels, profile);
            FeedforwardKernels ff = solve_feedforward(*kernels, pq, cfg.volterra_tol);
            SimConfig tc = cfg.plant;
            tc.t_final = 1.2 * tf;
            const auto a0 = [](double w) { return trig_hump(w); };
            const auto b0 = [](double w) { return trig_hump(w); };
            TargetSimulationResult sim = simulate_target(profile, speed_case, tc, a0, b0, &ff);
            const double l2_0 = sim.trace.front().l2_alphabeta;
            const double l2_T = sim.trace.back().l2_alphabeta;
            summary["target_check"] = {{"t_final", tc.t_final},
                                       {"initial_l2", l2_0},
                                       {"final_l2", l2_T},
                                       {"final_rel_l2", l2_0 > 0 ? l2_T / l2_0 : 0.0}};
            emit_file("target_norms.csv",
                      [&](std::ostream& os) { detail::write_trace_csv(os, sim.trace); });
        }
    };

    switch (cfg.mode) {
        case RunMode::KernelsOnly: break;
        case RunMode::OpenLoop: run_open(); break;
        case RunMode::ClosedLoop: run_closed(); break;
        case RunMode::Both: run_open(); run_closed(); break;
        case RunMode::TargetCheck: run_target_check(); break;
    }

    summary["files"] = file_names;
    emit_file("summary.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
    return result;
}

}  // namespace hypstab
