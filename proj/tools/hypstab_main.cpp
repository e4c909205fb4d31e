// Command-line front end: kernel computation, open/closed-loop simulation,
// the bundled showcase example, and target-system checks. See README.md.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypstab/experiment.hpp"

namespace {

struct Overrides {
    std::optional<std::string> config_path;
    std::optional<std::string> case_sel;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> nx, nw;
    std::optional<double> cfl, t_final, tol;
};

void add_common_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--config", ov.config_path, "experiment configuration file (JSON)");
    cmd->add_option("--case", ov.case_sel, "speed case: auto|1|2|3")
        ->check(CLI::IsMember({"auto", "1", "2", "3"}));
    cmd->add_option("--out", ov.out_dir, "output directory");
    cmd->add_option("--nx", ov.nx, "plant grid cells");
    cmd->add_option("--nw", ov.nw, "kernel grid nodes per triangle side");
    cmd->add_option("--cfl", ov.cfl, "Courant number in (0,1]");
    cmd->add_option("--t-final", ov.t_final, "simulation horizon");
    cmd->add_option("--tol", ov.tol, "kernel iteration tolerance");
}

hypstab::ExperimentConfig load_config(const Overrides& ov, const std::string& default_mode) {
    nlohmann::json root;
    if (ov.config_path) {
        std::ifstream in(*ov.config_path);
        if (!in) throw hypstab::ConfigError("cannot open config file: " + *ov.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw hypstab::ConfigError("missing required key(s): coefficients, mode");
        }
        try {
            root = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw hypstab::ConfigError(std::string("config parse error: ") + e.what());
        }
        if (!root.contains("mode")) root["mode"] = default_mode;
    } else {
        root = {{"coefficients", {{"kind", "paper-eq60"}}}, {"mode", default_mode}};
    }
    if (ov.case_sel) root["case"] = *ov.case_sel;
    hypstab::ExperimentConfig cfg = hypstab::validate_config(root);
    if (ov.out_dir) cfg.output_dir = *ov.out_dir;
    if (ov.nx) cfg.plant.n_x = *ov.nx;
    if (ov.nw) cfg.kernel.n_w = cfg.kernel.n_s = *ov.nw;
    if (ov.cfl) cfg.plant.cfl = *ov.cfl;
    if (ov.t_final) cfg.plant.t_final = *ov.t_final;
    if (ov.tol) cfg.kernel.tol = *ov.tol;
    cfg.plant.validate();
    if (cfg.kernel.n_w < 33 || cfg.kernel.n_s < 33) {
        throw hypstab::ConfigError("kernel grid must be at least 33x33");
    }
    return cfg;
}

int run(const hypstab::ExperimentConfig& cfg) {
    hypstab::ExperimentResult res = hypstab::run_experiment(cfg);
    std::cout << "case " << res.summary["case"] << " (" << std::string(res.summary["classification"])
              << "), Tf = " << res.tf << "\n";
    for (const auto& f : res.files) std::cout << "wrote " << f << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bilateral boundary control of 2x2 hyperbolic systems"};
    app.require_subcommand(1);

    Overrides ov;
    CLI::App* kernels = app.add_subcommand("kernels", "solve the control kernels and export them");
    CLI::App* simulate = app.add_subcommand("simulate", "run the configured simulation");
    CLI::App* paper = app.add_subcommand("paper-example",
                                         "full showcase: unstable open loop vs stabilized closed loop");
    CLI::App* target = app.add_subcommand("target-check", "verify the target-system dynamics");
    for (CLI::App* cmd : {kernels, simulate, paper, target}) add_common_flags(cmd, ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        hypstab::ExperimentConfig cfg;
        if (kernels->parsed()) {
            cfg = load_config(ov, "kernels-only");
            cfg.mode = hypstab::RunMode::KernelsOnly;
        } else if (simulate->parsed()) {
            cfg = load_config(ov, "both");
        } else if (paper->parsed()) {
            cfg = load_config(ov, "both");
            cfg.coefficients.kind = hypstab::CoefficientSpec::Kind::PaperEq60;
            cfg.initial = "paper";
            cfg.mode = hypstab::RunMode::Both;
        } else {
            cfg = load_config(ov, "target-check");
            cfg.mode = hypstab::RunMode::TargetCheck;
        }
        return run(cfg);
    } catch (const hypstab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hypstab::CaseMismatch& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hypstab::NonPositiveSpeed& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hypstab::MixedSignSpeeds& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hypstab::NoConvergence& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
