#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "richfit/io.hpp"

namespace {

// Exit codes: 0 success, 2 validation error, 3 numerical failure.
int dispatch(const std::string& command, const richfit::io::RunConfig& cfg) {
    try {
        std::string out;
        if (command == "simulate")
            out = richfit::io::command_simulate(cfg);
        else if (command == "fit")
            out = richfit::io::command_fit(cfg);
        else if (command == "fpt")
            out = richfit::io::command_fpt(cfg);
        else
            out = richfit::io::command_curve(cfg);
        if (!out.empty()) std::printf("wrote %s\n", out.c_str());
        return 0;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perturbed Richards growth model: simulation, fitting, first-passage analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir, method, p_list, layout;
    long long seed = -1, replications = -1;
    double window_end = std::numeric_limits<double>::quiet_NaN();

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file (key = value)");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--replications", replications, "optimizer replications");
        sub->add_option("--method", method, "optimizer: sa or alo");
        sub->add_option("--p", p_list, "boundary level p (value or comma list)");
        sub->add_option("--window-end", window_end, "fitting window end time");
        sub->add_option("--layout", layout, "csv layout: wide or long");
        return sub;
    };

    CLI::App* simulate = add_common(app.add_subcommand("simulate", "simulate sample paths"));
    CLI::App* fit = add_common(app.add_subcommand("fit", "run the estimation procedure"));
    CLI::App* fpt_cmd = add_common(app.add_subcommand("fpt", "first-passage-time density"));
    CLI::App* curve = add_common(app.add_subcommand("curve", "deterministic curve data"));
    std::string data_path;
    fit->add_option("data", data_path, "observations CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    richfit::io::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = richfit::io::RunConfig::from_file(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    std::string command;
    if (simulate->parsed()) command = "simulate";
    if (fit->parsed()) command = "fit";
    if (fpt_cmd->parsed()) command = "fpt";
    if (curve->parsed()) command = "curve";

    // Command-line flags override config-file keys.
    if (!out_dir.empty()) cfg.set("out.dir", out_dir);
    if (!layout.empty()) cfg.set("data.layout", layout);
    if (!data_path.empty()) cfg.set("data.path", data_path);
    if (seed >= 0) {
        cfg.set("sim.seed", std::to_string(seed));
        cfg.set("fit.seed", std::to_string(seed));
        cfg.set("fpt.seed", std::to_string(seed));
    }
    if (replications >= 0) cfg.set("fit.replications", std::to_string(replications));
    if (!method.empty()) cfg.set("fit.method", method);
    if (!p_list.empty()) {
        cfg.set("fit.p", p_list);
        cfg.set("fpt.p", p_list);
        cfg.set("perturbation.p", p_list);
    }
    if (window_end == window_end) cfg.set("fit.window_end", std::to_string(window_end));

    return dispatch(command, cfg);
}
