// pairwave — command-line driver for the pair-excitation solver suite.
//
// Subcommands:
//   pairwave run <config.json>                      full pipeline
//   pairwave hartree|riccati|spectrum <config.json> single stage
//   pairwave fock-verify <config.json>              many-body verification stage
//   pairwave sweep <g|N> <start:stop:count> <config.json>
//
// Exit codes: 0 success and all enabled checks pass; 2 invalid configuration
// or usage (no artifacts written); 3 solver or dependency failure (partial
// report written when possible).

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <fstream>

#include "pairwave/pipeline.hpp"

namespace {

using pairwave::json;

pairwave::RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw pairwave::invalid_input("cannot open config file: " + path);
    json parsed;
    try {
        parsed = json::parse(in);
    } catch (const std::exception& e) {
        throw pairwave::invalid_input("config is not valid JSON: " + std::string(e.what()));
    }
    return pairwave::parse_config(parsed);
}

void print_checks(const json& checks) {
    for (auto it = checks.begin(); it != checks.end(); ++it)
        std::printf("%-22s %s\n", it.key().c_str(), it.value().get<std::string>().c_str());
}

// Run the requested portion of the pipeline.  Solver failures still produce
// a report covering the stages that completed.
int run_stages(pairwave::PipelineState& st, const std::string& target) {
    using pairwave::StageMode;
    std::string error_stage, error_message;
    try {
        if (target == "run") {
            pairwave::ensure_fock(st, StageMode::compute);
        } else if (target == "hartree") {
            pairwave::ensure_hartree(st, StageMode::compute);
        } else if (target == "riccati") {
            pairwave::ensure_hartree(st, StageMode::require_cache);
            pairwave::ensure_riccati(st, StageMode::compute);
        } else if (target == "spectrum") {
            pairwave::ensure_hartree(st, StageMode::require_cache);
            pairwave::ensure_riccati(st, StageMode::require_cache);
            pairwave::ensure_spectrum(st, StageMode::compute);
        } else {  // fock-verify
            pairwave::ensure_hartree(st, StageMode::require_cache);
            pairwave::ensure_riccati(st, StageMode::require_cache);
            pairwave::ensure_spectrum(st, StageMode::require_cache);
            pairwave::ensure_fock(st, StageMode::compute);
        }
    } catch (const pairwave::error& e) {
        error_stage = "pipeline";
        error_message = e.what();
    }

    pairwave::publish_stage_outputs(st);
    pairwave::write_report(st);

    if (!error_message.empty()) {
        std::fprintf(stderr, "pairwave: %s\n", error_message.c_str());
        return 3;
    }
    const json checks = pairwave::evaluate_checks(st);
    print_checks(checks);
    return pairwave::all_checks_pass(checks) ? 0 : 3;
}

int run_sweep_command(const pairwave::RunConfig& cfg, const std::string& param,
                      const std::string& grid_text) {
    const pairwave::SweepGrid grid = pairwave::parse_grid(grid_text);
    if (param != "g" && param != "N")
        throw pairwave::invalid_input("sweep: parameter must be g or N");
    if (!cfg.output.csv_format)
        throw pairwave::invalid_input("sweep requires csv in output formats");
    std::vector<pairwave::SweepRow> rows;
    try {
        rows = pairwave::run_sweep(cfg, param, grid);
    } catch (const pairwave::invalid_input&) {
        throw;
    } catch (const pairwave::error& e) {
        std::fprintf(stderr, "pairwave: %s\n", e.what());
        return 3;
    }
    pairwave::write_text_file(std::filesystem::path(cfg.output.directory) / "sweep.csv",
                              pairwave::sweep_csv(param, rows));
    std::printf("sweep: wrote %zu rows\n", rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pair-excitation solver suite for a trapped 1D Bose gas"};
    app.require_subcommand(1);

    std::string config_path, sweep_param, sweep_grid;
    std::vector<CLI::App*> stage_cmds;
    for (const char* name : {"run", "hartree", "riccati", "spectrum", "fock-verify"}) {
        CLI::App* cmd = app.add_subcommand(name);
        cmd->add_option("config", config_path, "path to the JSON run configuration")
            ->required();
        stage_cmds.push_back(cmd);
    }
    CLI::App* sweep = app.add_subcommand("sweep");
    sweep->add_option("param", sweep_param, "parameter to vary: g or N")->required();
    sweep->add_option("grid", sweep_grid, "start:stop:count")->required();
    sweep->add_option("config", config_path, "path to the JSON run configuration")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // --help exits 0; bad usage is a config error
    }

    try {
        const pairwave::RunConfig cfg = load_config(config_path);
        if (sweep->parsed()) return run_sweep_command(cfg, sweep_param, sweep_grid);
        const std::array<const char*, 5> names = {"run", "hartree", "riccati", "spectrum",
                                                  "fock-verify"};
        for (size_t i = 0; i < names.size(); ++i) {
            if (stage_cmds[i]->parsed()) {
                pairwave::PipelineState st = pairwave::make_pipeline(cfg);
                return run_stages(st, names[i]);
            }
        }
        return 2;  // unreachable with require_subcommand(1)
    } catch (const pairwave::invalid_input& e) {
        std::fprintf(stderr, "pairwave: invalid configuration: %s\n", e.what());
        return 2;
    } catch (const pairwave::error& e) {
        std::fprintf(stderr, "pairwave: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pairwave: unexpected error: %s\n", e.what());
        return 3;
    }
}
