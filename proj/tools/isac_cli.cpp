#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "isac/harness.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out = "results";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

void add_run_flags(CLI::App* cmd, Flags& f, bool needs_config) {
    auto* c = cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    cmd->add_option("--out", f.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
    cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RSMA-assisted ISAC waveform toolkit"};
    app.set_version_flag("--version", isac::kToolkitVersion);
    app.require_subcommand(1);

    Flags f;
    auto* tradeoff = app.add_subcommand("run-tradeoff", "MFR / sensing trade-off over a lambda sweep");
    auto* estimation = app.add_subcommand("run-estimation", "rate-constrained designs and RMSE against the RCRB");
    auto* satellite = app.add_subcommand("run-satellite", "multibeam satellite trade-off");
    auto* gen = app.add_subcommand("gen-channels", "write channel realizations to text files");
    auto* rep = app.add_subcommand("report", "summarize result tables in --out");
    for (auto* cmd : {tradeoff, estimation, satellite, gen}) add_run_flags(cmd, f, true);
    rep->add_option("--out", f.out, "results directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        const isac::RunOptions opt{f.out, f.jobs};
        std::vector<std::string> files;
        if (rep->parsed()) {
            files = isac::report(f.out);
        } else {
            isac::ExperimentConfig cfg = isac::load_config(f.config);
            if (f.seed) cfg.seed = *f.seed;
            if (tradeoff->parsed()) files = isac::run_tradeoff(cfg, opt);
            if (estimation->parsed()) files = isac::run_estimation(cfg, opt);
            if (satellite->parsed()) files = isac::run_satellite(cfg, opt);
            if (gen->parsed()) files = isac::gen_channels(cfg, opt);
        }
        for (const auto& name : files) std::cout << (std::filesystem::path(f.out) / name).string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return EXIT_FAILURE;
    }
    return EXIT_SUCCESS;
}
