#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "outraj/ensemble.hpp"
#include "outraj/experiments.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericalFailure = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic trajectory experiments"};
    std::string config_path;
    std::string out_dir;
    int workers = 0;
    bool dump = false;
    app.add_option("config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (overrides config and OUTRAJ_OUT)");
    app.add_option("--workers", workers, "worker threads for ensemble runs");
    app.add_flag("--dump-trajectories", dump, "also write a few raw trajectories");
    CLI11_PARSE(app, argc, argv);

    outraj::RunConfig cfg;
    try {
        cfg = outraj::load_config_file(config_path);
    } catch (const outraj::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    }

    if (!out_dir.empty()) {
        cfg.output.directory = out_dir;
    } else if (cfg.output.directory.empty()) {
        if (const char* env = std::getenv("OUTRAJ_OUT")) cfg.output.directory = env;
    }
    if (workers > 0) cfg.numerics.workers = workers;
    if (dump) cfg.dump_trajectories = true;

    outraj::ExperimentReport rep;
    try {
        rep = outraj::run_experiment(cfg);
    } catch (const outraj::EnsembleError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumericalFailure;
    } catch (const outraj::BlowupError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumericalFailure;
    } catch (const outraj::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumericalFailure;
    }

    outraj::write_manifest(cfg, rep);
    for (const outraj::Check& c : rep.checks)
        std::printf("[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
    std::printf("%s: %s (%.2f s, %zu files)\n", rep.experiment.c_str(),
                rep.pass() ? "all checks passed" : "checks FAILED", rep.wall_seconds,
                rep.files.size());
    return rep.pass() ? kExitPass : kExitCheckFailure;
}
