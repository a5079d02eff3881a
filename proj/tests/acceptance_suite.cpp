// Runs every stated acceptance criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exits nonzero when any criterion fails.
#include <cstdio>
#include <string>
#include <vector>

#include "outraj/experiments.hpp"
#include "outraj/io.hpp"

using namespace outraj;

namespace {

struct CriterionResult {
    int number;
    std::string title;
    bool pass;
    std::vector<std::string> notes;
};

std::vector<CriterionResult> g_results;

void record(int number, const std::string& title, bool pass,
            std::vector<std::string> notes) {
    g_results.push_back({number, title, pass, std::move(notes)});
}

const Check& need(const ExperimentReport& rep, const char* name) {
    const Check* c = find_check(rep, name);
    if (!c) throw std::logic_error(std::string("missing check: ") + name);
    return *c;
}

RunConfig cfg_for(const std::string& text, const std::string& out_dir) {
    RunConfig cfg = parse_config(text);
    cfg.output.directory = out_dir;
    return cfg;
}

}  // namespace

int main() {
    std::printf("acceptance run: stochastic trajectory library\n\n");

    // 1: martingale property of the linear equation, Markovian baseline
    {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "martingale",
            "numerics": {"dt": 0.001, "horizon": 1.0, "trajectories": 10000,
                          "master_seed": 7}
        })",
                                      "acceptance_out/martingale");
        const ExperimentReport rep = run_experiment(cfg);
        const Check& mw = need(rep, "final-mean-weight");
        const Check& rt = need(rep, "runtime");
        record(1, "mean weight stays at 1 within 4 SE and the run fits 30 s",
               mw.pass && rt.pass, {mw.detail, rt.detail});
    }

    // 2: norm defect scaling of the random-Hamiltonian integrator
    {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "norm-preservation",
            "numerics": {"master_seed": 5}
        })",
                                      "acceptance_out/norm-preservation");
        const ExperimentReport rep = run_experiment(cfg);
        const Check& win = need(rep, "defect-ratio-window");
        const Check& ren = need(rep, "renormalized-defect-zero");
        record(2,
               "norm defect shrinks by a factor in [1.5, 3] per dt halving "
               "(dt = 4e-3, 2e-3, 1e-3) and projection makes it exactly 0",
               win.pass && ren.pass, {win.detail, ren.detail});
    }

    // 3: stationary statistics of the coloured noise
    {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "ou-stats",
            "numerics": {"dt": 0.05, "horizon": 2.0, "trajectories": 100000,
                          "master_seed": 11}
        })",
                                      "acceptance_out/ou-stats");
        const ExperimentReport rep = run_experiment(cfg);
        const Check& var = need(rep, "stationary-variance");
        const Check& lag = need(rep, "lag-autocorrelation");
        record(3,
               "gamma = 0.5, N = 1e5: variance within 5% of 1, lag-1 "
               "autocorrelation within 5% of e^{-1/2}",
               var.pass && lag.pass, {var.detail, lag.detail});
    }

    // 4: dephasing ensemble reproduces the exact coherence decay
    {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "dephasing-compare",
            "numerics": {"dt": 0.001, "horizon": 5.0, "trajectories": 10000,
                          "master_seed": 3}
        })",
                                      "acceptance_out/dephasing-compare");
        const ExperimentReport rep = run_experiment(cfg);
        const Check& cp = need(rep, "coherence-checkpoints");
        const Check& pl = need(rep, "plateau");
        record(4,
               "normalized coherence within 3 SE of exp{-2(1 - e^{-t})} at "
               "t = 0.25, 0.5, 1, 2 and of e^{-2} at t = 5",
               cp.pass && pl.pass, {cp.detail, pl.detail});
    }

    // 5 and 9 come from the same deterministic solver experiment
    const ExperimentReport memme = [&] {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "memory-me",
            "numerics": {"dt": 0.001, "horizon": 1.0}
        })",
                                      "acceptance_out/memory-me");
        return run_experiment(cfg);
    }();
    {
        const Check& win = need(memme, "gamma-error-window");
        const Check& lim = need(memme, "lindblad-limit");
        record(5,
               "master-equation error at t = 1 shrinks by a factor in [1.5, 3] "
               "per gamma halving (gamma = 0.4, 0.2, 0.1) and the memoryless "
               "limit matches the semigroup within 1e-8",
               win.pass && lim.pass, {win.detail, lim.detail});
    }

    // 6: ensemble mean solves the mean equation up to statistics + O(dt)
    {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "meaneq-residual",
            "numerics": {"dt": 0.001, "horizon": 1.0, "trajectories": 10000,
                          "master_seed": 17}
        })",
                                      "acceptance_out/meaneq-residual");
        const ExperimentReport rep = run_experiment(cfg);
        const Check& res = need(rep, "residual-bounded");
        record(6,
               "||residual(t)|| <= 4 (SE + C dt) at every interior grid point, "
               "C calibrated by one dt refinement",
               res.pass, {res.detail});
    }

    // 7: weighted-linear and nonlinear estimators agree
    {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "girsanov-check",
            "numerics": {"dt": 0.001, "horizon": 1.0, "trajectories": 10000,
                          "master_seed": 23}
        })",
                                      "acceptance_out/girsanov-check");
        const ExperimentReport rep = run_experiment(cfg);
        const Check& agree = need(rep, "checkpoint-agreement");
        record(7, "<sigma_z> from both estimators agrees within 4 combined SE at 5 checkpoints",
               agree.pass, {agree.detail});
    }

    // 8: propagator factorization
    {
        const RunConfig cfg = cfg_for(R"({
            "experiment": "propagator-check",
            "numerics": {"dt": 0.001, "horizon": 1.0, "master_seed": 2}
        })",
                                      "acceptance_out/propagator-check");
        const ExperimentReport rep = run_experiment(cfg);
        const Check& comp = need(rep, "composition-defect");
        const Check& inv = need(rep, "factors-invertible");
        record(8,
               "composition defect <= 1e-12 and every one-step factor is "
               "invertible (condition numbers reported)",
               comp.pass && inv.pass, {comp.detail, inv.detail});
    }

    // 9: two independent discretizations of the memory term
    {
        const Check& q = need(memme, "aux-vs-quadrature");
        record(9, "auxiliary-ODE and quadrature solvers differ at O(dt^2): ratio in [3, 5] per dt halving",
               q.pass, {q.detail});
    }

    // 10: determinism across worker counts, byte-for-byte
    {
        std::vector<std::string> csvs;
        for (int workers : {1, 2, 8}) {
            RunConfig cfg = cfg_for(R"({
                "experiment": "martingale",
                "numerics": {"dt": 0.001, "horizon": 0.5, "trajectories": 512,
                              "master_seed": 40}
            })",
                                    "acceptance_out/workers-" + std::to_string(workers));
            cfg.numerics.workers = workers;
            const ExperimentReport rep = run_experiment(cfg);
            csvs.push_back(rep.files.at(0));
        }
        const bool identical =
            files_identical(csvs[0], csvs[1]) && files_identical(csvs[0], csvs[2]);
        record(10, "same seed with 1, 2, and 8 workers produces byte-identical result files",
               identical,
               {identical ? "martingale.csv bytes agree across worker counts"
                          : "result files differ between worker counts"});
    }

    int failed = 0;
    for (const CriterionResult& r : g_results) {
        std::printf("[%2d] %s  %s\n", r.number, r.pass ? "PASS" : "FAIL", r.title.c_str());
        for (const std::string& n : r.notes) std::printf("       %s\n", n.c_str());
        if (!r.pass) ++failed;
    }
    std::printf("\nSUMMARY: %zu of %zu criteria pass\n", g_results.size() - failed,
                g_results.size());
    if (failed) std::printf("see the gamma-error-window notes above for the known red criterion\n");
    return failed == 0 ? 0 : 1;
}
