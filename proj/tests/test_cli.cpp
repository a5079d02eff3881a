#include <doctest.h>

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "outraj/experiments.hpp"
#include "outraj/io.hpp"

using namespace outraj;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("defaults: dt, trajectory count, and seed") {
    const RunConfig cfg = parse_config(R"({"experiment": "martingale"})");
    CHECK(cfg.experiment == "martingale");
    CHECK(cfg.numerics.dt == 1e-3);
    CHECK(cfg.numerics.trajectories == 10000);
    CHECK(cfg.numerics.master_seed == 0);
    CHECK(cfg.numerics.horizon == 1.0);
    CHECK(cfg.numerics.scheme == Scheme::euler);
    CHECK(cfg.numerics.ou_mode == OUMode::exact_bridge);
    CHECK_FALSE(cfg.model.present);
    CHECK(cfg.psi0.size() == 0);
}

TEST_CASE("schema violations name the offending field") {
    CHECK_THROWS_WITH_AS(parse_config(R"({"experiment": "martingale", "typo": 1})"),
                         doctest::Contains("typo"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"experiment": "martingale", "numerics": {"dt": -0.1}})"),
        doctest::Contains("numerics.dt"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"experiment": "martingale", "numerics": {"scheme": "rk4"}})"),
        doctest::Contains("numerics.scheme"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"experiment": "no-such-thing"})"),
                         doctest::Contains("ou-stats"), ConfigError);
    CHECK_THROWS_AS(parse_config("not json at all"), ConfigError);
}

TEST_CASE("model matrices parse from [re, im] pairs and must be Hermitian") {
    const std::string ou = R"({
        "experiment": "norm-preservation",
        "model": {
            "type": "ou",
            "h0": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]],
            "l":  [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]],
            "gamma": 0.5
        }
    })";
    const RunConfig cfg = parse_config(ou);
    REQUIRE(cfg.model.present);
    CHECK(cfg.model.type == "ou");
    CHECK(cfg.model.gamma == 0.5);
    CHECK(cfg.model.h0(0, 1) == Complex(1, 0));
    CHECK(cfg.model.l(1, 1) == Complex(-1, 0));

    const std::string bad = R"({
        "experiment": "norm-preservation",
        "model": {
            "type": "ou",
            "h0": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]],
            "l":  [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]
        }
    })";
    CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("model.h0"), ConfigError);

    const std::string ragged = R"({
        "experiment": "norm-preservation",
        "model": {"type": "ou", "h0": [[[0, 0]], [[0, 0], [0, 0]]],
                  "l": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]}
    })";
    CHECK_THROWS_AS(parse_config(ragged), ConfigError);
}

TEST_CASE("config echo round-trips through the parser") {
    const std::string text = R"({
        "experiment": "girsanov-check",
        "model": {
            "type": "markovian",
            "h": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]],
            "rs": [[[[0, 0], [1, 0]], [[0, 0], [0, 0]]]]
        },
        "state": {"psi0": [[0, 0], [1, 0]]},
        "numerics": {"dt": 0.002, "horizon": 0.5, "trajectories": 64, "master_seed": 9},
        "output": {"directory": "/tmp/echo-test"}
    })";
    const RunConfig cfg = parse_config(text);
    const RunConfig again = parse_config(config_echo(cfg));
    CHECK(again.experiment == cfg.experiment);
    CHECK(again.numerics.dt == cfg.numerics.dt);
    CHECK(again.numerics.trajectories == cfg.numerics.trajectories);
    CHECK(again.numerics.master_seed == cfg.numerics.master_seed);
    CHECK(again.model.present);
    CHECK((again.model.h - cfg.model.h).norm() == 0.0);
    CHECK((again.psi0 - cfg.psi0).norm() == 0.0);
    CHECK(again.output.directory == cfg.output.directory);
}

TEST_CASE("table writer emits a header and full-precision values") {
    Table t;
    t.add("t", {0.0, 0.1});
    t.add("value", {1.0 / 3.0, 2.0});
    const std::string path = "/tmp/outraj_test_table.csv";
    write_csv(path, t);
    const std::string text = slurp(path);
    CHECK(text.find("t,value\n") == 0);
    CHECK(text.find("0.33333333333333331") != std::string::npos);

    Table ragged;
    ragged.add("a", {1.0});
    ragged.add("b", {1.0, 2.0});
    CHECK_THROWS_AS(write_csv(path, ragged), std::logic_error);
    std::remove(path.c_str());
}

TEST_CASE("checksums use the FNV-1a reference constants") {
    const std::string path = "/tmp/outraj_test_fnv.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "a";
    }
    CHECK(fnv1a_hex(fnv1a_file(path)) == "af63dc4c8601ec8c");
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
    }
    CHECK(fnv1a_hex(fnv1a_file(path)) == "cbf29ce484222325");
    CHECK(files_identical(path, path));
    std::remove(path.c_str());
    CHECK_THROWS_AS(fnv1a_file("/tmp/outraj_does_not_exist_42"), std::runtime_error);
}

TEST_CASE("format_g17 round-trips doubles exactly") {
    for (double x : {1.0 / 3.0, 6.0221407e23, -2.2250738585072014e-308, 0.1}) {
        const double back = std::stod(format_g17(x));
        CHECK(back == x);
    }
}

TEST_CASE("run_experiment produces a manifest line that parses") {
    RunConfig cfg = parse_config(R"({
        "experiment": "propagator-check",
        "numerics": {"dt": 0.01, "horizon": 0.2, "master_seed": 1},
        "output": {"directory": "/tmp/outraj_test_manifest"}
    })");
    const ExperimentReport rep = run_experiment(cfg);
    CHECK(rep.experiment == "propagator-check");
    CHECK(rep.pass());
    REQUIRE(!rep.files.empty());
    CHECK(find_check(rep, "composition-defect") != nullptr);
    CHECK(find_check(rep, "no-such-check") == nullptr);

    const std::string line = write_manifest(cfg, rep);
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j["experiment"] == "propagator-check");
    CHECK(j["pass"] == true);
    CHECK(j["config"]["experiment"] == "propagator-check");
    REQUIRE(j["files"].is_array());
    REQUIRE(!j["files"].empty());
    const std::string listed = j["files"][0]["path"].get<std::string>();
    CHECK(fnv1a_hex(fnv1a_file(listed)) == j["files"][0]["fnv1a"].get<std::string>());
    for (const auto& c : j["checks"]) {
        CHECK(c.contains("name"));
        CHECK(c.contains("pass"));
        CHECK(c.contains("detail"));
    }
}

TEST_CASE("experiments reject models of the wrong kind") {
    RunConfig cfg = parse_config(R"({
        "experiment": "girsanov-check",
        "model": {
            "type": "ou",
            "h0": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]],
            "l":  [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]
        },
        "numerics": {"dt": 0.01, "horizon": 0.1, "trajectories": 4},
        "output": {"directory": "/tmp/outraj_test_wrongkind"}
    })");
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}
