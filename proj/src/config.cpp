#include "outraj/config.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace outraj {

namespace {

using nlohmann::json;

constexpr std::array<const char*, 8> kExperiments = {
    "ou-stats",        "martingale", "norm-preservation", "dephasing-compare",
    "meaneq-residual", "memory-me",  "girsanov-check",    "propagator-check"};

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) fail(path + "." + it.key(), "unknown key");
    }
}

double number_at(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

Complex complex_at(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2)
        fail(path, "expected a complex entry [re, im]");
    return {number_at(j[0], path + "[0]"), number_at(j[1], path + "[1]")};
}

Vector vector_at(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array of [re, im] pairs");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = complex_at(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Matrix matrix_at(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array of rows");
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    Matrix m;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string rpath = path + "[" + std::to_string(r) + "]";
        if (!j[r].is_array() || j[r].empty()) fail(rpath, "expected a nonempty row");
        if (r == 0) {
            cols = j[r].size();
            m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        } else if (j[r].size() != cols) {
            fail(rpath, "ragged row");
        }
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                complex_at(j[r][c], rpath + "[" + std::to_string(c) + "]");
    }
    if (m.rows() != m.cols()) fail(path, "matrix must be square");
    return m;
}

void parse_model(const json& j, ModelConfig& out) {
    check_keys(j, "model", {"type", "h0", "l", "gamma", "h", "rs"});
    out.present = true;
    if (!j.contains("type") || !j["type"].is_string()) fail("model.type", "required string");
    out.type = j["type"].get<std::string>();
    if (out.type == "ou") {
        if (!j.contains("h0")) fail("model.h0", "required for an OU model");
        if (!j.contains("l")) fail("model.l", "required for an OU model");
        out.h0 = matrix_at(j["h0"], "model.h0");
        out.l = matrix_at(j["l"], "model.l");
        if (!is_hermitian(out.h0)) fail("model.h0", "must be Hermitian");
        if (!is_hermitian(out.l)) fail("model.l", "must be Hermitian");
        if (out.h0.rows() != out.l.rows()) fail("model.l", "dimension differs from h0");
        if (j.contains("gamma")) out.gamma = number_at(j["gamma"], "model.gamma");
        if (!(out.gamma > 0.0)) fail("model.gamma", "must be > 0");
    } else if (out.type == "markovian") {
        if (!j.contains("h")) fail("model.h", "required for a markovian model");
        out.h = matrix_at(j["h"], "model.h");
        if (!is_hermitian(out.h)) fail("model.h", "must be Hermitian");
        if (!j.contains("rs") || !j["rs"].is_array() || j["rs"].empty())
            fail("model.rs", "required nonempty array of matrices");
        for (std::size_t i = 0; i < j["rs"].size(); ++i) {
            Matrix r = matrix_at(j["rs"][i], "model.rs[" + std::to_string(i) + "]");
            if (r.rows() != out.h.rows())
                fail("model.rs[" + std::to_string(i) + "]", "dimension differs from h");
            out.rs.push_back(std::move(r));
        }
    } else {
        fail("model.type", "must be \"ou\" or \"markovian\"");
    }
}

void parse_numerics(const json& j, NumericsConfig& out) {
    check_keys(j, "numerics",
               {"dt", "horizon", "trajectories", "master_seed", "scheme", "renormalize",
                "ou_mode", "stride", "workers"});
    if (j.contains("dt")) out.dt = number_at(j["dt"], "numerics.dt");
    if (j.contains("horizon")) out.horizon = number_at(j["horizon"], "numerics.horizon");
    if (j.contains("trajectories")) {
        if (!j["trajectories"].is_number_integer())
            fail("numerics.trajectories", "expected an integer");
        out.trajectories = j["trajectories"].get<long>();
    }
    if (j.contains("master_seed")) {
        if (!j["master_seed"].is_number_unsigned() && !j["master_seed"].is_number_integer())
            fail("numerics.master_seed", "expected a nonnegative integer");
        out.master_seed = j["master_seed"].get<std::uint64_t>();
    }
    if (j.contains("scheme")) {
        const std::string s = j["scheme"].is_string() ? j["scheme"].get<std::string>() : "";
        if (s == "euler")
            out.scheme = Scheme::euler;
        else if (s == "milstein")
            out.scheme = Scheme::milstein;
        else
            fail("numerics.scheme", "must be \"euler\" or \"milstein\"");
    }
    if (j.contains("renormalize")) {
        if (!j["renormalize"].is_boolean()) fail("numerics.renormalize", "expected a boolean");
        out.renormalize = j["renormalize"].get<bool>();
    }
    if (j.contains("ou_mode")) {
        const std::string s = j["ou_mode"].is_string() ? j["ou_mode"].get<std::string>() : "";
        if (s == "euler")
            out.ou_mode = OUMode::euler;
        else if (s == "exact_bridge")
            out.ou_mode = OUMode::exact_bridge;
        else
            fail("numerics.ou_mode", "must be \"euler\" or \"exact_bridge\"");
    }
    if (j.contains("stride")) {
        if (!j["stride"].is_number_integer()) fail("numerics.stride", "expected an integer");
        out.stride = j["stride"].get<int>();
    }
    if (j.contains("workers")) {
        if (!j["workers"].is_number_integer()) fail("numerics.workers", "expected an integer");
        out.workers = j["workers"].get<int>();
    }
    if (!(out.dt > 0.0)) fail("numerics.dt", "must be > 0");
    if (out.horizon < out.dt) fail("numerics.horizon", "must be at least dt");
    if (out.trajectories < 1) fail("numerics.trajectories", "must be at least 1");
    if (out.stride < 1) fail("numerics.stride", "must be at least 1");
    if (out.workers < 1) fail("numerics.workers", "must be at least 1");
}

json complex_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

json vector_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_json(v(i)));
    return out;
}

}  // namespace

bool known_experiment(const std::string& name) {
    for (const char* e : kExperiments)
        if (name == e) return true;
    return false;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");
    check_keys(j, "config",
               {"experiment", "model", "numerics", "output", "state", "dump_trajectories"});

    RunConfig cfg;
    if (!j.contains("experiment") || !j["experiment"].is_string())
        fail("experiment", "required string");
    cfg.experiment = j["experiment"].get<std::string>();
    if (!known_experiment(cfg.experiment)) {
        std::ostringstream names;
        for (std::size_t i = 0; i < kExperiments.size(); ++i)
            names << (i ? ", " : "") << kExperiments[i];
        fail("experiment", "unknown experiment \"" + cfg.experiment + "\" (one of: " +
                               names.str() + ")");
    }
    if (j.contains("model")) {
        if (!j["model"].is_object()) fail("model", "expected an object");
        parse_model(j["model"], cfg.model);
    }
    if (j.contains("numerics")) {
        if (!j["numerics"].is_object()) fail("numerics", "expected an object");
        parse_numerics(j["numerics"], cfg.numerics);
    }
    if (j.contains("output")) {
        if (!j["output"].is_object()) fail("output", "expected an object");
        check_keys(j["output"], "output", {"directory"});
        if (j["output"].contains("directory")) {
            if (!j["output"]["directory"].is_string())
                fail("output.directory", "expected a string");
            cfg.output.directory = j["output"]["directory"].get<std::string>();
        }
    }
    if (j.contains("state")) {
        if (!j["state"].is_object()) fail("state", "expected an object");
        check_keys(j["state"], "state", {"psi0", "rho0"});
        if (j["state"].contains("psi0")) cfg.psi0 = vector_at(j["state"]["psi0"], "state.psi0");
        if (j["state"].contains("rho0")) {
            cfg.rho0 = matrix_at(j["state"]["rho0"], "state.rho0");
            if (!is_hermitian(cfg.rho0)) fail("state.rho0", "must be Hermitian");
        }
    }
    if (j.contains("dump_trajectories")) {
        if (!j["dump_trajectories"].is_boolean())
            fail("dump_trajectories", "expected a boolean");
        cfg.dump_trajectories = j["dump_trajectories"].get<bool>();
    }

    // cross-field dimension checks for whatever was provided together
    Eigen::Index dim = 0;
    if (cfg.model.present) dim = cfg.model.type == "ou" ? cfg.model.h0.rows() : cfg.model.h.rows();
    if (dim > 0 && cfg.psi0.size() > 0 && cfg.psi0.size() != dim)
        fail("state.psi0", "length differs from the model dimension");
    if (dim > 0 && cfg.rho0.size() > 0 && cfg.rho0.rows() != dim)
        fail("state.rho0", "dimension differs from the model");
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_echo(const RunConfig& cfg) {
    json j;
    j["experiment"] = cfg.experiment;
    if (cfg.model.present) {
        json m;
        m["type"] = cfg.model.type;
        if (cfg.model.type == "ou") {
            m["h0"] = matrix_json(cfg.model.h0);
            m["l"] = matrix_json(cfg.model.l);
            m["gamma"] = cfg.model.gamma;
        } else {
            m["h"] = matrix_json(cfg.model.h);
            json rs = json::array();
            for (const Matrix& r : cfg.model.rs) rs.push_back(matrix_json(r));
            m["rs"] = rs;
        }
        j["model"] = m;
    }
    json n;
    n["dt"] = cfg.numerics.dt;
    n["horizon"] = cfg.numerics.horizon;
    n["trajectories"] = cfg.numerics.trajectories;
    n["master_seed"] = cfg.numerics.master_seed;
    n["scheme"] = cfg.numerics.scheme == Scheme::milstein ? "milstein" : "euler";
    n["renormalize"] = cfg.numerics.renormalize;
    n["ou_mode"] = cfg.numerics.ou_mode == OUMode::euler ? "euler" : "exact_bridge";
    n["stride"] = cfg.numerics.stride;
    n["workers"] = cfg.numerics.workers;
    j["numerics"] = n;
    j["output"] = {{"directory", cfg.output.directory}};
    if (cfg.psi0.size() > 0) j["state"]["psi0"] = vector_json(cfg.psi0);
    if (cfg.rho0.size() > 0) j["state"]["rho0"] = matrix_json(cfg.rho0);
    if (cfg.dump_trajectories) j["dump_trajectories"] = true;
    return j.dump();
}

}  // namespace outraj
