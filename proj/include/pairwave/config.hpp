#pragma once

#include <json.hpp>
#include <set>
#include <string>

#include "pairwave/core.hpp"

namespace pairwave {

using nlohmann::json;

// Fully-resolved run configuration.  Every field has a default except the
// RNG seed, which must be stated explicitly: reproducibility must be a
// visible choice, not an accident of a hidden constant.
struct RunConfig {
    struct Basis {
        int M = 32;
        int Q = 64;
    } basis;

    struct Model {
        double omega = 1.0;
        double g = 0.01;  // with N = 100 the default run sits at N g = 1
        double sigma = 0.5;
        double N = 100.0;
    } model;

    struct Riccati {
        std::string solver = "all";  // variational | greedy | bdg | all
        double tol = 1e-8;
        int max_iter = 20000;
        int restarts = 16;
        unsigned long long seed = 0;
    } riccati;

    struct Fock {
        int m = 3;
        int N = 2;
        bool theorem2 = true;
        bool projectors = true;
        bool eigenvector = true;
        bool conjugation = false;
        bool bogoliubov = false;
    } fock;

    struct Output {
        std::string directory = "out";
        bool json_format = true;
        bool csv_format = true;
    } output;
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw invalid_input("config: unknown key '" + it.key() + "' in " + where);
}

inline double take_number(const json& obj, const char* key, double fallback,
                          const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number())
        throw invalid_input("config: " + where + "." + key + " must be a number");
    return obj[key].get<double>();
}

inline int take_int(const json& obj, const char* key, int fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer())
        throw invalid_input("config: " + where + "." + key + " must be an integer");
    return obj[key].get<int>();
}

inline bool take_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean())
        throw invalid_input("config: " + where + "." + key + " must be a boolean");
    return obj[key].get<bool>();
}

inline std::string take_string(const json& obj, const char* key, const std::string& fallback,
                               const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string())
        throw invalid_input("config: " + where + "." + key + " must be a string");
    return obj[key].get<std::string>();
}

}  // namespace detail

inline RunConfig parse_config(const json& root) {
    if (!root.is_object()) throw invalid_input("config: top level must be an object");
    detail::reject_unknown_keys(root, {"basis", "model", "riccati", "fock", "output"},
                                "the top level");
    RunConfig cfg;

    if (root.contains("basis")) {
        const json& b = root["basis"];
        if (!b.is_object()) throw invalid_input("config: basis must be an object");
        detail::reject_unknown_keys(b, {"M", "Q"}, "basis");
        cfg.basis.M = detail::take_int(b, "M", cfg.basis.M, "basis");
        cfg.basis.Q = detail::take_int(b, "Q", 2 * cfg.basis.M, "basis");
    }
    if (root.contains("model")) {
        const json& m = root["model"];
        if (!m.is_object()) throw invalid_input("config: model must be an object");
        detail::reject_unknown_keys(m, {"omega", "g", "sigma", "N"}, "model");
        cfg.model.omega = detail::take_number(m, "omega", cfg.model.omega, "model");
        cfg.model.g = detail::take_number(m, "g", cfg.model.g, "model");
        cfg.model.sigma = detail::take_number(m, "sigma", cfg.model.sigma, "model");
        cfg.model.N = detail::take_number(m, "N", cfg.model.N, "model");
    }

    if (!root.contains("riccati") || !root["riccati"].is_object() ||
        !root["riccati"].contains("seed"))
        throw invalid_input("config: riccati.seed is required");
    {
        const json& r = root["riccati"];
        detail::reject_unknown_keys(r, {"solver", "tol", "max_iter", "restarts", "seed"},
                                    "riccati");
        cfg.riccati.solver = detail::take_string(r, "solver", cfg.riccati.solver, "riccati");
        cfg.riccati.tol = detail::take_number(r, "tol", cfg.riccati.tol, "riccati");
        cfg.riccati.max_iter = detail::take_int(r, "max_iter", cfg.riccati.max_iter, "riccati");
        cfg.riccati.restarts = detail::take_int(r, "restarts", cfg.riccati.restarts, "riccati");
        if (!r["seed"].is_number_unsigned() && !r["seed"].is_number_integer())
            throw invalid_input("config: riccati.seed must be a nonnegative integer");
        long long seed = r["seed"].get<long long>();
        if (seed < 0) throw invalid_input("config: riccati.seed must be a nonnegative integer");
        cfg.riccati.seed = (unsigned long long)(seed);
    }

    if (root.contains("fock")) {
        const json& f = root["fock"];
        if (!f.is_object()) throw invalid_input("config: fock must be an object");
        detail::reject_unknown_keys(
            f, {"m", "N", "theorem2", "projectors", "eigenvector", "conjugation", "bogoliubov"},
            "fock");
        cfg.fock.m = detail::take_int(f, "m", cfg.fock.m, "fock");
        cfg.fock.N = detail::take_int(f, "N", cfg.fock.N, "fock");
        cfg.fock.theorem2 = detail::take_bool(f, "theorem2", cfg.fock.theorem2, "fock");
        cfg.fock.projectors = detail::take_bool(f, "projectors", cfg.fock.projectors, "fock");
        cfg.fock.eigenvector = detail::take_bool(f, "eigenvector", cfg.fock.eigenvector, "fock");
        cfg.fock.conjugation = detail::take_bool(f, "conjugation", cfg.fock.conjugation, "fock");
        cfg.fock.bogoliubov = detail::take_bool(f, "bogoliubov", cfg.fock.bogoliubov, "fock");
    }

    if (root.contains("output")) {
        const json& o = root["output"];
        if (!o.is_object()) throw invalid_input("config: output must be an object");
        detail::reject_unknown_keys(o, {"directory", "formats"}, "output");
        cfg.output.directory = detail::take_string(o, "directory", cfg.output.directory, "output");
        if (o.contains("formats")) {
            if (!o["formats"].is_array())
                throw invalid_input("config: output.formats must be an array");
            cfg.output.json_format = false;
            cfg.output.csv_format = false;
            for (const json& f : o["formats"]) {
                if (!f.is_string())
                    throw invalid_input("config: output.formats entries must be strings");
                std::string name = f.get<std::string>();
                if (name == "json")
                    cfg.output.json_format = true;
                else if (name == "csv")
                    cfg.output.csv_format = true;
                else
                    throw invalid_input("config: unsupported output format '" + name + "'");
            }
        }
    }

    // value-range validation
    if (cfg.basis.M < 1 || cfg.basis.M > 64)
        throw invalid_input("config: basis.M must lie in [1, 64]");
    if (cfg.basis.Q < 2 * cfg.basis.M)
        throw invalid_input("config: basis.Q must be at least 2 M");
    if (cfg.model.omega <= 0) throw invalid_input("config: model.omega must be positive");
    if (cfg.model.g < 0) throw invalid_input("config: model.g must be nonnegative");
    if (cfg.model.sigma <= 0) throw invalid_input("config: model.sigma must be positive");
    if (cfg.model.N < 1) throw invalid_input("config: model.N must be at least 1");
    if (cfg.riccati.solver != "variational" && cfg.riccati.solver != "greedy" &&
        cfg.riccati.solver != "bdg" && cfg.riccati.solver != "all")
        throw invalid_input("config: riccati.solver must be variational, greedy, bdg, or all");
    if (cfg.riccati.tol <= 0) throw invalid_input("config: riccati.tol must be positive");
    if (cfg.riccati.max_iter < 1) throw invalid_input("config: riccati.max_iter must be positive");
    if (cfg.riccati.restarts < 1) throw invalid_input("config: riccati.restarts must be positive");
    if (cfg.fock.m < 2) throw invalid_input("config: fock.m must be at least 2");
    if (cfg.fock.m > cfg.basis.M)
        throw invalid_input("config: fock.m cannot exceed the basis size");
    if (cfg.fock.N < 1) throw invalid_input("config: fock.N must be at least 1");
    if (cfg.output.directory.empty())
        throw invalid_input("config: output.directory must be nonempty");
    return cfg;
}

// Fully-resolved echo of the configuration; also the canonical form that
// stage hashes are computed over (nlohmann objects iterate in sorted key
// order, so serialization is deterministic).
inline json config_to_json(const RunConfig& cfg) {
    json j;
    j["basis"] = {{"M", cfg.basis.M}, {"Q", cfg.basis.Q}};
    j["model"] = {{"omega", cfg.model.omega},
                  {"g", cfg.model.g},
                  {"sigma", cfg.model.sigma},
                  {"N", cfg.model.N}};
    j["riccati"] = {{"solver", cfg.riccati.solver},
                    {"tol", cfg.riccati.tol},
                    {"max_iter", cfg.riccati.max_iter},
                    {"restarts", cfg.riccati.restarts},
                    {"seed", cfg.riccati.seed}};
    j["fock"] = {{"m", cfg.fock.m},
                 {"N", cfg.fock.N},
                 {"theorem2", cfg.fock.theorem2},
                 {"projectors", cfg.fock.projectors},
                 {"eigenvector", cfg.fock.eigenvector},
                 {"conjugation", cfg.fock.conjugation},
                 {"bogoliubov", cfg.fock.bogoliubov}};
    json formats = json::array();
    if (cfg.output.csv_format) formats.push_back("csv");
    if (cfg.output.json_format) formats.push_back("json");
    j["output"] = {{"directory", cfg.output.directory}, {"formats", formats}};
    return j;
}

// Config closure feeding each stage's content hash: a stage recomputes iff
// something it actually depends on changed.
inline json stage_closure(const RunConfig& cfg, const std::string& stage) {
    json full = config_to_json(cfg);
    json j;
    j["basis"] = full["basis"];
    j["model"] = full["model"];
    if (stage == "hartree") return j;
    j["riccati"] = full["riccati"];
    if (stage == "riccati" || stage == "spectrum") return j;
    if (stage == "fock") {
        j["fock"] = full["fock"];
        return j;
    }
    throw invalid_input("stage_closure: unknown stage '" + stage + "'");
}

inline unsigned long long fnv1a64(const std::string& bytes) {
    unsigned long long h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string stage_hash(const RunConfig& cfg, const std::string& stage) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", fnv1a64(stage_closure(cfg, stage).dump()));
    return buf;
}

}  // namespace pairwave
