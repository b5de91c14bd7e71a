#pragma once

// Run configuration and its JSON schema. The schema text below is the one
// published in docs/config.schema.json; validation supports the keywords it uses.

#include "mgconv/fields.hpp"
#include "mgconv/mldata.hpp"
#include "mgconv/multigrid.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgconv {

inline const char* config_schema_text() {
    return R"SCHEMA({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "$id": "mgconv/config/v1",
  "title": "mgconv run configuration",
  "type": "object",
  "additionalProperties": false,
  "required": ["field", "grid"],
  "properties": {
    "version": {"type": "integer", "enum": [1]},
    "seed": {"type": "integer", "minimum": 0},
    "field": {
      "type": "object",
      "additionalProperties": false,
      "required": ["kind", "p"],
      "properties": {
        "kind": {"type": "string", "enum": ["uniform", "lognormal", "cookie_fixed", "cookie_variable"]},
        "p": {"type": "integer", "minimum": 1}
      }
    },
    "grid": {
      "type": "object",
      "additionalProperties": false,
      "required": ["levels"],
      "properties": {
        "coarse_cells": {"type": "integer", "minimum": 2},
        "levels": {"type": "integer", "minimum": 1, "maximum": 10}
      }
    },
    "solver": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "k_pre": {"type": "integer", "minimum": 0},
        "k_post": {"type": "integer", "minimum": 0},
        "k0": {"type": "integer", "minimum": 0},
        "m": {"type": "integer", "minimum": 0},
        "omega_mode": {"type": "string", "enum": ["auto", "fixed"]},
        "omega": {"type": "number", "minimum": 0},
        "rtol": {"type": "number", "exclusiveMinimum": 0},
        "max_cycles": {"type": "integer", "minimum": 1},
        "source": {"type": "number"}
      }
    },
    "dataset": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "n1": {"type": "integer", "minimum": 1},
        "decay": {"type": "boolean"},
        "out_dir": {"type": "string"},
        "coarse_solutions": {"type": "string", "enum": ["interpolation", "galerkin"]},
        "workers": {"type": "integer", "minimum": 1}
      }
    },
    "verify": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "mul_bound": {"type": "number", "exclusiveMinimum": 0},
        "mul_epsilon": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5}
      }
    },
    "contraction": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "levels": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1, "maximum": 7}},
        "k": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "cycles": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 1}
      }
    },
    "weights": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "levels": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "k": {"type": "integer", "minimum": 0},
        "k0": {"type": "integer", "minimum": 0},
        "m": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5}
      }
    },
    "metrics": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "samples": {"type": "integer", "minimum": 1},
        "reference_offset": {"type": "integer", "minimum": 0, "maximum": 3}
      }
    }
  }
}
)SCHEMA";
}

inline const nlohmann::json& config_schema() {
    static const nlohmann::json schema = nlohmann::json::parse(config_schema_text());
    return schema;
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool schema_type_matches(const nlohmann::json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    if (type == "number") return v.is_number();
    if (type == "null") return v.is_null();
    return false;
}

inline void validate_node(const nlohmann::json& v, const nlohmann::json& s, const std::string& path,
                          std::vector<std::string>& errors) {
    const std::string where = path.empty() ? "(root)" : path;
    if (s.contains("type") && !schema_type_matches(v, s["type"].get<std::string>())) {
        errors.push_back(where + ": expected " + s["type"].get<std::string>());
        return;
    }
    if (s.contains("enum")) {
        bool found = false;
        for (const auto& e : s["enum"]) found = found || e == v;
        if (!found) errors.push_back(where + ": value " + v.dump() + " not in " + s["enum"].dump());
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (s.contains("minimum") && x < s["minimum"].get<double>()) errors.push_back(where + ": below minimum " + s["minimum"].dump());
        if (s.contains("maximum") && x > s["maximum"].get<double>()) errors.push_back(where + ": above maximum " + s["maximum"].dump());
        if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>()) {
            errors.push_back(where + ": must exceed " + s["exclusiveMinimum"].dump());
        }
    }
    if (v.is_object()) {
        const nlohmann::json props = s.value("properties", nlohmann::json::object());
        for (const auto& r : s.value("required", nlohmann::json::array())) {
            if (!v.contains(r.get<std::string>())) errors.push_back(where + ": missing required key '" + r.get<std::string>() + "'");
        }
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (props.contains(it.key())) {
                validate_node(it.value(), props[it.key()], path + "/" + it.key(), errors);
            } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
                errors.push_back(where + ": unknown key '" + it.key() + "'");
            }
        }
    }
    if (v.is_array()) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errors.push_back(where + ": too few items");
        if (s.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i) validate_node(v[i], s["items"], path + "/" + std::to_string(i), errors);
        }
    }
}

} // namespace detail

/// All schema violations, empty when valid.
inline std::vector<std::string> validate_config(const nlohmann::json& doc) {
    std::vector<std::string> errors;
    detail::validate_node(doc, config_schema(), "", errors);
    return errors;
}

struct VerifySettings {
    double tolerance = 1e-12;
    int samples = 5;
    double mul_bound = 2.0;
    double mul_epsilon = 1e-3;
};

struct ContractionSettings {
    std::vector<int> levels{3, 4, 5};
    std::vector<int> k{1, 2, 4, 8};
    int cycles = 10;
    int samples = 3;
};

struct WeightSettings {
    std::vector<int> levels{3, 4, 5, 6};
    int k = 3;
    int k0 = 4;
    std::vector<int> m{1, 2, 4};
    double epsilon = 1e-3;
};

struct MetricSettings {
    int samples = 4;
    int reference_offset = 2;
};

struct RunConfig {
    std::uint64_t seed = 0;
    FieldSpec field;
    int coarse_cells = 5;
    int levels = 4;
    SolverSettings solver;
    int cycles = 30;
    int n1 = 16;
    bool decay = true;
    std::string out_dir = "dataset";
    int workers = 1;
    VerifySettings verify;
    ContractionSettings contraction;
    WeightSettings weights;
    MetricSettings metrics;

    GridHierarchy hierarchy() const { return GridHierarchy(coarse_cells, levels); }
    std::vector<int> schedule() const { return decay ? decay_schedule(n1, levels) : flat_schedule(n1, levels); }
    VCycleConfig cycle() const {
        VCycleConfig c = solver.cycle;
        c.m = cycles;
        return c;
    }
};

/// Validate against the schema, then read with defaults for omitted keys.
inline RunConfig parse_config(const nlohmann::json& doc) {
    const std::vector<std::string> errors = validate_config(doc);
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const std::string& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    RunConfig c;
    c.seed = doc.value("seed", std::uint64_t{0});
    try {
        c.field = doc.at("field").get<FieldSpec>();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid configuration: field: ") + e.what());
    }
    const auto& grid = doc.at("grid");
    c.coarse_cells = grid.value("coarse_cells", 5);
    c.levels = grid.at("levels").get<int>();
    if (doc.contains("solver")) {
        const auto& s = doc["solver"];
        c.solver = s.get<SolverSettings>();
        c.cycles = s.value("m", 30);
        if (c.solver.cycle.omega_mode == OmegaMode::Fixed && !(c.solver.cycle.omega > 0.0)) {
            throw ConfigError("invalid configuration: /solver/omega must be positive when omega_mode is fixed");
        }
    }
    if (doc.contains("dataset")) {
        const auto& d = doc["dataset"];
        c.n1 = d.value("n1", 16);
        c.decay = d.value("decay", true);
        c.out_dir = d.value("out_dir", std::string("dataset"));
        c.workers = d.value("workers", 1);
        if (d.value("coarse_solutions", std::string("interpolation")) == "galerkin") {
            c.solver.coarse_mode = CoarseSolutionMode::Galerkin;
        }
    }
    if (doc.contains("verify")) {
        const auto& v = doc["verify"];
        c.verify.tolerance = v.value("tolerance", c.verify.tolerance);
        c.verify.samples = v.value("samples", c.verify.samples);
        c.verify.mul_bound = v.value("mul_bound", c.verify.mul_bound);
        c.verify.mul_epsilon = v.value("mul_epsilon", c.verify.mul_epsilon);
    }
    if (doc.contains("contraction")) {
        const auto& v = doc["contraction"];
        c.contraction.levels = v.value("levels", c.contraction.levels);
        c.contraction.k = v.value("k", c.contraction.k);
        c.contraction.cycles = v.value("cycles", c.contraction.cycles);
        c.contraction.samples = v.value("samples", c.contraction.samples);
    }
    if (doc.contains("weights")) {
        const auto& v = doc["weights"];
        c.weights.levels = v.value("levels", c.weights.levels);
        c.weights.k = v.value("k", c.weights.k);
        c.weights.k0 = v.value("k0", c.weights.k0);
        c.weights.m = v.value("m", c.weights.m);
        c.weights.epsilon = v.value("epsilon", c.weights.epsilon);
    }
    if (doc.contains("metrics")) {
        const auto& v = doc["metrics"];
        c.metrics.samples = v.value("samples", c.metrics.samples);
        c.metrics.reference_offset = v.value("reference_offset", c.metrics.reference_offset);
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

} // namespace mgconv
