#pragma once

// Experiment configuration: a versioned JSON document. The schema is the
// document of defaults itself; a key absent from it is rejected, a value must
// have the type of its default. Version 1 documents predate the `monitors`
// and `tolerances` sections and load with their defaults.

#include "../types.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace oldrlab::runner {

using nlohmann::json;

inline constexpr int kSchemaVersion = 2;

/// Invalid configuration; keys() lists every offending dotted key.
class SchemaError : public ConfigError {
public:
    SchemaError(const std::string& what, std::vector<std::string> keys)
        : ConfigError(what + join(keys)), keys_(std::move(keys)) {}
    const std::vector<std::string>& keys() const { return keys_; }

private:
    static std::string join(const std::vector<std::string>& k) {
        std::string s;
        for (std::size_t i = 0; i < k.size(); ++i) s += (i ? ", " : ": ") + k[i];
        return s;
    }
    std::vector<std::string> keys_;
};

inline json common_defaults() {
    return {
        {"version", kSchemaVersion},
        {"scenario", ""},
        {"seed", std::uint64_t{42}},
        {"grid", {{"n", 32}}},
        {"time", {{"dt", 1e-2}, {"t_end", 1.0}, {"record_every", 1}}},
        {"model", {{"k", 1.0}, {"epsilon", 1.0}, {"R", 1.0}}},
        {"initial",
         {{"family", "random"},
          {"amplitude", 0.1},
          {"kmax", 3},
          {"decay", 1.0},
          {"rho_bar", 1.0},
          {"rho_amplitude", 0.0},
          {"rho_kmax", 2},
          {"trace_excess", 3.0},
          {"path", ""}}},
        {"monitors", {{"holder", false}, {"holder_alpha", 0.5}, {"snapshot_final", false}}},
        {"tolerances", json::object()},
        {"params", json::object()},
    };
}

/// Per-scenario defaults layered over common_defaults(); their `params` and
/// `tolerances` objects define the keys those sections accept.
inline const std::map<std::string, json>& presets() {
    static const std::map<std::string, json> p = {
        {"equilibrium2d",
         {{"grid", {{"n", 32}}},
          {"time", {{"dt", 1e-2}, {"t_end", 1.0}}},
          {"initial", {{"family", "equilibrium"}}},
          {"tolerances", {{"stationarity", 1e-14}}}}},
        {"smalldata-decay",
         {{"grid", {{"n", 64}}},
          {"time", {{"dt", 1e-2}, {"t_end", 5.0}, {"record_every", 5}}},
          {"model", {{"k", 0.04}, {"epsilon", 1.0}, {"R", 1.0}}},
          {"initial", {{"amplitude", 0.01}, {"kmax", 3}}},
          {"tolerances", {{"rate_low", 0.85}, {"rate_high", 1.3}, {"r2_min", 0.99}, {"smallness", 0.05}}},
          {"params", {{"drop_fraction", 0.1}}}}},
        {"relaxationless-det",
         {{"grid", {{"n", 32}}},
          {"time", {{"dt", 1e-3}, {"t_end", 0.5}, {"record_every", 10}}},
          {"model", {{"k", 1.0}, {"epsilon", 0.0}, {"R", 1.0}}},
          {"initial", {{"amplitude", 0.5}}},
          {"tolerances", {{"det_drift", 1e-5}}}}},
        {"lagrangian-crosscheck",
         {{"grid", {{"n", 64}}},
          {"time", {{"dt", 2e-3}, {"t_end", 0.48}, {"record_every", 20}}},
          {"model", {{"k", 2.0}, {"epsilon", 0.5}, {"R", 1.0}}},
          {"initial", {{"amplitude", 2.0}, {"rho_amplitude", 0.3}, {"trace_excess", 2.5}}},
          {"tolerances", {{"relative_error", 1e-3}}},
          {"params", {{"particles_per_side", 16}, {"substeps", 4}}}}},
        {"blowup1d-riccati",
         {{"grid", {{"n", 512}}},
          {"time", {{"dt", 1e-3}, {"t_end", 8.0}, {"record_every", 10}}},
          {"model", {{"k", 1.0}, {"epsilon", 0.0}, {"R", 1.0}}},
          {"initial", {{"family", "riccati"}}},
          {"tolerances", {{"blowup_time_rel", 0.05}, {"characteristic", 1e-4}}},
          {"params", {{"beta", -0.5}, {"advection", false}, {"tail_tol", 1e-6}}}}},
        {"cone-invariance",
         {{"time", {{"dt", 1e-2}, {"t_end", 10.0}, {"record_every", 10}}},
          {"initial", {{"family", "cone"}}},
          {"tolerances", {{"margin", 1e-8}, {"field_min", 1e-8}, {"envelope_rel", 1e-6}}},
          {"params", {{"dim", 1}, {"K", 6}, {"gamma", 1.0}, {"trials", 10}, {"slack", 0.1}, {"sexp", 1.0}}}}},
        {"regularized-trace",
         {{"grid", {{"n", 32}}},
          {"time", {{"dt", 1e-3}, {"t_end", 0.3}, {"record_every", 10}}},
          {"model", {{"k", 1.0}, {"epsilon", 0.5}, {"R", 1.0}}},
          {"initial", {{"amplitude", 5.0}, {"rho_amplitude", 0.2}}},
          {"tolerances", {{"trace_rel", 1e-6}, {"damping", 1e-12}}},
          {"params", {{"kappa", 1.0}, {"C0", 1.5}, {"c", 1.0}, {"R_amplitude", 0.3}}}}},
        {"calderon-monitor",
         {{"grid", {{"n", 32}}},
          {"initial", {{"kmax", 6}}},
          {"tolerances", {{"refinement_change", 0.2}}},
          {"params", {{"family_size", 10}, {"alpha", 0.5}}}}},
        {"constant-gradient",
         {{"model", {{"k", 1.0}, {"epsilon", 1.0}, {"R", 1.0}}},
          {"time", {{"t_end", 40.0}}},
          {"initial", {{"family", "uniform"}}},
          {"params", {{"delta_ratio", 4.0}, {"samples", 41}}}}},
    };
    return p;
}

inline std::vector<std::string> scenario_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : presets()) out.push_back(k);
    return out;
}

namespace detail {

inline void overlay(json& base, const json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            overlay(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

/// Writes patch into base where the schema (base) has the key and type.
inline void merge_checked(json& base, const json& patch, const std::string& prefix, std::vector<std::string>& unknown,
                          std::vector<std::string>& mistyped) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) {
            unknown.push_back(key);
            continue;
        }
        json& slot = base[it.key()];
        const json& v = *it;
        if (slot.is_object()) {
            if (v.is_object())
                merge_checked(slot, v, key, unknown, mistyped);
            else
                mistyped.push_back(key);
        } else if (slot.is_number_float()) {
            if (v.is_number())
                slot = v.get<double>();
            else
                mistyped.push_back(key);
        } else if (slot.is_number_unsigned()) {
            if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))
                slot = v.get<std::uint64_t>();
            else
                mistyped.push_back(key);
        } else if (slot.is_number_integer()) {
            if (v.is_number_integer())
                slot = v.get<std::int64_t>();
            else if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()) && std::abs(v.get<double>()) < 1e15)
                slot = static_cast<std::int64_t>(v.get<double>());
            else
                mistyped.push_back(key);
        } else if (slot.type() == v.type()) {
            slot = v;
        } else {
            mistyped.push_back(key);
        }
    }
}

}  // namespace detail

/// FNV-1a over bytes.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Sets the value at a dotted key path, creating intermediate objects.
inline void set_path(json& doc, const std::string& path, const json& value) {
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw SchemaError("key path has an empty segment", {path});
        if (!node->is_object()) throw SchemaError("key path descends into a non-object", {path});
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

/// Applies "a.b.c=value"; value is JSON if it parses, else a string.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw SchemaError("override must be key=value", {assignment});
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set_path(doc, assignment.substr(0, eq), value);
}

struct ExperimentConfig {
    /// Normalized document: every schema key present, version = current.
    json doc;

    const std::string& scenario() const { return doc["scenario"].get_ref<const std::string&>(); }
    std::uint64_t seed() const { return doc["seed"].get<std::uint64_t>(); }
    int n() const { return doc["grid"]["n"].get<int>(); }
    double dt() const { return doc["time"]["dt"].get<double>(); }
    double t_end() const { return doc["time"]["t_end"].get<double>(); }
    int record_every() const { return doc["time"]["record_every"].get<int>(); }
    double k() const { return doc["model"]["k"].get<double>(); }
    double epsilon() const { return doc["model"]["epsilon"].get<double>(); }
    double R() const { return doc["model"]["R"].get<double>(); }
    const json& initial() const { return doc["initial"]; }
    const json& monitors() const { return doc["monitors"]; }
    template <class T>
    T param(const std::string& name) const {
        return doc["params"].at(name).get<T>();
    }
    double tol(const std::string& name) const { return doc["tolerances"].at(name).get<double>(); }

    /// Canonical text: sorted keys, fixed number formatting.
    std::string canonical() const { return doc.dump(); }
    std::string hash() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
        return buf;
    }

    void validate() const {
        std::vector<std::string> bad;
        if (n() < 4 || n() % 2 != 0) bad.push_back("grid.n (even, >= 4)");
        if (!(dt() > 0.0)) bad.push_back("time.dt (> 0)");
        if (!(t_end() >= 0.0)) bad.push_back("time.t_end (>= 0)");
        if (record_every() < 1) bad.push_back("time.record_every (>= 1)");
        if (!(k() >= 0.0)) bad.push_back("model.k (>= 0)");
        if (!(epsilon() >= 0.0)) bad.push_back("model.epsilon (>= 0)");
        if (!(R() > 0.0)) bad.push_back("model.R (> 0)");
        const double a = monitors()["holder_alpha"].get<double>();
        if (!(a > 0.0 && a < 1.0)) bad.push_back("monitors.holder_alpha (in (0, 1))");
        if (!bad.empty()) throw SchemaError("config values out of range", bad);
    }
};

/// Validates a raw document against the schema of its scenario and fills
/// defaults. scenario_hint (from the command line) must agree with the
/// document's own scenario when both are given.
inline ExperimentConfig normalize(const json& raw, const std::string& scenario_hint = "") {
    if (!raw.is_object()) throw SchemaError("config must be a JSON object", {"<root>"});
    if (!raw.contains("version")) throw SchemaError("config lacks a schema version", {"version"});
    if (!raw["version"].is_number_integer()) throw SchemaError("version must be an integer", {"version"});
    const int version = raw["version"].get<int>();
    if (version < 1 || version > kSchemaVersion) throw SchemaError("unsupported schema version", {"version"});

    std::string scenario = scenario_hint;
    if (raw.contains("scenario")) {
        if (!raw["scenario"].is_string()) throw SchemaError("scenario must be a string", {"scenario"});
        const std::string own = raw["scenario"].get<std::string>();
        if (!own.empty()) {
            if (!scenario.empty() && own != scenario)
                throw SchemaError("config scenario differs from the requested one", {"scenario"});
            scenario = own;
        }
    }
    const auto& table = presets();
    if (!table.contains(scenario)) {
        std::string known;
        for (const auto& [k, v] : table) known += " " + k;
        throw SchemaError("unknown scenario (known:" + known + ")", {scenario.empty() ? "scenario" : scenario});
    }

    json doc = common_defaults();
    detail::overlay(doc, table.at(scenario));
    doc["scenario"] = scenario;

    json body = raw;
    body.erase("version");
    body.erase("scenario");
    std::vector<std::string> unknown, mistyped;
    if (version < 2)
        for (const char* later : {"monitors", "tolerances"})
            if (body.contains(later)) {
                unknown.push_back(std::string(later) + " (not in schema version 1)");
                body.erase(later);
            }
    detail::merge_checked(doc, body, "", unknown, mistyped);
    if (!unknown.empty()) throw SchemaError("unknown config keys", unknown);
    if (!mistyped.empty()) throw SchemaError("config values of the wrong type", mistyped);
    doc["version"] = kSchemaVersion;
    ExperimentConfig cfg{std::move(doc)};
    cfg.validate();
    return cfg;
}

}  // namespace oldrlab::runner
