#pragma once

// Experiment driver: single runs, parameter sweeps and golden verification.
// A run directory holds config.json (normalized), series.csv, summary.json
// and, when requested, final.oldr. summary.json is a deterministic function
// of the config apart from wall_clock_s.

#include "scenarios.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace oldrlab::runner {

namespace fs = std::filesystem;

inline int exit_code(const std::string& status) {
    if (status == "completed") return 0;
    if (status == "blowup_flag") return 2;
    return 1;
}

struct RunSummary {
    json doc;
    Outcome outcome;
    int exit_code = 1;
};

inline json invariants_json(const Outcome& o) {
    json t = json::object();
    for (const auto& i : o.invariants) t[i.name] = {{"relation", i.relation}, {"limit", i.limit}, {"pass", i.pass}};
    return t;
}

inline json final_norms(const Outcome& o) {
    if (o.series.empty()) return json::object();
    const auto& r = o.series.back();
    json n = {{"t", r.t},           {"L1_tau", r.l1_tau},         {"Linf_tau", r.linf_tau},
              {"holder_tau", r.holder_tau}, {"L1_rho", r.l1_rho}, {"Linf_rho", r.linf_rho},
              {"grad_u_inf", r.grad_u_inf}, {"det_min", r.det_min}};
    for (const auto& [k, v] : r.extra) n[k] = v;
    return n;
}

/// Runs the scenario; library errors become status "error".
inline Outcome execute(const ExperimentConfig& cfg) {
    try {
        return scenario(cfg.scenario())(cfg);
    } catch (const std::exception& e) {
        Outcome o;
        o.status = "error";
        o.reason = e.what();
        return o;
    }
}

inline json summary_json(const ExperimentConfig& cfg, const Outcome& o, double wall) {
    return {{"schema_version", kSchemaVersion},
            {"scenario", cfg.scenario()},
            {"config_hash", cfg.hash()},
            {"status", o.status},
            {"reason", o.reason},
            {"final_norms", final_norms(o)},
            {"fitted", o.fitted},
            {"metrics", o.metrics},
            {"invariants", invariants_json(o)},
            {"all_invariants_pass", o.all_pass()},
            {"wall_clock_s", wall}};
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << text;
    if (!os) throw ConfigError("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline json read_json(const fs::path& path) {
    const json j = json::parse(read_text(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("not valid JSON: " + path.string());
    return j;
}

inline std::string series_csv(const ExperimentConfig& cfg, const Outcome& o) {
    std::ostringstream os;
    write_csv(os, o.series, "scenario " + cfg.scenario() + " config " + cfg.hash());
    return os.str();
}

/// Runs cfg and writes its artifacts into out_dir.
inline RunSummary run_scenario(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    RunSummary s;
    s.outcome = execute(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    s.doc = summary_json(cfg, s.outcome, wall);
    s.exit_code = exit_code(s.outcome.status);
    write_text(out_dir / "config.json", cfg.doc.dump(2) + "\n");
    write_text(out_dir / "series.csv", series_csv(cfg, s.outcome));
    write_text(out_dir / "summary.json", s.doc.dump(2) + "\n");
    if (s.outcome.snapshot) save_snapshot((out_dir / "final.oldr").string(), *s.outcome.snapshot);
    return s;
}

// ---------------------------------------------------------------- sweep

/// Parallelism cap: OLDRLAB_THREADS if set (>= 1), else the hardware count.
inline unsigned thread_cap() {
    if (const char* env = std::getenv("OLDRLAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("OLDRLAB_THREADS must be a positive integer");
        return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepCell {
    std::vector<std::pair<std::string, json>> assignment;
    std::string directory;
    std::string status;
    int exit_code = 1;
    std::string hash;
    json summary;
};

/// Cartesian product of {"parameters": {"dotted.key": [values...]}} in
/// key order, last key fastest.
inline std::vector<std::vector<std::pair<std::string, json>>> grid_cells(const json& grid) {
    if (!grid.is_object() || !grid.contains("parameters") || !grid["parameters"].is_object())
        throw SchemaError("sweep grid needs a \"parameters\" object", {"parameters"});
    std::vector<std::string> unknown;
    for (auto it = grid.begin(); it != grid.end(); ++it)
        if (it.key() != "parameters") unknown.push_back(it.key());
    if (!unknown.empty()) throw SchemaError("unknown sweep grid keys", unknown);
    const json& params = grid["parameters"];
    if (params.empty()) throw SchemaError("sweep grid has no parameters", {"parameters"});
    std::vector<std::vector<std::pair<std::string, json>>> cells{{}};
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (!it->is_array() || it->empty()) throw SchemaError("sweep values must be a nonempty list", {it.key()});
        std::vector<std::vector<std::pair<std::string, json>>> next;
        for (const auto& c : cells)
            for (const auto& v : *it) {
                auto d = c;
                d.emplace_back(it.key(), v);
                next.push_back(std::move(d));
            }
        cells = std::move(next);
    }
    return cells;
}

inline std::string csv_field(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        return os.str();
    }
    if (v.is_null()) return "";
    return v.dump();
}

/// Runs every cell of the grid over the raw template. Cells run concurrently,
/// each writing only its own directory; failures are recorded per cell.
inline std::vector<SweepCell> sweep(const json& raw_template, const json& grid, const fs::path& out_dir,
                                    const std::string& scenario_hint = "", unsigned threads = 0) {
    const auto assignments = grid_cells(grid);
    fs::create_directories(out_dir);
    std::vector<SweepCell> cells(assignments.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cells[i].assignment = assignments[i];
        char name[32];
        std::snprintf(name, sizeof name, "cell_%04zu", i);
        cells[i].directory = name;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            auto& cell = cells[i];
            try {
                json raw = raw_template;
                for (const auto& [k, v] : cell.assignment) set_path(raw, k, v);
                const auto cfg = normalize(raw, scenario_hint);
                const auto s = run_scenario(cfg, out_dir / cell.directory);
                cell.status = s.outcome.status;
                cell.exit_code = s.exit_code;
                cell.hash = cfg.hash();
                cell.summary = s.doc;
            } catch (const std::exception& e) {
                cell.status = "error";
                cell.exit_code = 1;
                cell.summary = {{"status", "error"}, {"reason", e.what()}};
            }
        }
    };
    const unsigned n = std::min<std::size_t>(threads ? threads : thread_cap(), cells.size());
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // Aggregate: assignment columns, status, then the union of fitted and
    // metric keys (blank where a cell lacks one).
    std::set<std::string> fitted_keys, metric_keys;
    for (const auto& c : cells) {
        if (c.summary.contains("fitted"))
            for (auto it = c.summary["fitted"].begin(); it != c.summary["fitted"].end(); ++it) fitted_keys.insert(it.key());
        if (c.summary.contains("metrics"))
            for (auto it = c.summary["metrics"].begin(); it != c.summary["metrics"].end(); ++it) metric_keys.insert(it.key());
    }
    std::ostringstream os;
    os << "cell";
    for (const auto& [k, v] : assignments.front()) os << ',' << k;
    os << ",status,exit_code,config_hash,all_invariants_pass";
    for (const auto& k : fitted_keys) os << ",fitted." << k;
    for (const auto& k : metric_keys) os << ",metrics." << k;
    os << ",reason\n";
    json table = json::array();
    for (const auto& c : cells) {
        os << c.directory;
        for (const auto& [k, v] : c.assignment) os << ',' << csv_field(v);
        os << ',' << c.status << ',' << c.exit_code << ',' << c.hash << ','
           << (c.summary.contains("all_invariants_pass") ? c.summary["all_invariants_pass"].dump() : "");
        for (const auto& k : fitted_keys)
            os << ',' << (c.summary.contains("fitted") && c.summary["fitted"].contains(k) ? csv_field(c.summary["fitted"][k]) : "");
        for (const auto& k : metric_keys)
            os << ',' << (c.summary.contains("metrics") && c.summary["metrics"].contains(k) ? csv_field(c.summary["metrics"][k]) : "");
        std::string reason = c.summary.value("reason", "");
        std::replace(reason.begin(), reason.end(), ',', ';');
        std::replace(reason.begin(), reason.end(), '\n', ' ');
        os << ',' << reason << '\n';
        json a = json::object();
        for (const auto& [k, v] : c.assignment) a[k] = v;
        table.push_back({{"cell", c.directory}, {"assignment", a}, {"summary", c.summary}});
    }
    write_text(out_dir / "sweep.csv", os.str());
    write_text(out_dir / "sweep.json", table.dump(2) + "\n");
    return cells;
}

// ---------------------------------------------------------------- verify

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ConfigError("csv row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                              " fields, header has " + std::to_string(t.header.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end == c.c_str() || *end != '\0') throw ConfigError("csv: not a number: '" + c + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ConfigError("csv: no header row");
    return t;
}

struct ColumnTolerance {
    double rel = 1e-4;
    double abs = 1e-8;
};

/// {"default": {"rel", "abs"}, "columns": {"name": {"rel", "abs"}}}; all optional.
struct SeriesTolerances {
    ColumnTolerance fallback;
    std::map<std::string, ColumnTolerance> columns;

    static SeriesTolerances from_json(const json& j) {
        SeriesTolerances t;
        auto read = [](const json& o, ColumnTolerance base) {
            for (auto it = o.begin(); it != o.end(); ++it) {
                if (it.key() == "rel")
                    base.rel = it->get<double>();
                else if (it.key() == "abs")
                    base.abs = it->get<double>();
                else
                    throw SchemaError("unknown tolerance key", {it.key()});
            }
            return base;
        };
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "default")
                t.fallback = read(*it, t.fallback);
            else if (it.key() != "columns")
                throw SchemaError("unknown tolerances.json key", {it.key()});
        }
        if (j.contains("columns"))
            for (auto it = j["columns"].begin(); it != j["columns"].end(); ++it) t.columns[it.key()] = read(*it, t.fallback);
        return t;
    }
    ColumnTolerance of(const std::string& col) const {
        const auto it = columns.find(col);
        return it == columns.end() ? fallback : it->second;
    }
};

/// Per-column comparison; the report lists every column out of tolerance
/// with its worst row and excess.
inline json compare_series(const CsvTable& golden, const CsvTable& fresh, const SeriesTolerances& tol) {
    json rep = {{"pass", true}, {"columns", json::array()}};
    if (golden.header != fresh.header) {
        rep["pass"] = false;
        rep["problem"] = "header differs";
        return rep;
    }
    if (golden.rows.size() != fresh.rows.size()) {
        rep["pass"] = false;
        rep["problem"] = "row count differs (" + std::to_string(golden.rows.size()) + " vs " +
                         std::to_string(fresh.rows.size()) + ")";
        return rep;
    }
    for (std::size_t c = 0; c < golden.header.size(); ++c) {
        const auto t = tol.of(golden.header[c]);
        double worst = 0.0;
        std::size_t worst_row = 0;
        for (std::size_t r = 0; r < golden.rows.size(); ++r) {
            const double g = golden.rows[r][c];
            const double f = fresh.rows[r][c];
            double excess = 0.0;
            if (std::isnan(g) || std::isnan(f)) {
                excess = std::isnan(g) && std::isnan(f) ? 0.0 : INFINITY;
            } else if (std::isinf(g) || std::isinf(f)) {
                excess = g == f ? 0.0 : INFINITY;
            } else {
                const double allowed = t.abs + t.rel * std::abs(g);
                excess = std::abs(g - f) / allowed;
            }
            if (excess > worst) {
                worst = excess;
                worst_row = r;
            }
        }
        if (worst > 1.0) {
            rep["pass"] = false;
            rep["columns"].push_back({{"column", golden.header[c]},
                                      {"row", worst_row},
                                      {"golden", golden.rows[worst_row][c]},
                                      {"fresh", fresh.rows[worst_row][c]},
                                      {"excess_over_tolerance", worst}});
        }
    }
    return rep;
}

struct VerifyReport {
    bool pass = false;
    json doc;
};

/// Re-runs every case directory under golden_dir into out_dir and compares.
/// A case holds config.json, summary.json, series.csv and optionally
/// tolerances.json.
inline VerifyReport verify(const fs::path& golden_dir, const fs::path& out_dir) {
    VerifyReport rep;
    rep.doc = {{"golden", golden_dir.string()}, {"cases", json::array()}};
    if (!fs::is_directory(golden_dir)) {
        rep.doc["status"] = "missing_golden_dir";
        return rep;
    }
    std::vector<fs::path> cases;
    for (const auto& e : fs::directory_iterator(golden_dir))
        if (e.is_directory()) cases.push_back(e.path());
    std::sort(cases.begin(), cases.end());
    if (cases.empty()) {
        rep.doc["status"] = "no_goldens";
        return rep;
    }
    fs::create_directories(out_dir);
    bool all = true;
    for (const auto& dir : cases) {
        json c = {{"case", dir.filename().string()}};
        std::vector<std::string> missing;
        for (const char* f : {"config.json", "summary.json", "series.csv"})
            if (!fs::exists(dir / f)) missing.push_back(f);
        if (!missing.empty()) {
            c["status"] = "missing_files";
            c["missing"] = missing;
            c["pass"] = false;
            all = false;
            rep.doc["cases"].push_back(c);
            continue;
        }
        try {
            const auto cfg = normalize(read_json(dir / "config.json"));
            const json golden = read_json(dir / "summary.json");
            const auto tol = fs::exists(dir / "tolerances.json") ? SeriesTolerances::from_json(read_json(dir / "tolerances.json"))
                                                                 : SeriesTolerances{};
            const auto fresh = run_scenario(cfg, out_dir / dir.filename());
            const bool status_ok = golden.value("status", "") == fresh.outcome.status;
            const std::string gi = golden.contains("invariants") ? golden["invariants"].dump() : "";
            const bool inv_ok = gi == fresh.doc["invariants"].dump();
            const auto series = compare_series(parse_csv(read_text(dir / "series.csv")),
                                               parse_csv(read_text(out_dir / dir.filename() / "series.csv")), tol);
            const bool pass = status_ok && inv_ok && series["pass"].get<bool>();
            c["status"] = pass ? "pass" : "fail";
            c["status_match"] = status_ok;
            c["invariants_match"] = inv_ok;
            if (!inv_ok) {
                c["golden_invariants"] = golden.value("invariants", json());
                c["fresh_invariants"] = fresh.doc["invariants"];
            }
            c["series"] = series;
            c["pass"] = pass;
            all = all && pass;
        } catch (const std::exception& e) {
            c["status"] = "error";
            c["reason"] = e.what();
            c["pass"] = false;
            all = false;
        }
        rep.doc["cases"].push_back(c);
    }
    rep.pass = all;
    rep.doc["status"] = all ? "pass" : "fail";
    write_text(out_dir / "verify_report.json", rep.doc.dump(2) + "\n");
    return rep;
}

}  // namespace oldrlab::runner
