#include "oldrlab/runner/runner.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace oldrlab;
using namespace oldrlab::runner;

namespace {

/// Fresh empty directory under the system temp dir, removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("oldrlab_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

json without_clock(json summary) {
    summary.erase("wall_clock_s");
    return summary;
}

std::vector<std::string> schema_keys(const json& raw, const std::string& hint = "") {
    try {
        normalize(raw, hint);
    } catch (const SchemaError& e) {
        return e.keys();
    }
    return {};
}

}  // namespace

TEST(Config, UnknownKeysAreListed) {
    const json raw = {{"version", 2},
                      {"scenario", "equilibrium2d"},
                      {"grid", {{"n", 16}, {"m", 3}}},
                      {"colour", "red"},
                      {"params", {{"beta", 1.0}}}};
    const auto keys = schema_keys(raw);
    ASSERT_EQ(keys.size(), 3u);
    EXPECT_NE(std::find(keys.begin(), keys.end(), "grid.m"), keys.end());
    EXPECT_NE(std::find(keys.begin(), keys.end(), "colour"), keys.end());
    EXPECT_NE(std::find(keys.begin(), keys.end(), "params.beta"), keys.end());
}

TEST(Config, RejectsWrongTypesAndRanges) {
    EXPECT_EQ(schema_keys({{"version", 2}, {"grid", {{"n", "big"}}}}, "equilibrium2d"), std::vector<std::string>{"grid.n"});
    EXPECT_EQ(schema_keys({{"version", 2}, {"grid", {{"n", 16.5}}}}, "equilibrium2d"), std::vector<std::string>{"grid.n"});
    EXPECT_EQ(schema_keys({{"version", 2}, {"seed", -1}}, "equilibrium2d"), std::vector<std::string>{"seed"});
    EXPECT_EQ(schema_keys({{"version", 2}, {"time", {{"dt", -1.0}}}}, "equilibrium2d"),
              std::vector<std::string>{"time.dt (> 0)"});
    EXPECT_EQ(schema_keys({{"scenario", "equilibrium2d"}}), std::vector<std::string>{"version"});
    EXPECT_EQ(schema_keys({{"version", 3}}, "equilibrium2d"), std::vector<std::string>{"version"});
    EXPECT_EQ(schema_keys({{"version", 2}}, "no-such-scenario"), std::vector<std::string>{"no-such-scenario"});
    EXPECT_EQ(schema_keys({{"version", 2}, {"scenario", "cone-invariance"}}, "equilibrium2d"),
              std::vector<std::string>{"scenario"});
}

TEST(Config, VersionOneLoadsWithDefaults) {
    const auto v1 = normalize({{"version", 1}, {"scenario", "smalldata-decay"}, {"grid", {{"n", 32}}}});
    EXPECT_EQ(v1.doc["version"], kSchemaVersion);
    EXPECT_EQ(v1.n(), 32);
    EXPECT_EQ(v1.tol("rate_high"), 1.3);
    EXPECT_FALSE(v1.monitors()["holder"].get<bool>());
    // Sections introduced later are not part of version 1.
    const auto keys = schema_keys({{"version", 1}, {"scenario", "smalldata-decay"}, {"monitors", {{"holder", true}}}});
    ASSERT_EQ(keys.size(), 1u);
    EXPECT_EQ(keys[0].rfind("monitors", 0), 0u);
    // Same content under both versions is the same experiment.
    const auto v2 = normalize({{"version", 2}, {"scenario", "smalldata-decay"}, {"grid", {{"n", 32}}}});
    EXPECT_EQ(v1.hash(), v2.hash());
}

TEST(Config, HashIgnoresSpellingOfEqualValues) {
    const auto a = normalize(json::parse(R"({"version": 2, "scenario": "equilibrium2d", "time": {"dt": 0.01, "t_end": 1}})"));
    const auto b = normalize(json::parse(R"({"time": {"t_end": 1.0}, "version": 2, "scenario": "equilibrium2d", "grid": {"n": 32.0}})"));
    const auto c = normalize(json::parse(R"({"version": 2, "scenario": "equilibrium2d", "time": {"t_end": 2}})"));
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.canonical(), b.canonical());
    EXPECT_NE(a.hash(), c.hash());
    EXPECT_EQ(a.hash().size(), 16u);
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, Overrides) {
    json raw = {{"version", 2}};
    apply_override(raw, "grid.n=64");
    apply_override(raw, "model.epsilon=0.25");
    apply_override(raw, "initial.family=random");
    apply_override(raw, "monitors.holder=true");
    const auto cfg = normalize(raw, "equilibrium2d");
    EXPECT_EQ(cfg.n(), 64);
    EXPECT_EQ(cfg.epsilon(), 0.25);
    EXPECT_EQ(cfg.initial()["family"], "random");
    EXPECT_TRUE(cfg.monitors()["holder"].get<bool>());
    EXPECT_THROW(apply_override(raw, "novalue"), SchemaError);
    EXPECT_THROW(apply_override(raw, "grid..n=3"), SchemaError);
    EXPECT_THROW(apply_override(raw, "grid.n.deeper=3"), SchemaError);
}

TEST(Snapshot, RoundTripIsBitExact) {
    CounterRng rng(3);
    const Grid g(2, 16);
    const auto a = random_field(g, rng, 5);
    const auto b = random_field(g, rng, 5, 2.0);
    const auto snap = snapshot_of({{"a", &a}, {"rho", &b}});
    std::stringstream ss;
    write_snapshot(ss, snap);
    const std::string bytes = ss.str();
    // Header: magic, version, dim, n, count, then "a" and "rho" with lengths.
    ASSERT_EQ(bytes.size(), 4 + 4 * 4 + (4 + 1) + (4 + 3) + 2 * 256 * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "OLDR");
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 16u);
    const auto back = read_snapshot(ss);
    EXPECT_EQ(back.names, snap.names);
    EXPECT_EQ(back.values, snap.values);
    EXPECT_EQ(back.spectral("rho").values()[7], b[7]);

    std::stringstream bad("XXXX");
    EXPECT_THROW(read_snapshot(bad), ConfigError);
    std::stringstream cut(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_snapshot(cut), ConfigError);
}

TEST(Runner, EquilibriumIsFlatAndPasses) {
    TempDir dir("eq");
    const auto cfg = normalize({{"version", 2}, {"time", {{"t_end", 0.2}}}}, "equilibrium2d");
    const auto s = run_scenario(cfg, dir.path);
    EXPECT_EQ(s.exit_code, 0);
    EXPECT_TRUE(s.doc["all_invariants_pass"].get<bool>());
    for (const auto& r : s.outcome.series) EXPECT_EQ(r.linf_tau, 0.0);
    for (const char* f : {"config.json", "summary.json", "series.csv"}) EXPECT_TRUE(fs::exists(dir.path / f)) << f;
    const auto csv = parse_csv(read_text(dir.path / "series.csv"));
    EXPECT_EQ(csv.header.front(), "t");
    EXPECT_EQ(csv.rows.size(), s.outcome.series.size());
}

TEST(Runner, DeterministicSummaryAndSeries) {
    TempDir d1("det1"), d2("det2");
    const auto cfg = normalize({{"version", 2}, {"grid", {{"n", 32}}}, {"time", {{"t_end", 0.5}}}}, "smalldata-decay");
    const auto s1 = run_scenario(cfg, d1.path);
    const auto s2 = run_scenario(cfg, d2.path);
    EXPECT_EQ(without_clock(s1.doc).dump(), without_clock(s2.doc).dump());
    EXPECT_EQ(read_text(d1.path / "series.csv"), read_text(d2.path / "series.csv"));
    EXPECT_TRUE(s1.doc["fitted"].contains("rate"));
    EXPECT_TRUE(s1.doc["fitted"].contains("kappa0"));
    // A different seed gives different data.
    auto other = cfg;
    other.doc["seed"] = 7u;
    EXPECT_NE(execute(other).series.back().linf_tau, s1.outcome.series.back().linf_tau);
}

TEST(Runner, ExitCodes) {
    TempDir dir("exit");
    const auto blow = normalize({{"version", 2}, {"grid", {{"n", 128}}}, {"time", {{"t_end", 3.0}}}}, "blowup1d-riccati");
    const auto s = run_scenario(blow, dir.path / "blow");
    EXPECT_EQ(s.outcome.status, "blowup_flag");
    EXPECT_EQ(s.exit_code, 2);
    EXPECT_TRUE(s.doc["fitted"]["T_est"].is_number());
    EXPECT_NEAR(s.doc["fitted"]["T_star"].get<double>(), 4.0, 1e-12);

    const auto bad = normalize({{"version", 2}, {"initial", {{"family", "snapshot"}, {"path", (dir.path / "none.oldr").string()}}}},
                               "equilibrium2d");
    const auto e = run_scenario(bad, dir.path / "err");
    EXPECT_EQ(e.outcome.status, "error");
    EXPECT_EQ(e.exit_code, 1);
    EXPECT_NE(e.doc["reason"].get<std::string>().find("cannot open"), std::string::npos);
}

TEST(Runner, SnapshotRestartsARun) {
    TempDir dir("snap");
    const auto first = normalize({{"version", 2},
                                  {"grid", {{"n", 16}}},
                                  {"time", {{"t_end", 0.1}, {"record_every", 1}}},
                                  {"monitors", {{"snapshot_final", true}}}},
                                 "smalldata-decay");
    const auto s = run_scenario(first, dir.path / "a");
    ASSERT_EQ(s.outcome.status, "completed") << s.outcome.reason;
    ASSERT_TRUE(fs::exists(dir.path / "a" / "final.oldr"));
    const auto snap = load_snapshot((dir.path / "a" / "final.oldr").string());
    EXPECT_EQ(snap.names, (std::vector<std::string>{"a", "b", "c", "rho"}));
    const auto second = normalize({{"version", 2},
                                   {"grid", {{"n", 16}}},
                                   {"time", {{"t_end", 0.1}, {"record_every", 1}}},
                                   {"initial", {{"family", "snapshot"}, {"path", (dir.path / "a" / "final.oldr").string()}}}},
                                  "smalldata-decay");
    const auto r = execute(second);
    ASSERT_EQ(r.status, "completed") << r.reason;
    EXPECT_NEAR(r.series.front().linf_tau, s.outcome.series.back().linf_tau, 1e-12 * s.outcome.series.back().linf_tau);
    EXPECT_NEAR(r.series.front().l1_rho, s.outcome.series.back().l1_rho, 1e-12 * s.outcome.series.back().l1_rho);
}

TEST(Sweep, ConstantGradientThresholdMap) {
    TempDir dir("cg");
    const json tmpl = {{"version", 2}, {"scenario", "constant-gradient"}};
    const auto cells = sweep(tmpl, {{"parameters", {{"params.delta_ratio", {0.25, 1.0, 4.0}}}}}, dir.path, "", 2);
    ASSERT_EQ(cells.size(), 3u);
    const char* expect[] = {"bounded", "bounded", "growing"};
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(cells[i].status, "completed");
        EXPECT_EQ(cells[i].summary["fitted"]["classification"], expect[i]);
        EXPECT_TRUE(fs::exists(dir.path / cells[i].directory / "summary.json"));
    }
    const auto csv = read_text(dir.path / "sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_EQ(csv.rfind("cell,params.delta_ratio,status,exit_code,config_hash", 0), 0u);
}

TEST(Sweep, OnePointSweepMatchesRun) {
    TempDir dir("one");
    const json tmpl = {{"version", 2}, {"scenario", "calderon-monitor"}, {"params", {{"family_size", 3}}}};
    const auto cells = sweep(tmpl, {{"parameters", {{"seed", {5}}}}}, dir.path / "sweep", "", 1);
    ASSERT_EQ(cells.size(), 1u);
    json raw = tmpl;
    raw["seed"] = 5;
    const auto s = run_scenario(normalize(raw), dir.path / "run");
    EXPECT_EQ(without_clock(cells[0].summary).dump(), without_clock(s.doc).dump());
    EXPECT_EQ(read_text(dir.path / "sweep" / "cell_0000" / "series.csv"), read_text(dir.path / "run" / "series.csv"));
}

TEST(Sweep, FailuresAreRecordedPerCell) {
    TempDir dir("fail");
    const json tmpl = {{"version", 2}, {"scenario", "equilibrium2d"}, {"time", {{"t_end", 0.05}}}};
    const auto cells = sweep(tmpl, {{"parameters", {{"grid.n", {8, 7, 16}}}}}, dir.path, "", 3);
    ASSERT_EQ(cells.size(), 3u);
    EXPECT_EQ(cells[0].status, "completed");
    EXPECT_EQ(cells[1].status, "error");
    EXPECT_NE(cells[1].summary["reason"].get<std::string>().find("grid.n"), std::string::npos);
    EXPECT_EQ(cells[2].status, "completed");
    EXPECT_THROW(sweep(tmpl, {{"parameters", {{"grid.n", json::array()}}}}, dir.path), SchemaError);
    EXPECT_THROW(sweep(tmpl, {{"params", json::object()}}, dir.path), SchemaError);
}

TEST(Sweep, ConeEnvelopesAcrossBounds) {
    TempDir dir("cone");
    const json tmpl = {{"version", 2}, {"scenario", "cone-invariance"}, {"time", {{"t_end", 3.0}}}, {"params", {{"trials", 4}, {"K", 3}}}};
    const auto cells = sweep(tmpl, {{"parameters", {{"params.gamma", {0.5, 1.0, 2.0}}, {"params.dim", {1, 2}}}}}, dir.path, "", 2);
    ASSERT_EQ(cells.size(), 6u);
    for (const auto& c : cells) {
        EXPECT_EQ(c.status, "completed");
        EXPECT_TRUE(c.summary["all_invariants_pass"].get<bool>()) << c.summary.dump();
    }
}

TEST(Verify, FreshPerturbedAndCorrupted) {
    TempDir dir("verify");
    const fs::path golden = dir.path / "golden";
    const auto cfg = normalize({{"version", 2}, {"time", {{"t_end", 0.2}, {"record_every", 2}}}}, "lagrangian-crosscheck");
    run_scenario(normalize({{"version", 2}, {"time", {{"t_end", 0.1}}}}, "equilibrium2d"), golden / "eq");
    run_scenario(cfg, golden / "lag");
    auto fresh = verify(golden, dir.path / "out1");
    EXPECT_TRUE(fresh.pass) << fresh.doc.dump(2);
    EXPECT_TRUE(fs::exists(dir.path / "out1" / "verify_report.json"));

    // A slightly different dt (same step count) drifts within tolerance.
    json perturbed = read_json(golden / "lag" / "config.json");
    perturbed["time"]["dt"] = perturbed["time"]["dt"].get<double>() * (1.0 + 1e-7);
    write_text(golden / "lag" / "config.json", perturbed.dump(2));
    EXPECT_TRUE(verify(golden, dir.path / "out2").pass);

    // Corrupt one value of one column.
    auto text = read_text(golden / "lag" / "series.csv");
    auto table = parse_csv(text);
    const auto col = std::find(table.header.begin(), table.header.end(), "Linf_tau") - table.header.begin();
    std::istringstream is(text);
    std::string line, out;
    int data_row = -1;
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] != '#' && data_row++ == 2) {
            std::vector<std::string> cells;
            std::string c;
            std::istringstream ls(line);
            while (std::getline(ls, c, ',')) cells.push_back(c);
            cells[col] = "12345.0";
            line.clear();
            for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
        }
        out += line + "\n";
    }
    write_text(golden / "lag" / "series.csv", out);
    const auto bad = verify(golden, dir.path / "out3");
    EXPECT_FALSE(bad.pass);
    const auto& cases = bad.doc["cases"];
    ASSERT_EQ(cases.size(), 2u);
    EXPECT_EQ(cases[0]["status"], "pass");
    EXPECT_EQ(cases[1]["status"], "fail");
    ASSERT_EQ(cases[1]["series"]["columns"].size(), 1u);
    EXPECT_EQ(cases[1]["series"]["columns"][0]["column"], "Linf_tau");
    EXPECT_EQ(cases[1]["series"]["columns"][0]["row"], 2);
}

TEST(Verify, InvariantTableMismatchFails) {
    TempDir dir("inv");
    const fs::path golden = dir.path / "golden";
    run_scenario(normalize({{"version", 2}, {"time", {{"t_end", 0.1}}}}, "equilibrium2d"), golden / "eq");
    json summary = read_json(golden / "eq" / "summary.json");
    summary["invariants"]["stationarity"]["pass"] = false;
    write_text(golden / "eq" / "summary.json", summary.dump(2));
    const auto rep = verify(golden, dir.path / "out");
    EXPECT_FALSE(rep.pass);
    EXPECT_FALSE(rep.doc["cases"][0]["invariants_match"].get<bool>());
}

TEST(Verify, MissingGoldensHaveExplicitStatus) {
    TempDir dir("missing");
    EXPECT_EQ(verify(dir.path / "nowhere", dir.path / "out").doc["status"], "missing_golden_dir");
    fs::create_directories(dir.path / "empty");
    EXPECT_EQ(verify(dir.path / "empty", dir.path / "out").doc["status"], "no_goldens");
    fs::create_directories(dir.path / "partial" / "case");
    write_text(dir.path / "partial" / "case" / "config.json", "{}");
    const auto rep = verify(dir.path / "partial", dir.path / "out");
    EXPECT_FALSE(rep.pass);
    EXPECT_EQ(rep.doc["cases"][0]["status"], "missing_files");
    EXPECT_EQ(rep.doc["cases"][0]["missing"].size(), 2u);
}

TEST(Verify, SeriesTolerances) {
    CsvTable g{{"t", "x"}, {{0.0, 1.0}, {1.0, 2.0}}};
    CsvTable f = g;
    f.rows[1][1] = 2.0 + 1e-5;
    EXPECT_TRUE(compare_series(g, f, {})["pass"].get<bool>());
    f.rows[1][1] = 2.01;
    EXPECT_FALSE(compare_series(g, f, {})["pass"].get<bool>());
    const auto loose = SeriesTolerances::from_json({{"columns", {{"x", {{"rel", 0.01}}}}}});
    EXPECT_TRUE(compare_series(g, f, loose)["pass"].get<bool>());
    EXPECT_THROW(SeriesTolerances::from_json({{"columns", {{"x", {{"relative", 0.01}}}}}}), SchemaError);
    f.header[1] = "y";
    EXPECT_EQ(compare_series(g, f, {})["problem"], "header differs");
}
