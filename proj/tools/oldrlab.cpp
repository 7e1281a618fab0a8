// Command-line experiment driver.
//   oldrlab run <scenario> [--config file] --out dir [--seed N] [--override key=value]...
//   oldrlab sweep --config file --grid file --out dir
//   oldrlab verify --golden dir --out dir
//   oldrlab config <scenario> [--config file] [--override key=value]...
//   oldrlab scenarios
// Exit codes: 0 completed, 2 blow-up flag raised, 1 error or failed verification.

#include "oldrlab/fft.hpp"
#include "oldrlab/runner/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace oldrlab::runner;

namespace {

json load_raw(const std::string& path) {
    if (path.empty()) return {{"version", kSchemaVersion}};
    return read_json(path);
}

void print_invariants(const json& summary) {
    for (auto it = summary["invariants"].begin(); it != summary["invariants"].end(); ++it) {
        const auto& v = summary["metrics"].contains(it.key()) ? summary["metrics"][it.key()] : json();
        std::cout << "  " << ((*it)["pass"].get<bool>() ? "PASS " : "FAIL ") << it.key() << " = " << v.dump() << ' '
                  << (*it)["relation"].get<std::string>() << ' ' << (*it)["limit"].dump() << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    oldrlab::fft::tune_allocator();
    CLI::App app{"Oldroyd-B experiment driver"};
    app.require_subcommand(1);

    std::string scenario_name, config_path, out_dir, grid_path, golden_dir;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;

    auto* run_cmd = app.add_subcommand("run", "Run one scenario");
    run_cmd->add_option("scenario", scenario_name, "Scenario preset")->required();
    run_cmd->add_option("--config", config_path, "Config file (JSON); presets apply when omitted");
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Seed for randomized initial data");
    run_cmd->add_option("--override", overrides, "Dotted key=value, value parsed as JSON")->take_all();

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter grid over a config template");
    sweep_cmd->add_option("--config", config_path, "Config template (JSON)")->required();
    sweep_cmd->add_option("--grid", grid_path, "Grid file {\"parameters\": {key: [values]}}")->required();
    sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

    auto* verify_cmd = app.add_subcommand("verify", "Re-run goldens and compare");
    verify_cmd->add_option("--golden", golden_dir, "Golden directory")->required();
    verify_cmd->add_option("--out", out_dir, "Output directory")->required();

    auto* config_cmd = app.add_subcommand("config", "Print the normalized config of a scenario");
    config_cmd->add_option("scenario", scenario_name, "Scenario preset")->required();
    config_cmd->add_option("--config", config_path, "Config file (JSON)");
    config_cmd->add_option("--override", overrides, "Dotted key=value, value parsed as JSON")->take_all();

    app.add_subcommand("scenarios", "List scenario presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("scenarios")) {
            for (const auto& s : scenario_names()) std::cout << s << '\n';
            return 0;
        }
        if (config_cmd->parsed()) {
            json raw = load_raw(config_path);
            for (const auto& o : overrides) apply_override(raw, o);
            const auto cfg = normalize(raw, scenario_name);
            std::cout << cfg.doc.dump(2) << '\n';
            return 0;
        }
        if (run_cmd->parsed()) {
            json raw = load_raw(config_path);
            if (*seed_opt) raw["seed"] = seed;
            for (const auto& o : overrides) apply_override(raw, o);
            const auto cfg = normalize(raw, scenario_name);
            const auto s = run_scenario(cfg, out_dir);
            std::cout << cfg.scenario() << " [" << cfg.hash() << "] status " << s.outcome.status;
            if (!s.outcome.reason.empty()) std::cout << " (" << s.outcome.reason << ')';
            std::cout << '\n';
            print_invariants(s.doc);
            return s.exit_code;
        }
        if (sweep_cmd->parsed()) {
            const auto cells = sweep(load_raw(config_path), read_json(grid_path), out_dir);
            int errors = 0;
            for (const auto& c : cells) {
                std::cout << c.directory;
                for (const auto& [k, v] : c.assignment) std::cout << ' ' << k << '=' << v.dump();
                std::cout << " status " << c.status << '\n';
                errors += c.status == "error";
            }
            return errors ? 1 : 0;
        }
        if (verify_cmd->parsed()) {
            const auto rep = verify(golden_dir, out_dir);
            for (const auto& c : rep.doc["cases"]) {
                std::cout << c["case"].get<std::string>() << ": " << c["status"].get<std::string>() << '\n';
                if (c.contains("series"))
                    for (const auto& col : c["series"]["columns"])
                        std::cout << "  column " << col["column"].get<std::string>() << " row " << col["row"]
                                  << " golden " << col["golden"] << " fresh " << col["fresh"] << '\n';
                if (c.contains("series") && c["series"].contains("problem"))
                    std::cout << "  series: " << c["series"]["problem"].get<std::string>() << '\n';
                if (c.contains("missing")) std::cout << "  missing: " << c["missing"].dump() << '\n';
                if (c.contains("reason")) std::cout << "  " << c["reason"].get<std::string>() << '\n';
            }
            std::cout << "verify: " << rep.doc["status"].get<std::string>() << '\n';
            return rep.pass ? 0 : 1;
        }
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
