// Experiment runner CLI: `run` executes a dataset x method x seed matrix from
// a config file, `sweep` repeats it over an oversampling-rate grid, `table`
// re-renders previously written results. Exit codes: 0 all cells ok, 2 some
// cells NA/failed, 1 bad configuration or arguments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advos/error.hpp"
#include "advos/harness.hpp"
#include "advos/log.hpp"

namespace {

namespace fs = std::filesystem;
using advos::harness::ExperimentConfig;
using advos::harness::ResultTable;

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> grid;
    if (spec.find(':') != std::string::npos) {
        double a = 0, b = 0, step = 0;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0) {
            throw advos::ConfigError("bad grid '" + spec + "', expected start:end:step");
        }
        for (int i = 0;; ++i) {
            const double v = a + i * step;
            if (v > b + 1e-9) break;
            grid.push_back(v);
        }
    } else {
        std::string cur;
        std::stringstream ss(spec);
        while (std::getline(ss, cur, ',')) {
            if (!cur.empty()) grid.push_back(std::stod(cur));
        }
    }
    if (grid.empty()) throw advos::ConfigError("bad grid '" + spec + "'");
    for (double f : grid) {
        if (f < 0.0 || f > 1.0) throw advos::ConfigError("grid value out of [0,1]");
    }
    return grid;
}

void apply_filters(ExperimentConfig& cfg, const std::vector<std::string>& datasets,
                   const std::vector<std::string>& methods, const std::vector<int>& seeds) {
    if (!datasets.empty()) {
        std::vector<std::string> keep;
        for (const auto& m : cfg.manifests) {
            const std::string stem = fs::path(m).stem().string();
            for (const auto& want : datasets) {
                if (m == want || stem == want) {
                    keep.push_back(m);
                    break;
                }
            }
        }
        if (keep.empty()) throw advos::ConfigError("--dataset filter matched nothing");
        cfg.manifests = keep;
    }
    if (!methods.empty()) {
        cfg.methods.clear();
        for (const auto& m : methods) cfg.methods.push_back(advos::harness::canonical_method(m));
    }
    if (!seeds.empty()) cfg.seeds = seeds;
}

int finish(const ResultTable& table, const std::string& out_dir) {
    advos::harness::emit_table(table, out_dir);
    std::cout << advos::harness::format_table(table);
    int na = 0;
    for (const auto& c : table.cells) na += c.ok ? 0 : 1;
    if (na > 0) {
        std::cout << na << " cell(s) NA (see results.json for messages)\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial oversampling benchmark runner"};
    app.require_subcommand(1);

    std::string config_path, out_flag, grid_spec = "0.25:1.0:0.25";
    std::vector<std::string> flt_datasets, flt_methods;
    std::vector<int> flt_seeds;

    CLI::App* run = app.add_subcommand("run", "run the configured experiment matrix");
    run->add_option("--config", config_path, "experiment config file")->required();
    run->add_option("--dataset", flt_datasets, "restrict to these datasets");
    run->add_option("--method", flt_methods, "restrict to these methods");
    run->add_option("--seed", flt_seeds, "restrict to these seeds");
    run->add_option("--out", out_flag, "output directory");

    CLI::App* sweep = app.add_subcommand("sweep", "run over an oversampling-rate grid");
    sweep->add_option("--config", config_path, "experiment config file")->required();
    sweep->add_option("--grid", grid_spec, "f grid, start:end:step or comma list");
    sweep->add_option("--dataset", flt_datasets, "restrict to these datasets");
    sweep->add_option("--method", flt_methods, "restrict to these methods");
    sweep->add_option("--seed", flt_seeds, "restrict to these seeds");
    sweep->add_option("--out", out_flag, "output directory");

    std::string in_path, format = "csv";
    CLI::App* table = app.add_subcommand("table", "re-render stored results");
    table->add_option("--in", in_path, "results directory or results.json")->required();
    table->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (table->parsed()) {
            std::string path = in_path;
            if (fs::is_directory(path)) path += "/results.json";
            const ResultTable t = advos::harness::parse_results(path);
            if (format == "json") {
                std::ifstream in(path, std::ios::binary);
                std::cout << in.rdbuf();
            } else {
                std::string text = advos::harness::format_table(t);
                for (char& c : text) {
                    if (c == '\t') c = ',';
                }
                std::cout << text;
            }
            for (const auto& c : t.cells) {
                if (!c.ok) return 2;
            }
            return 0;
        }

        ExperimentConfig cfg = advos::harness::load_experiment(config_path);
        apply_filters(cfg, flt_datasets, flt_methods, flt_seeds);
        const std::string out_dir = advos::harness::resolve_out_dir(out_flag, cfg);
        if (run->parsed()) {
            return finish(advos::harness::run(cfg), out_dir);
        }
        return finish(advos::harness::sweep_fs(cfg, parse_grid(grid_spec)), out_dir);
    } catch (const advos::Error& e) {
        advos::log::error(e.what());
        return 1;
    } catch (const std::exception& e) {
        advos::log::error(e.what());
        return 1;
    }
}
