#pragma once

#include <string>
#include <vector>

#include "advos/adversarial.hpp"
#include "advos/metrics.hpp"

namespace advos::harness {

// Experiment matrix: datasets x methods x seeds, plus training overrides.
// Loaded from a flat key=value file; paths resolve against the file's
// directory. Output root precedence: --out flag, ADVOS_OUT, config `out`.
struct ExperimentConfig {
    std::vector<std::string> manifests;
    std::vector<std::string> methods = {"baseline"};
    std::vector<int> seeds = {1, 2, 3};
    std::string out_dir;
    int resample_k = 5;
    int jobs = 1;
    adv::TrainConfig train;
    std::string fingerprint;  // hash of the raw key/value pairs

    void validate() const;
};

ExperimentConfig load_experiment(const std::string& path);

// Canonical method names: baseline ro smote b-smote adasyn ao do.
// Aliases (q, ro+q, smote+q, ...) are accepted on input.
std::string canonical_method(const std::string& name);

struct CellResult {
    std::string dataset;
    std::string method;
    int seed = 0;
    double f = 1.0;
    bool ok = false;
    std::string error;  // NA reason when !ok
    int epochs = 0;
    double acsa_final = 0.0, gm_final = 0.0;
    double acsa_best = 0.0, gm_best = 0.0;
    int best_epoch = -1, best_gm_epoch = -1;
    double wall_seconds = 0.0;  // reported separately, excluded from determinism
    metrics::EvalReport final_report, best_report;
};

struct MedianRow {
    std::string dataset;
    std::string method;
    double f = 1.0;
    int seeds_ok = 0;
    bool na = false;
    double acsa_best = 0.0, gm_best = 0.0;
    double acsa_final = 0.0, gm_final = 0.0;
};

struct ResultTable {
    std::string version;
    std::string fingerprint;
    std::vector<CellResult> cells;

    std::vector<MedianRow> medians() const;
    const CellResult* find(const std::string& dataset, const std::string& method, int seed,
                           double f) const;
};

// Runs one cell of the matrix. Never throws for per-cell failures; those
// come back as ok=false with the error message.
CellResult run_cell(const std::string& manifest_path, const std::string& method, int seed,
                    const ExperimentConfig& cfg, double f_override = -1.0);

// Full matrix. Cells that fail are recorded as NA; siblings still run.
ResultTable run(const ExperimentConfig& cfg);

// One full run per f value, methods restricted to ao/do.
ResultTable sweep_fs(const ExperimentConfig& cfg, const std::vector<double>& grid);

// Writes results.json (byte-deterministic), timing.json (wall times),
// table.tsv (datasets x methods medians, 2 decimals, NA literals) and, when
// several f values are present, sweep.tsv with (dataset, f, median ACSA).
void emit_table(const ResultTable& t, const std::string& dir);

// Inverse of the results.json writer.
ResultTable parse_results(const std::string& json_path);

// Renders the median table as delimited text.
std::string format_table(const ResultTable& t);

double median(std::vector<double> v);
std::string version_string();

// Output root after precedence rules. flag may be empty.
std::string resolve_out_dir(const std::string& flag, const ExperimentConfig& cfg);

}  // namespace advos::harness
