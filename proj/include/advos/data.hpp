#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "advos/rng.hpp"
#include "advos/tensor.hpp"

namespace advos::data {

// Parsed delimited file. Missing cells are NaN; the label column is kept
// separately as raw strings.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::string> labels;
    int rows = 0;
    int cols = 0;
    std::vector<double> cells;  // row-major, NaN marks missing

    double cell(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
    double& cell(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
    bool missing(int r, int c) const { return std::isnan(cell(r, c)); }
    std::size_t missing_count() const;
};

RawTable load_csv(const std::string& path, const std::string& label_column,
                  const std::string& missing_token = "");

// Fills each missing cell with the mean of that attribute over the k nearest
// rows (by Euclidean distance across mutually observed attributes, rescaled
// by the shared-attribute count) among rows where the attribute is observed.
RawTable knn_impute(const RawTable& t, int k);

// Fills each missing cell with the per-attribute median of observed values.
RawTable median_impute(const RawTable& t);

// Labeled feature matrix with class ids re-indexed so sizes ascend:
// class 0 is always the smallest.
struct Dataset {
    Tensor X;
    std::vector<int> y;
    int C = 0;
    std::vector<std::string> class_names;  // canonical id -> raw label

    int n() const { return X.rows(); }
    int dim() const { return X.cols(); }
    std::vector<int> counts() const;
    // Row indices per class ("tau" lists).
    std::vector<std::vector<int>> class_rows() const;
};

Dataset make_dataset(const RawTable& t);

struct SplitSpec {
    double fraction = 0.7;
    std::uint64_t seed = 0;
    // When nonempty, overrides the fraction with explicit per-class train
    // counts given in canonical (ascending size) class order.
    std::vector<int> train_counts;
};

// Stratified partition. Per-class train counts come from largest-remainder
// apportionment of floor(fraction * N) across classes, clamped so both sides
// keep at least one sample of every class of size >= 2.
std::pair<Dataset, Dataset> stratified_split(const Dataset& d, const SplitSpec& spec);

struct MinMax {
    std::vector<double> lo;
    std::vector<double> hi;
};

// Min-max fit on train only; both sides mapped to [0,1], test clipped.
// Constant train features map to 0.5 everywhere.
MinMax normalize_fit_transform(Dataset& train, Dataset& test);

struct ClassStats {
    std::vector<int> sizes;
    double ir = 0.0;  // largest / smallest, rounded to 2 decimals
};

ClassStats class_stats(const Dataset& d);

// Per-dataset manifest: file locations plus imputation and split policy.
struct Manifest {
    std::string name;
    std::string file;        // single-file datasets
    std::string train_file;  // split = files
    std::string test_file;
    std::string label_column = "label";
    std::string missing_token;
    std::string impute = "none";  // none | median | knn
    int impute_k = 2;
    std::string split = "fraction";  // fraction | counts | files
    double train_fraction = 0.7;
    std::vector<int> train_counts;  // canonical order, split = counts
    int subsample = 0;              // optional stratified row cap before split
};

Manifest load_manifest(const std::string& path);

struct LoadedPair {
    Dataset train;
    Dataset test;
};

// Full ingestion pipeline: load, impute, (subsample,) split, normalize.
// Relative paths in the manifest resolve against the manifest's directory.
LoadedPair load_pipeline(const Manifest& m, std::uint64_t seed);
LoadedPair load_pipeline(const std::string& manifest_path, std::uint64_t seed);

// Stratified subsample of whole-dataset rows, preserving class proportions
// by largest-remainder apportionment. cap >= C.
Dataset subsample(const Dataset& d, int cap, Rng& rng);

// Largest-remainder apportionment of `total` across weights; ties broken by
// lower index. Exposed for tests.
std::vector<int> apportion(const std::vector<int>& weights, int total);

}  // namespace advos::data
