#include "advos/benchgen.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "advos/error.hpp"
#include "advos/log.hpp"
#include "advos/rng.hpp"

// Synthetic benchmark suite. Each generator reproduces the shape of a
// well-known public imbalanced dataset (dimensions, class counts, missing
// values, split policy) with a controlled class geometry, so the full
// pipeline can be exercised deterministically and offline. Class counts are
// exact, not sampled.

namespace advos::bench {

namespace {

namespace fs = std::filesystem;

struct Row {
    std::vector<double> x;
    std::string label;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
}

void write_csv(const std::string& path, int dim, const std::vector<Row>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("benchgen: cannot write " + path);
    for (int j = 0; j < dim; ++j) out << 'f' << j << ',';
    out << "label\n";
    std::string line;
    for (const Row& r : rows) {
        line.clear();
        for (int j = 0; j < dim; ++j) {
            if (!std::isnan(r.x[j])) line += fmt(r.x[j]);
            line += ',';
        }
        line += r.label;
        line += '\n';
        out << line;
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("benchgen: cannot write " + path);
    out << text;
}

std::vector<double> noise(int dim, Rng& r) {
    std::vector<double> x(dim);
    for (double& v : x) v = r.normal();
    return x;
}

// Places a cluster sample: base noise everywhere, then x[d] = shift + sigma * n
// on the listed dimensions.
std::vector<double> cluster(int dim, const std::vector<int>& dims, double shift,
                            double sigma, Rng& r) {
    std::vector<double> x = noise(dim, r);
    for (int d : dims) x[d] = shift + sigma * r.normal();
    return x;
}

std::vector<int> strided_dims(int count, int stride, int offset, int dim) {
    std::vector<int> out;
    out.reserve(count);
    for (int j = 0; j < count; ++j) out.push_back((j * stride + offset) % dim);
    return out;
}

std::vector<double> unit_dir(int k, Rng& r) {
    std::vector<double> u(k);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& v : u) {
            v = r.normal();
            norm += v * v;
        }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (double& v : u) v /= norm;
    return u;
}

// Row on a thin spherical shell in the informative subspace: the class's
// data mass lives on the shell while convex combinations of its rows fall
// into the (empty) interior.
std::vector<double> shell_row(int dim, const std::vector<int>& dims, double radius,
                              double thickness, Rng& r) {
    std::vector<double> x = noise(dim, r);
    const auto u = unit_dir(static_cast<int>(dims.size()), r);
    for (std::size_t j = 0; j < dims.size(); ++j) {
        x[dims[j]] = radius * u[j] + thickness * r.normal();
    }
    return x;
}

// Row in a tight cluster at radius * dir within the informative subspace.
std::vector<double> spike_row(int dim, const std::vector<int>& dims,
                              const std::vector<double>& dir, double radius, double sigma,
                              Rng& r) {
    std::vector<double> x = noise(dim, r);
    for (std::size_t j = 0; j < dims.size(); ++j) {
        x[dims[j]] = radius * dir[j] + sigma * r.normal();
    }
    return x;
}

void add_rows(std::vector<Row>& rows, int n, const std::string& label, int dim,
              const std::vector<int>& dims, double shift, double sigma, Rng& r) {
    for (int i = 0; i < n; ++i) rows.push_back({cluster(dim, dims, shift, sigma, r), label});
}

void shuffle_rows(std::vector<Row>& rows, Rng& r) { r.shuffle(rows); }

void punch_missing(std::vector<Row>& rows, double rate, Rng& r) {
    for (Row& row : rows) {
        for (double& v : row.x) {
            if (r.uniform() < rate) v = std::nan("");
        }
    }
}

// --- secom ---------------------------------------------------------------
// 590 attributes, 1567 rows, 1463:104, missing values in every attribute.
// The minority is scattered over many sparse outlying modes in a small
// informative subspace — a handful of rows per mode, too few for a plain
// classifier to cover them all; the mode count sets baseline difficulty.
std::string gen_secom(const std::string& dir) {
    const int kDim = 590;
    const int kMaj = 1463, kMin = 104;
    const int kInfo = 10;
    const int kSpikes = 16;
    const double kRadius = 7.5, kSpikeSigma = 0.25;
    const double kMissRate = 0.05;

    Rng root(7001);
    Rng geom = root.fork(1), miss = root.fork(2), order = root.fork(3);
    const auto info = strided_dims(kInfo, 59, 7, kDim);
    std::vector<std::vector<double>> spikes;
    for (int s = 0; s < kSpikes; ++s) spikes.push_back(unit_dir(kInfo, geom));

    std::vector<Row> rows;
    rows.reserve(kMaj + kMin);
    add_rows(rows, kMaj, "-1", kDim, info, 0.0, 1.0, geom);
    for (int i = 0; i < kMin; ++i) {
        rows.push_back({spike_row(kDim, info, spikes[i % kSpikes], kRadius, kSpikeSigma, geom), "1"});
    }
    punch_missing(rows, kMissRate, miss);
    shuffle_rows(rows, order);

    write_csv(dir + "/secom.csv", kDim, rows);
    const std::string mpath = dir + "/secom.manifest";
    write_text(mpath,
               "name = secom\n"
               "file = secom.csv\n"
               "label = label\n"
               "impute = knn\n"
               "impute_k = 2\n"
               "split = fraction\n"
               "train_fraction = 0.7\n");
    return mpath;
}

// --- prima ---------------------------------------------------------------
// 8 attributes, 768 rows, 500:268. Minority shell with a fat thickness, so
// the classes overlap broadly and a well-trained classifier plateaus in the
// mid-to-high 70s.
std::string gen_prima(const std::string& dir) {
    const int kDim = 8;
    const int kMaj = 500, kMin = 268;
    const std::vector<int> info = {0, 2, 3, 5, 6, 7};
    const double kShellRadius = 3.35, kShellThick = 0.55;

    Rng root(7002);
    Rng geom = root.fork(1), order = root.fork(3);

    std::vector<Row> rows;
    rows.reserve(kMaj + kMin);
    add_rows(rows, kMaj, "0", kDim, info, 0.0, 1.0, geom);
    for (int i = 0; i < kMin; ++i) {
        rows.push_back({shell_row(kDim, info, kShellRadius, kShellThick, geom), "1"});
    }
    shuffle_rows(rows, order);

    write_csv(dir + "/prima.csv", kDim, rows);
    const std::string mpath = dir + "/prima.manifest";
    write_text(mpath,
               "name = prima\n"
               "file = prima.csv\n"
               "label = label\n"
               "split = counts\n"
               "train_counts = 213, 401\n");
    return mpath;
}

// --- haberman ------------------------------------------------------------
// 3 attributes, 306 rows, 225:81.
std::string gen_haberman(const std::string& dir) {
    const int kDim = 3;
    const int kMaj = 225, kMin = 81;
    const std::vector<int> info = {0, 1};
    const double kShift = 0.85, kSigma = 1.1;

    Rng root(7003);
    Rng geom = root.fork(1), order = root.fork(3);

    std::vector<Row> rows;
    rows.reserve(kMaj + kMin);
    add_rows(rows, kMaj, "1", kDim, info, 0.0, 1.0, geom);
    add_rows(rows, kMin, "2", kDim, info, kShift, kSigma, geom);
    shuffle_rows(rows, order);

    write_csv(dir + "/haberman.csv", kDim, rows);
    const std::string mpath = dir + "/haberman.manifest";
    write_text(mpath,
               "name = haberman\n"
               "file = haberman.csv\n"
               "label = label\n"
               "split = fraction\n"
               "train_fraction = 0.7\n");
    return mpath;
}

// --- wafer ---------------------------------------------------------------
// 152 attributes, pre-split files: train 97:903, test 665:5499. The
// minority sits on a dozen well-separated spikes far outside the majority
// bulk, the same spikes in both files: a regime where the baseline is
// already strong and oversampling must do no harm.
std::string gen_wafer(const std::string& dir) {
    const int kDim = 152;
    const int kInfo = 12;
    const int kSpikes = 3;
    const double kRadius = 10.5, kSpikeSigma = 0.20;

    Rng root(7004);
    Rng dirs = root.fork(5);
    Rng geom_tr = root.fork(1), geom_te = root.fork(2);
    Rng order_tr = root.fork(3), order_te = root.fork(4);
    const auto info = strided_dims(kInfo, 13, 4, kDim);
    std::vector<std::vector<double>> spikes;
    for (int s = 0; s < kSpikes; ++s) spikes.push_back(unit_dir(kInfo, dirs));

    std::vector<Row> train, test;
    add_rows(train, 903, "-1", kDim, info, 0.0, 1.0, geom_tr);
    for (int i = 0; i < 97; ++i) {
        train.push_back(
            {spike_row(kDim, info, spikes[i % kSpikes], kRadius, kSpikeSigma, geom_tr), "1"});
    }
    add_rows(test, 5499, "-1", kDim, info, 0.0, 1.0, geom_te);
    for (int i = 0; i < 665; ++i) {
        test.push_back(
            {spike_row(kDim, info, spikes[i % kSpikes], kRadius, kSpikeSigma, geom_te), "1"});
    }
    shuffle_rows(train, order_tr);
    shuffle_rows(test, order_te);

    write_csv(dir + "/wafer_train.csv", kDim, train);
    write_csv(dir + "/wafer_test.csv", kDim, test);
    const std::string mpath = dir + "/wafer.manifest";
    write_text(mpath,
               "name = wafer\n"
               "train_file = wafer_train.csv\n"
               "test_file = wafer_test.csv\n"
               "label = label\n"
               "split = files\n");
    return mpath;
}

// --- credit --------------------------------------------------------------
// 10 attributes, 150000 rows, 139974:10026, missing values in two columns
// (median-imputed). Minority shell overlapping the majority tail: heavy
// enough that a prior-driven classifier almost never calls the minority,
// while a balanced one lands comfortably in the 60s.
std::string gen_credit(const std::string& dir) {
    const int kDim = 10;
    const int kMaj = 139974, kMin = 10026;
    const std::vector<int> info = {0, 1, 3, 6, 8, 9};
    const double kShellRadius = 3.6, kShellThick = 0.55;
    const double kMissIncome = 0.198, kMissDeps = 0.026;

    Rng root(7005);
    Rng geom = root.fork(1), miss = root.fork(2), order = root.fork(3);

    std::vector<Row> rows;
    rows.reserve(kMaj + kMin);
    add_rows(rows, kMaj, "0", kDim, info, 0.0, 1.0, geom);
    for (int i = 0; i < kMin; ++i) {
        rows.push_back({shell_row(kDim, info, kShellRadius, kShellThick, geom), "1"});
    }
    for (Row& r : rows) {
        if (miss.uniform() < kMissIncome) r.x[4] = std::nan("");
        if (miss.uniform() < kMissDeps) r.x[2] = std::nan("");
    }
    shuffle_rows(rows, order);

    write_csv(dir + "/credit.csv", kDim, rows);
    const std::string mpath = dir + "/credit.manifest";
    write_text(mpath,
               "name = credit\n"
               "file = credit.csv\n"
               "label = label\n"
               "impute = median\n"
               "split = fraction\n"
               "train_fraction = 0.7\n"
               "subsample = 30000\n");
    const std::string full = dir + "/credit_full.manifest";
    write_text(full,
               "name = credit_full\n"
               "file = credit.csv\n"
               "label = label\n"
               "impute = median\n"
               "split = fraction\n"
               "train_fraction = 0.7\n");
    return mpath;
}

// --- yeast ---------------------------------------------------------------
// 8 attributes, 10 classes, 1484 rows, sizes 5..463 (IR 92.6). The three
// big classes are solid lobes; each small class is a pair of tight twin
// clusters in its own corner (so interpolants between its rows land in
// empty space). The 5-sample ERL class is a ring of satellites around the
// ME3 lobe centre: the satellites share a recognizable signature, but with
// 2-3 training rows a plain classifier never calls the held-out ones.
std::string gen_yeast(const std::string& dir) {
    const int kDim = 8;
    struct Lobe {
        const char* name;
        int n;
        std::vector<int> dims;
        double shift, sigma;
    };
    const std::vector<Lobe> lobes = {
        {"CYT", 463, {}, 0.0, 1.0},  // background cloud
        {"NUC", 429, {0, 1}, 1.40, 1.0},
        {"MIT", 244, {2, 3}, 1.40, 1.0},
        {"ME3", 163, {4, 5}, 1.50, 0.9},
    };
    struct Twins {
        const char* name;
        int n;
        std::vector<int> dims;
        double a, b;  // the two cluster centres, mirrored
    };
    const std::vector<Twins> twins = {
        {"ME2", 51, {6, 7}, 2.0, 0.8},
        {"ME1", 44, {5, 6}, 2.1, 0.9},
        {"EXC", 35, {0, 3}, 2.2, 1.0},
        {"VAC", 30, {1, 2}, 2.2, 1.0},
        {"POX", 20, {2, 7}, 2.3, 1.1},
    };
    const double kTwinSigma = 0.35;
    const double kErlRing = 1.9, kErlSigma = 0.12, kErlSquash = 0.3;

    Rng root(7006);
    Rng geom = root.fork(1), order = root.fork(3);

    std::vector<Row> rows;
    rows.reserve(1484);
    for (const Lobe& c : lobes) add_rows(rows, c.n, c.name, kDim, c.dims, c.shift, c.sigma, geom);
    for (const Twins& c : twins) {
        for (int i = 0; i < c.n; ++i) {
            std::vector<double> x = noise(kDim, geom);
            const bool first = i % 2 == 0;
            x[c.dims[0]] = (first ? c.a : c.b) + kTwinSigma * geom.normal();
            x[c.dims[1]] = (first ? c.b : c.a) + kTwinSigma * geom.normal();
            rows.push_back({std::move(x), c.name});
        }
    }
    for (int i = 0; i < 5; ++i) {
        const double th = 2.0 * M_PI * i / 5.0 + 0.4;
        std::vector<double> x = noise(kDim, geom);
        for (int d : {0, 1, 2, 3, 6, 7}) x[d] *= kErlSquash;
        x[4] = 1.50 + kErlRing * std::cos(th) + kErlSigma * geom.normal();
        x[5] = 1.50 + kErlRing * std::sin(th) + kErlSigma * geom.normal();
        rows.push_back({std::move(x), "ERL"});
    }
    shuffle_rows(rows, order);

    write_csv(dir + "/yeast.csv", kDim, rows);
    const std::string mpath = dir + "/yeast.manifest";
    write_text(mpath,
               "name = yeast\n"
               "file = yeast.csv\n"
               "label = label\n"
               "split = fraction\n"
               "train_fraction = 0.5\n");
    return mpath;
}

}  // namespace

std::vector<std::string> dataset_names() {
    return {"secom", "prima", "haberman", "wafer", "credit", "yeast"};
}

std::string write_dataset(const std::string& name, const std::string& dir) {
    fs::create_directories(dir);
    if (name == "secom") return gen_secom(dir);
    if (name == "prima") return gen_prima(dir);
    if (name == "haberman") return gen_haberman(dir);
    if (name == "wafer") return gen_wafer(dir);
    if (name == "credit") return gen_credit(dir);
    if (name == "yeast") return gen_yeast(dir);
    throw ConfigError("benchgen: unknown dataset " + name);
}

std::vector<std::string> write_all(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& n : dataset_names()) {
        log::info("benchgen: writing " + n);
        out.push_back(write_dataset(n, dir));
    }
    return out;
}

}  // namespace advos::bench
