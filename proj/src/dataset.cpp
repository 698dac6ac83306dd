#include "advos/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "advos/config.hpp"
#include "advos/error.hpp"
#include "advos/log.hpp"

namespace advos::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream in(line);
    while (std::getline(in, tok, ',')) out.push_back(trim(tok));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool is_missing_token(const std::string& s, const std::string& extra) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" ||
           (!extra.empty() && s == extra);
}

}  // namespace

std::size_t RawTable::missing_count() const {
    std::size_t n = 0;
    for (double v : cells) n += std::isnan(v) ? 1 : 0;
    return n;
}

RawTable load_csv(const std::string& path, const std::string& label_column,
                  const std::string& missing_token) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IngestError(path + ": empty file");
    const auto header = split_line(line);
    int label_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) label_idx = static_cast<int>(i);
    }
    if (label_idx < 0) {
        throw IngestError(path + ": label column '" + label_column + "' not found");
    }

    RawTable t;
    t.cols = static_cast<int>(header.size()) - 1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (static_cast<int>(i) != label_idx) t.columns.push_back(header[i]);
    }

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (static_cast<int>(cells.size()) != t.cols + 1) {
            throw IngestError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.cols + 1) + " cells, got " +
                              std::to_string(cells.size()));
        }
        int fi = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (static_cast<int>(i) == label_idx) {
                if (cells[i].empty()) {
                    throw IngestError(path + ":" + std::to_string(lineno) +
                                      ": missing label value");
                }
                t.labels.push_back(cells[i]);
                continue;
            }
            if (is_missing_token(cells[i], missing_token)) {
                t.cells.push_back(kNaN);
            } else {
                try {
                    std::size_t used = 0;
                    t.cells.push_back(std::stod(cells[i], &used));
                    if (used != cells[i].size()) throw std::invalid_argument("trailing");
                } catch (const std::exception&) {
                    throw IngestError(path + ":" + std::to_string(lineno) + ": column '" +
                                      t.columns[fi] + "': cannot parse '" + cells[i] + "'");
                }
            }
            ++fi;
        }
        ++t.rows;
    }
    if (t.rows == 0) throw IngestError(path + ": no data rows");
    return t;
}

RawTable knn_impute(const RawTable& t, int k) {
    if (k < 1) throw ImputeError("knn_impute: k must be >= 1");
    if (t.missing_count() == 0) return t;

    const int n = t.rows, d = t.cols;
    for (int j = 0; j < d; ++j) {
        bool any = false;
        for (int i = 0; i < n && !any; ++i) any = !t.missing(i, j);
        if (!any) throw ImputeError("attribute '" + t.columns[j] + "' is missing in all rows");
    }
    for (int i = 0; i < n; ++i) {
        bool any = false;
        for (int j = 0; j < d && !any; ++j) any = !t.missing(i, j);
        if (!any) throw ImputeError("row " + std::to_string(i) + " has no observed attributes");
    }

    // Zero-filled values plus 0/1 masks keep the pair loop branch-free.
    std::vector<double> val(static_cast<std::size_t>(n) * d), mask(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
        const bool obs = !std::isnan(t.cells[i]);
        val[i] = obs ? t.cells[i] : 0.0;
        mask[i] = obs ? 1.0 : 0.0;
    }

    // Pairwise distances over mutually observed attributes, rescaled by the
    // shared count so sparse overlaps do not look artificially close.
    std::vector<double> dist(static_cast<std::size_t>(n) * n,
                             std::numeric_limits<double>::infinity());
    for (int a = 0; a < n; ++a) {
        const double* va = &val[static_cast<std::size_t>(a) * d];
        const double* ma = &mask[static_cast<std::size_t>(a) * d];
        for (int b = a + 1; b < n; ++b) {
            const double* vb = &val[static_cast<std::size_t>(b) * d];
            const double* mb = &mask[static_cast<std::size_t>(b) * d];
            double s = 0.0, cnt = 0.0;
            for (int j = 0; j < d; ++j) {
                const double m = ma[j] * mb[j];
                const double diff = va[j] - vb[j];
                s += m * diff * diff;
                cnt += m;
            }
            const double v = cnt > 0.0 ? std::sqrt(s / cnt)
                                       : std::numeric_limits<double>::infinity();
            dist[static_cast<std::size_t>(a) * n + b] = v;
            dist[static_cast<std::size_t>(b) * n + a] = v;
        }
    }

    RawTable out = t;
    std::vector<int> order(n);
    for (int r = 0; r < n; ++r) {
        bool has_missing = false;
        for (int j = 0; j < d && !has_missing; ++j) has_missing = t.missing(r, j);
        if (!has_missing) continue;

        std::iota(order.begin(), order.end(), 0);
        const double* dr = &dist[static_cast<std::size_t>(r) * n];
        std::sort(order.begin(), order.end(), [&](int x, int y) {
            if (dr[x] != dr[y]) return dr[x] < dr[y];
            return x < y;
        });

        for (int j = 0; j < d; ++j) {
            if (!t.missing(r, j)) continue;
            double sum = 0.0;
            int found = 0;
            for (int o : order) {
                if (o == r || t.missing(o, j) || std::isinf(dr[o])) continue;
                sum += t.cell(o, j);
                if (++found == k) break;
            }
            if (found == 0) {
                throw ImputeError("no usable neighbor for row " + std::to_string(r) +
                                  ", attribute '" + t.columns[j] + "'");
            }
            out.cell(r, j) = sum / found;
        }
    }
    return out;
}

RawTable median_impute(const RawTable& t) {
    if (t.missing_count() == 0) return t;
    RawTable out = t;
    std::vector<double> obs;
    for (int j = 0; j < t.cols; ++j) {
        obs.clear();
        for (int i = 0; i < t.rows; ++i) {
            if (!t.missing(i, j)) obs.push_back(t.cell(i, j));
        }
        if (obs.empty()) {
            throw ImputeError("attribute '" + t.columns[j] + "' is missing in all rows");
        }
        std::sort(obs.begin(), obs.end());
        const std::size_t m = obs.size();
        const double med = m % 2 == 1 ? obs[m / 2] : 0.5 * (obs[m / 2 - 1] + obs[m / 2]);
        for (int i = 0; i < t.rows; ++i) {
            if (t.missing(i, j)) out.cell(i, j) = med;
        }
    }
    return out;
}

std::vector<int> Dataset::counts() const {
    std::vector<int> c(C, 0);
    for (int label : y) ++c[label];
    return c;
}

std::vector<std::vector<int>> Dataset::class_rows() const {
    std::vector<std::vector<int>> tau(C);
    for (int i = 0; i < n(); ++i) tau[y[i]].push_back(i);
    return tau;
}

namespace {

Dataset dataset_with_classes(const RawTable& t, const std::vector<std::string>& class_order) {
    if (t.missing_count() != 0) {
        throw ContractError("dataset construction requires a complete table; impute first");
    }
    std::map<std::string, int> id;
    for (std::size_t i = 0; i < class_order.size(); ++i) {
        id[class_order[i]] = static_cast<int>(i);
    }
    Dataset d;
    d.C = static_cast<int>(class_order.size());
    d.class_names = class_order;
    d.X = Tensor(t.rows, t.cols);
    for (std::size_t i = 0; i < t.cells.size(); ++i) d.X[i] = t.cells[i];
    d.y.reserve(t.rows);
    for (const auto& lbl : t.labels) {
        auto it = id.find(lbl);
        if (it == id.end()) throw IngestError("unknown class label '" + lbl + "'");
        d.y.push_back(it->second);
    }
    return d;
}

std::vector<std::string> canonical_class_order(const std::vector<std::string>& labels) {
    std::map<std::string, int> count;
    for (const auto& l : labels) ++count[l];
    std::vector<std::pair<int, std::string>> order;
    order.reserve(count.size());
    for (const auto& [name, c] : count) order.emplace_back(c, name);
    std::sort(order.begin(), order.end());
    std::vector<std::string> names;
    names.reserve(order.size());
    for (const auto& [c, name] : order) names.push_back(name);
    return names;
}

Dataset select_rows(const Dataset& d, const std::vector<int>& rows) {
    Dataset out;
    out.C = d.C;
    out.class_names = d.class_names;
    out.X = Tensor(static_cast<int>(rows.size()), d.dim());
    out.y.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < d.dim(); ++c) {
            out.X.at(static_cast<int>(i), c) = d.X.at(rows[i], c);
        }
        out.y.push_back(d.y[rows[i]]);
    }
    return out;
}

}  // namespace

Dataset make_dataset(const RawTable& t) {
    if (t.labels.empty()) throw IngestError("make_dataset: table has no rows");
    return dataset_with_classes(t, canonical_class_order(t.labels));
}

std::vector<int> apportion(const std::vector<int>& weights, int total) {
    if (weights.empty()) throw ContractError("apportion: no weights");
    long long wsum = 0;
    for (int w : weights) {
        if (w < 0) throw ContractError("apportion: negative weight");
        wsum += w;
    }
    if (wsum == 0) throw ContractError("apportion: zero total weight");
    if (total < 0 || total > wsum) throw ContractError("apportion: total out of range");

    const int n = static_cast<int>(weights.size());
    std::vector<int> base(n);
    std::vector<long long> rem(n);
    long long assigned = 0;
    for (int i = 0; i < n; ++i) {
        const long long share = static_cast<long long>(total) * weights[i];
        base[i] = static_cast<int>(share / wsum);
        rem[i] = share % wsum;
        assigned += base[i];
    }
    int leftover = total - static_cast<int>(assigned);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (rem[a] != rem[b]) return rem[a] > rem[b];
        return a < b;
    });
    for (int i = 0; i < leftover; ++i) ++base[idx[i]];
    return base;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& d, const SplitSpec& spec) {
    const auto sizes = d.counts();
    for (int k = 0; k < d.C; ++k) {
        if (sizes[k] == 0) {
            throw SplitError("class " + std::to_string(k) + " has no samples");
        }
    }

    std::vector<int> take;
    if (!spec.train_counts.empty()) {
        if (static_cast<int>(spec.train_counts.size()) != d.C) {
            throw SplitError("explicit train counts: expected " + std::to_string(d.C) +
                             " entries, got " + std::to_string(spec.train_counts.size()));
        }
        take = spec.train_counts;
        for (int k = 0; k < d.C; ++k) {
            // Both sides need every class, so a count may not drain one.
            if (take[k] < 1 || take[k] > sizes[k] - 1) {
                throw SplitError("explicit train count " + std::to_string(take[k]) +
                                 " out of range for class " + std::to_string(k) + " of size " +
                                 std::to_string(sizes[k]));
            }
        }
    } else {
        if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
            throw SplitError("train fraction must lie in (0,1)");
        }
        const int n_train = static_cast<int>(std::floor(spec.fraction * d.n()));
        take = apportion(sizes, n_train);
        // Both sides keep at least one row of every class that has two.
        for (int pass = 0; pass < d.C; ++pass) {
            int deficit = 0;
            for (int k = 0; k < d.C; ++k) {
                if (sizes[k] >= 2 && take[k] == 0) {
                    take[k] = 1;
                    --deficit;
                }
                if (sizes[k] >= 2 && take[k] == sizes[k]) {
                    take[k] = sizes[k] - 1;
                    ++deficit;
                }
            }
            if (deficit == 0) break;
            for (int k = d.C - 1; k >= 0 && deficit != 0; --k) {
                if (deficit > 0 && take[k] < sizes[k] - 1) {
                    ++take[k];
                    --deficit;
                } else if (deficit < 0 && take[k] > 1) {
                    --take[k];
                    ++deficit;
                }
            }
        }
    }

    Rng rng(spec.seed);
    const auto tau = d.class_rows();
    std::vector<int> train_rows, test_rows;
    for (int k = 0; k < d.C; ++k) {
        std::vector<int> rows = tau[k];
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (i < static_cast<std::size_t>(take[k]) ? train_rows : test_rows).push_back(rows[i]);
        }
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {select_rows(d, train_rows), select_rows(d, test_rows)};
}

MinMax normalize_fit_transform(Dataset& train, Dataset& test) {
    if (train.n() == 0) throw ContractError("normalize: empty training set");
    if (test.n() > 0 && test.dim() != train.dim()) {
        throw ContractError("normalize: train/test dimension mismatch");
    }
    const int d = train.dim();
    MinMax mm;
    mm.lo.resize(d);
    mm.hi.resize(d);
    for (int j = 0; j < d; ++j) {
        double lo = train.X.at(0, j), hi = lo;
        for (int i = 1; i < train.n(); ++i) {
            lo = std::min(lo, train.X.at(i, j));
            hi = std::max(hi, train.X.at(i, j));
        }
        mm.lo[j] = lo;
        mm.hi[j] = hi;
        const double range = hi - lo;
        auto map_value = [&](double v) {
            if (range == 0.0) return 0.5;
            return std::clamp((v - lo) / range, 0.0, 1.0);
        };
        for (int i = 0; i < train.n(); ++i) train.X.at(i, j) = map_value(train.X.at(i, j));
        for (int i = 0; i < test.n(); ++i) test.X.at(i, j) = map_value(test.X.at(i, j));
    }
    return mm;
}

ClassStats class_stats(const Dataset& d) {
    ClassStats s;
    s.sizes = d.counts();
    if (s.sizes.empty() || d.n() == 0) throw ContractError("class_stats: empty dataset");
    const auto [lo, hi] = std::minmax_element(s.sizes.begin(), s.sizes.end());
    if (*lo == 0) throw ContractError("class_stats: empty class");
    s.ir = std::round(100.0 * static_cast<double>(*hi) / static_cast<double>(*lo)) / 100.0;
    return s;
}

Manifest load_manifest(const std::string& path) {
    const auto kv = config::parse_kv_file(path);
    Manifest m;
    m.name = config::require_str(kv, "name", path);
    m.file = config::get_str(kv, "file", "");
    m.train_file = config::get_str(kv, "train_file", "");
    m.test_file = config::get_str(kv, "test_file", "");
    m.label_column = config::get_str(kv, "label", "label");
    m.missing_token = config::get_str(kv, "missing", "");
    m.impute = config::get_str(kv, "impute", "none");
    m.impute_k = config::get_int(kv, "impute_k", 2);
    m.split = config::get_str(kv, "split", "fraction");
    m.train_fraction = config::get_double(kv, "train_fraction", 0.7);
    m.train_counts = config::get_int_list(kv, "train_counts");
    m.subsample = config::get_int(kv, "subsample", 0);

    if (m.impute != "none" && m.impute != "median" && m.impute != "knn") {
        throw ConfigError(path + ": impute must be none|median|knn");
    }
    if (m.split != "fraction" && m.split != "counts" && m.split != "files") {
        throw ConfigError(path + ": split must be fraction|counts|files");
    }
    if (m.split == "files") {
        if (m.train_file.empty() || m.test_file.empty()) {
            throw ConfigError(path + ": split=files requires train_file and test_file");
        }
    } else if (m.file.empty()) {
        throw ConfigError(path + ": missing data file");
    }
    if (m.split == "counts" && m.train_counts.empty()) {
        throw ConfigError(path + ": split=counts requires train_counts");
    }
    return m;
}

Dataset subsample(const Dataset& d, int cap, Rng& rng) {
    if (cap < d.C) throw ContractError("subsample: cap below class count");
    if (cap >= d.n()) return d;
    const auto sizes = d.counts();
    auto take = apportion(sizes, cap);
    for (int k = 0; k < d.C; ++k) {
        if (take[k] == 0) take[k] = 1;  // never drop a class entirely
    }
    const auto tau = d.class_rows();
    std::vector<int> rows;
    for (int k = 0; k < d.C; ++k) {
        std::vector<int> cls = tau[k];
        rng.shuffle(cls);
        rows.insert(rows.end(), cls.begin(), cls.begin() + take[k]);
    }
    std::sort(rows.begin(), rows.end());
    return select_rows(d, rows);
}

namespace {

RawTable impute_table(const RawTable& t, const Manifest& m) {
    if (m.impute == "knn") return knn_impute(t, m.impute_k);
    if (m.impute == "median") return median_impute(t);
    if (t.missing_count() != 0) {
        throw ImputeError(m.name + ": table has missing cells but impute = none");
    }
    return t;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (std::filesystem::path(base_dir) / fp).string();
}

}  // namespace

LoadedPair load_pipeline(const Manifest& m, std::uint64_t seed) {
    LoadedPair out;
    if (m.split == "files") {
        RawTable tr = impute_table(load_csv(m.train_file, m.label_column, m.missing_token), m);
        RawTable te = impute_table(load_csv(m.test_file, m.label_column, m.missing_token), m);
        std::vector<std::string> all_labels = tr.labels;
        all_labels.insert(all_labels.end(), te.labels.begin(), te.labels.end());
        const auto order = canonical_class_order(all_labels);
        out.train = dataset_with_classes(tr, order);
        out.test = dataset_with_classes(te, order);
    } else {
        RawTable t = impute_table(load_csv(m.file, m.label_column, m.missing_token), m);
        Dataset full = make_dataset(t);
        if (m.subsample > 0 && m.subsample < full.n()) {
            Rng sub_rng = Rng(seed).fork(17);
            full = subsample(full, m.subsample, sub_rng);
        }
        SplitSpec spec;
        spec.seed = seed;
        if (m.split == "counts") {
            spec.train_counts = m.train_counts;
        } else {
            spec.fraction = m.train_fraction;
        }
        auto pair = stratified_split(full, spec);
        out.train = std::move(pair.first);
        out.test = std::move(pair.second);
    }
    normalize_fit_transform(out.train, out.test);
    return out;
}

LoadedPair load_pipeline(const std::string& manifest_path, std::uint64_t seed) {
    Manifest m = load_manifest(manifest_path);
    const std::string dir = std::filesystem::path(manifest_path).parent_path().string();
    if (!m.file.empty()) m.file = resolve(dir, m.file);
    if (!m.train_file.empty()) m.train_file = resolve(dir, m.train_file);
    if (!m.test_file.empty()) m.test_file = resolve(dir, m.test_file);
    return load_pipeline(m, seed);
}

}  // namespace advos::data
