#include "advos/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advos/error.hpp"
#include "advos/log.hpp"
#include "advos/rng.hpp"

namespace advos::resample {

Method method_from_string(const std::string& s) {
    if (s == "ro") return Method::kRandom;
    if (s == "smote") return Method::kSmote;
    if (s == "b-smote" || s == "bsmote") return Method::kBorderlineSmote;
    if (s == "adasyn") return Method::kAdasyn;
    throw ConfigError("unknown resampling method '" + s + "'");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::kRandom: return "ro";
        case Method::kSmote: return "smote";
        case Method::kBorderlineSmote: return "b-smote";
        case Method::kAdasyn: return "adasyn";
    }
    return "?";
}

namespace {

double sq_dist(const Tensor& X, int a, int b) {
    double s = 0.0;
    for (int j = 0; j < X.cols(); ++j) {
        const double d = X.at(a, j) - X.at(b, j);
        s += d * d;
    }
    return s;
}

// Dataset plus a growing block of synthetic rows.
struct Builder {
    const data::Dataset& base;
    std::vector<double> extra_x;
    std::vector<int> extra_y;

    void add(const std::vector<double>& row, int label) {
        extra_x.insert(extra_x.end(), row.begin(), row.end());
        extra_y.push_back(label);
    }

    data::Dataset finish() const {
        const int d = base.dim();
        const int extra_n = static_cast<int>(extra_y.size());
        data::Dataset out;
        out.C = base.C;
        out.class_names = base.class_names;
        out.X = Tensor(base.n() + extra_n, d);
        for (std::size_t i = 0; i < base.X.size(); ++i) out.X[i] = base.X[i];
        for (std::size_t i = 0; i < extra_x.size(); ++i) {
            out.X[base.X.size() + i] = extra_x[i];
        }
        out.y = base.y;
        out.y.insert(out.y.end(), extra_y.begin(), extra_y.end());
        return out;
    }
};

std::vector<double> interpolate(const Tensor& X, int from, int to, double u) {
    std::vector<double> row(X.cols());
    for (int j = 0; j < X.cols(); ++j) {
        row[j] = X.at(from, j) + u * (X.at(to, j) - X.at(from, j));
    }
    return row;
}

std::vector<double> copy_row(const Tensor& X, int r) {
    std::vector<double> row(X.cols());
    for (int j = 0; j < X.cols(); ++j) row[j] = X.at(r, j);
    return row;
}

int largest_class_size(const data::Dataset& d) {
    const auto sizes = d.counts();
    return *std::max_element(sizes.begin(), sizes.end());
}

void check_spec(const data::Dataset& train, const ResampleSpec& spec) {
    if (train.C < 2) throw ContractError("resampling requires at least two classes");
    if (spec.k < 1) throw ContractError("resampling: k must be >= 1");
}

}  // namespace

std::vector<int> knn_indices(const Tensor& X, const std::vector<int>& pool, int row, int k) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(pool.size());
    for (int p : pool) {
        if (p == row) continue;
        scored.emplace_back(sq_dist(X, row, p), p);
    }
    if (k < static_cast<int>(scored.size())) {
        std::partial_sort(scored.begin(), scored.begin() + k, scored.end());
        scored.resize(k);
    } else {
        std::sort(scored.begin(), scored.end());
    }
    std::vector<int> out;
    out.reserve(scored.size());
    for (const auto& [d, p] : scored) out.push_back(p);
    return out;
}

data::Dataset random_oversample(const data::Dataset& train, const ResampleSpec& spec) {
    check_spec(train, spec);
    const int target = largest_class_size(train);
    const auto tau = train.class_rows();
    Rng rng(spec.seed);
    Builder b{train, {}, {}};
    for (int c = 0; c < train.C; ++c) {
        const auto& rows = tau[c];
        for (int need = target - static_cast<int>(rows.size()); need > 0; --need) {
            b.add(copy_row(train.X, rows[rng.below(rows.size())]), c);
        }
    }
    return b.finish();
}

namespace {

// SMOTE synthesis for one class: `need` interpolated rows between class
// members and their same-class nearest neighbors.
void smote_class(Builder& b, const std::vector<int>& class_rows,
                 const std::vector<int>& bases, int c, int k, int need, Rng& rng) {
    const Tensor& X = b.base.X;
    if (class_rows.size() == 1) {
        log::warn("smote: class ", c, " has a single sample; duplicating");
        for (int i = 0; i < need; ++i) b.add(copy_row(X, class_rows[0]), c);
        return;
    }
    const int k_eff = std::min<int>(k, static_cast<int>(class_rows.size()) - 1);
    if (k_eff < k) {
        log::warn("smote: class ", c, " has ", class_rows.size(), " samples; lowering k to ",
                  k_eff);
    }
    std::vector<std::vector<int>> nn_cache(bases.size());
    for (int i = 0; i < need; ++i) {
        const std::size_t bi = rng.below(bases.size());
        if (nn_cache[bi].empty()) {
            nn_cache[bi] = knn_indices(X, class_rows, bases[bi], k_eff);
        }
        const auto& nns = nn_cache[bi];
        const int nn = nns[rng.below(nns.size())];
        b.add(interpolate(X, bases[bi], nn, rng.uniform()), c);
    }
}

}  // namespace

data::Dataset smote(const data::Dataset& train, const ResampleSpec& spec) {
    check_spec(train, spec);
    const int target = largest_class_size(train);
    const auto tau = train.class_rows();
    Rng rng(spec.seed);
    Builder b{train, {}, {}};
    for (int c = 0; c < train.C; ++c) {
        const int need = target - static_cast<int>(tau[c].size());
        if (need <= 0) continue;
        smote_class(b, tau[c], tau[c], c, spec.k, need, rng);
    }
    return b.finish();
}

data::Dataset borderline_smote(const data::Dataset& train, const ResampleSpec& spec) {
    check_spec(train, spec);
    const int target = largest_class_size(train);
    const auto tau = train.class_rows();
    std::vector<int> all(train.n());
    std::iota(all.begin(), all.end(), 0);
    Rng rng(spec.seed);
    Builder b{train, {}, {}};
    for (int c = 0; c < train.C; ++c) {
        const int need = target - static_cast<int>(tau[c].size());
        if (need <= 0) continue;
        // Danger points: at least half but not all of the m nearest neighbors
        // over the whole training set belong to other classes.
        const int m = std::min<int>(spec.k, train.n() - 1);
        std::vector<int> danger;
        for (int row : tau[c]) {
            const auto nns = knn_indices(train.X, all, row, m);
            int majority = 0;
            for (int nn : nns) majority += train.y[nn] != c ? 1 : 0;
            if (2 * majority >= m && majority < m) danger.push_back(row);
        }
        if (danger.empty()) {
            log::warn("b-smote: class ", c, " has no danger points; using plain smote");
            smote_class(b, tau[c], tau[c], c, spec.k, need, rng);
        } else {
            smote_class(b, tau[c], danger, c, spec.k, need, rng);
        }
    }
    return b.finish();
}

std::vector<int> adasyn_allocation(const std::vector<double>& fractions, int deficit) {
    if (fractions.empty()) throw ContractError("adasyn_allocation: no fractions");
    double total = 0.0;
    for (double f : fractions) {
        if (f < 0.0 || f > 1.0) throw ContractError("adasyn_allocation: fraction out of [0,1]");
        total += f;
    }
    std::vector<int> out(fractions.size(), 0);
    if (total == 0.0) {
        // Degenerate density: spread the deficit uniformly. (Not apportion --
        // the deficit routinely exceeds the member count.)
        const int n = static_cast<int>(fractions.size());
        for (int i = 0; i < n; ++i) out[i] = deficit / n + (i < deficit % n ? 1 : 0);
        return out;
    }
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        out[i] = static_cast<int>(std::llround(fractions[i] / total * deficit));
    }
    return out;
}

data::Dataset adasyn(const data::Dataset& train, const ResampleSpec& spec) {
    check_spec(train, spec);
    const int target = largest_class_size(train);
    const auto tau = train.class_rows();
    for (int c = 0; c < train.C; ++c) {
        const int size = static_cast<int>(tau[c].size());
        if (size < target && size < spec.k + 1) {
            throw NotApplicableError("adasyn: class " + std::to_string(c) + " has " +
                                     std::to_string(size) + " samples, needs at least " +
                                     std::to_string(spec.k + 1));
        }
    }
    std::vector<int> all(train.n());
    std::iota(all.begin(), all.end(), 0);
    Rng rng(spec.seed);
    Builder b{train, {}, {}};
    for (int c = 0; c < train.C; ++c) {
        const int deficit = target - static_cast<int>(tau[c].size());
        if (deficit <= 0) continue;
        std::vector<double> fractions;
        fractions.reserve(tau[c].size());
        for (int row : tau[c]) {
            const auto nns = knn_indices(train.X, all, row, spec.k);
            int majority = 0;
            for (int nn : nns) majority += train.y[nn] != c ? 1 : 0;
            fractions.push_back(static_cast<double>(majority) / spec.k);
        }
        bool all_zero = true;
        for (double f : fractions) all_zero &= f == 0.0;
        if (all_zero) {
            log::warn("adasyn: class ", c,
                      " sees no majority neighbors; falling back to uniform allocation");
        }
        const auto alloc = adasyn_allocation(fractions, deficit);
        const int k_nn = std::min<int>(spec.k, static_cast<int>(tau[c].size()) - 1);
        for (std::size_t i = 0; i < tau[c].size(); ++i) {
            if (alloc[i] == 0) continue;
            const auto nns = knn_indices(train.X, tau[c], tau[c][i], k_nn);
            for (int s = 0; s < alloc[i]; ++s) {
                const int nn = nns[rng.below(nns.size())];
                b.add(interpolate(train.X, tau[c][i], nn, rng.uniform()), c);
            }
        }
    }
    return b.finish();
}

data::Dataset apply(const data::Dataset& train, const ResampleSpec& spec) {
    switch (spec.method) {
        case Method::kRandom: return random_oversample(train, spec);
        case Method::kSmote: return smote(train, spec);
        case Method::kBorderlineSmote: return borderline_smote(train, spec);
        case Method::kAdasyn: return adasyn(train, spec);
    }
    throw ContractError("unknown resampling method");
}

}  // namespace advos::resample
