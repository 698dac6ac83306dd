#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace advos::metrics {

// Row = true class, column = predicted class.
struct Confusion {
    int classes = 0;
    std::vector<std::int64_t> counts;

    Confusion() = default;
    explicit Confusion(int c) : classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::int64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t) * classes + p]; }
    std::int64_t at(int t, int p) const {
        return counts[static_cast<std::size_t>(t) * classes + p];
    }
};

Confusion confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred, int classes);

// Per-class recall; every class must appear at least once in y_true.
std::vector<double> recalls(const Confusion& c);

// 100 * mean of per-class recalls.
double acsa(const Confusion& c);

// 100 * geometric mean of per-class recalls; exactly 0 when any recall is 0.
double gmean(const Confusion& c);

struct EvalReport {
    double acsa = 0.0;
    double gm = 0.0;
    std::vector<double> recalls;
    Confusion conf;
    int epoch = -1;
};

EvalReport evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred, int classes,
                    int epoch = -1);

nlohmann::json to_json(const EvalReport& r);

}  // namespace advos::metrics
