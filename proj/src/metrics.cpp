#include "advos/metrics.hpp"

#include <cmath>

#include "advos/error.hpp"

namespace advos::metrics {

Confusion confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                    int classes) {
    if (classes <= 0) throw MetricError("confusion: class count must be positive");
    if (y_true.size() != y_pred.size()) {
        throw MetricError("confusion: label vectors differ in length");
    }
    if (y_true.empty()) throw MetricError("confusion: empty label vectors");
    Confusion c(classes);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes) {
            throw MetricError("confusion: label out of range at index " + std::to_string(i));
        }
        ++c.at(t, p);
    }
    return c;
}

std::vector<double> recalls(const Confusion& c) {
    std::vector<double> out(c.classes);
    for (int t = 0; t < c.classes; ++t) {
        std::int64_t total = 0;
        for (int p = 0; p < c.classes; ++p) total += c.at(t, p);
        if (total == 0) {
            throw MetricError("recall undefined: class " + std::to_string(t) +
                              " has no true samples");
        }
        out[t] = static_cast<double>(c.at(t, t)) / static_cast<double>(total);
    }
    return out;
}

double acsa(const Confusion& c) {
    const auto r = recalls(c);
    double s = 0.0;
    for (double v : r) s += v;
    return 100.0 * s / static_cast<double>(r.size());
}

double gmean(const Confusion& c) {
    const auto r = recalls(c);
    // Any zero recall collapses the product; return exact zero rather than
    // exp of -inf.
    double log_sum = 0.0;
    for (double v : r) {
        if (v == 0.0) return 0.0;
        log_sum += std::log(v);
    }
    return 100.0 * std::exp(log_sum / static_cast<double>(r.size()));
}

EvalReport evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred, int classes,
                    int epoch) {
    EvalReport rep;
    rep.conf = confusion(y_true, y_pred, classes);
    rep.recalls = recalls(rep.conf);
    rep.acsa = acsa(rep.conf);
    rep.gm = gmean(rep.conf);
    rep.epoch = epoch;
    return rep;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["acsa"] = r.acsa;
    j["gm"] = r.gm;
    j["recalls"] = r.recalls;
    j["epoch"] = r.epoch;
    std::vector<std::vector<std::int64_t>> rows(r.conf.classes);
    for (int t = 0; t < r.conf.classes; ++t) {
        rows[t].resize(r.conf.classes);
        for (int p = 0; p < r.conf.classes; ++p) rows[t][p] = r.conf.at(t, p);
    }
    j["confusion"] = rows;
    return j;
}

}  // namespace advos::metrics
