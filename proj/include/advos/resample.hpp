#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advos/data.hpp"

namespace advos::resample {

enum class Method { kRandom, kSmote, kBorderlineSmote, kAdasyn };

Method method_from_string(const std::string& s);
std::string method_name(Method m);

struct ResampleSpec {
    Method method = Method::kSmote;
    int k = 5;
    std::uint64_t seed = 0;
};

// All methods oversample every non-largest class toward the largest class
// size (one-vs-rest for the neighbor-based variants). Original rows are
// preserved; synthetic rows are appended.
data::Dataset random_oversample(const data::Dataset& train, const ResampleSpec& spec);
data::Dataset smote(const data::Dataset& train, const ResampleSpec& spec);
data::Dataset borderline_smote(const data::Dataset& train, const ResampleSpec& spec);
// Throws NotApplicableError when a class to oversample has fewer than k+1
// members.
data::Dataset adasyn(const data::Dataset& train, const ResampleSpec& spec);

data::Dataset apply(const data::Dataset& train, const ResampleSpec& spec);

// Exposed for tests: indices of the k nearest rows to `row` within `pool`
// (Euclidean, self excluded when pool contains it), ties broken by index.
std::vector<int> knn_indices(const Tensor& X, const std::vector<int>& pool, int row, int k);

// Exposed for tests: ADASYN per-point allocation given majority-neighbor
// fractions and a deficit. Falls back to uniform when all fractions are 0.
std::vector<int> adasyn_allocation(const std::vector<double>& fractions, int deficit);

}  // namespace advos::resample
