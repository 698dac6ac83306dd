#pragma once

#include <string>
#include <vector>

namespace advos::bench {

// Names of the bundled benchmark datasets, in suite order.
std::vector<std::string> dataset_names();

// Materializes one dataset (CSV plus manifest) into dir, creating it if
// needed. Generation is deterministic: repeated calls produce byte-identical
// files. Returns the manifest path.
std::string write_dataset(const std::string& name, const std::string& dir);

// Materializes the whole suite. Returns manifest paths in suite order.
std::vector<std::string> write_all(const std::string& dir);

}  // namespace advos::bench
