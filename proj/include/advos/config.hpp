#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace advos::config {

// Flat key = value file: one pair per line, '#' starts a comment, blank
// lines ignored. Later keys override earlier ones.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text, const std::string& origin = "<string>");
KvMap parse_kv_file(const std::string& path);

std::string get_str(const KvMap& kv, const std::string& key, const std::string& fallback);
std::string require_str(const KvMap& kv, const std::string& key, const std::string& origin);
double get_double(const KvMap& kv, const std::string& key, double fallback);
int get_int(const KvMap& kv, const std::string& key, int fallback);
bool get_bool(const KvMap& kv, const std::string& key, bool fallback);
std::vector<int> get_int_list(const KvMap& kv, const std::string& key);
std::vector<int> get_int_list(const KvMap& kv, const std::string& key,
                              const std::vector<int>& fallback);
std::vector<double> get_double_list(const KvMap& kv, const std::string& key);

// FNV-1a over "key=value\n" lines in sorted key order; stable fingerprint
// for run outputs.
std::uint64_t fingerprint(const KvMap& kv);

}  // namespace advos::config
