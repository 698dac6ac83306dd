#include "advos/config.hpp"

#include <fstream>
#include <sstream>

#include "advos/error.hpp"

namespace advos::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KvMap parse_kv_text(const std::string& text, const std::string& origin) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        kv[key] = val;
    }
    return kv;
}

KvMap parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str(), path);
}

std::string get_str(const KvMap& kv, const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

std::string require_str(const KvMap& kv, const std::string& key, const std::string& origin) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(origin + ": missing required key '" + key + "'");
    return it->second;
}

double get_double(const KvMap& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + it->second + "'");
    }
}

int get_int(const KvMap& kv, const std::string& key, int fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        std::size_t used = 0;
        const int v = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + it->second + "'");
    }
}

bool get_bool(const KvMap& kv, const std::string& key, bool fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + v + "'");
}

namespace {
template <typename T, typename F>
std::vector<T> parse_list(const KvMap& kv, const std::string& key, F convert) {
    std::vector<T> out;
    auto it = kv.find(key);
    if (it == kv.end()) return out;
    std::istringstream in(it->second);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        const std::size_t b = tok.find_first_not_of(" \t");
        const std::size_t e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) {
            throw ConfigError("key '" + key + "': empty list element");
        }
        out.push_back(convert(tok.substr(b, e - b + 1), key));
    }
    return out;
}
}  // namespace

std::vector<int> get_int_list(const KvMap& kv, const std::string& key) {
    return parse_list<int>(kv, key, [](const std::string& s, const std::string& k) {
        try {
            return std::stoi(s);
        } catch (const std::exception&) {
            throw ConfigError("key '" + k + "': expected integer list element, got '" + s + "'");
        }
    });
}

std::vector<int> get_int_list(const KvMap& kv, const std::string& key,
                              const std::vector<int>& fallback) {
    if (!kv.count(key)) return fallback;
    return get_int_list(kv, key);
}

std::vector<double> get_double_list(const KvMap& kv, const std::string& key) {
    return parse_list<double>(kv, key, [](const std::string& s, const std::string& k) {
        try {
            return std::stod(s);
        } catch (const std::exception&) {
            throw ConfigError("key '" + k + "': expected numeric list element, got '" + s + "'");
        }
    });
}

std::uint64_t fingerprint(const KvMap& kv) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [k, v] : kv) {  // std::map iterates in sorted key order
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    return h;
}

}  // namespace advos::config
