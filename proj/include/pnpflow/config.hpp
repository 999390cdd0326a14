#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "pnpflow/errors.hpp"

namespace pnpflow {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace detail

// Flat key-value config with [section] headers; keys address as
// "section.key". Comment lines start with # or ;.
class Config {
public:
    Config() = default;

    static Config parse_text(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string s = detail::trim(line);
            if (s.empty() || s[0] == '#' || s[0] == ';') continue;
            if (s.front() == '[') {
                if (s.back() != ']' || s.size() < 3) {
                    throw config_error(origin + ":" + std::to_string(lineno) +
                                       ": malformed section header");
                }
                section = detail::trim(s.substr(1, s.size() - 2));
                if (section.empty()) {
                    throw config_error(origin + ":" + std::to_string(lineno) + ": empty section");
                }
                continue;
            }
            const std::size_t eq = s.find('=');
            if (eq == std::string::npos) {
                throw config_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = detail::trim(s.substr(0, eq));
            const std::string value = detail::trim(s.substr(eq + 1));
            if (key.empty()) {
                throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("Config: cannot open " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_text(buf.str(), path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    void erase(const std::string& key) { values_.erase(key); }

    std::string get_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw config_error("Config: missing key " + key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    std::int64_t get_int(const std::string& key) const { return to_int(key, get_string(key)); }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    std::uint64_t get_u64(const std::string& key) const {
        const std::string v = get_string(key);
        if (!v.empty() && v[0] == '-') {
            throw config_error("Config: key " + key + " must be >= 0");
        }
        char* end = nullptr;
        const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0') {
            throw config_error("Config: key " + key + " is not an integer: " + v);
        }
        return static_cast<std::uint64_t>(x);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? get_u64(key) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = get_string(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw config_error("Config: key " + key + " is not a boolean: " + v);
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    // Canonical form: sorted "key = value" lines. Hash and equality checks go
    // through this, so map ordering is the only ordering that matters.
    std::string serialize() const {
        std::ostringstream out;
        for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
        return out.str();
    }

private:
    static double to_double(const std::string& key, const std::string& v) {
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0') {
            throw config_error("Config: key " + key + " is not a number: " + v);
        }
        return x;
    }

    static std::int64_t to_int(const std::string& key, const std::string& v) {
        char* end = nullptr;
        const long long x = std::strtoll(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0') {
            throw config_error("Config: key " + key + " is not an integer: " + v);
        }
        return static_cast<std::int64_t>(x);
    }

    std::map<std::string, std::string> values_;
};

// FNV-1a over the canonical serialization, reported as fixed-width hex.
inline std::string config_hash(const Config& cfg) {
    const std::string text = cfg.serialize();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pnpflow
