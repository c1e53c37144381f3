#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>

#include "gcamat/core/errors.hpp"

namespace gcamat::io {

// Flat dotted-key configuration: `key = value` lines, '#' comments. The
// effective config (file plus overrides) is echoed verbatim into the run's
// output directory.
class KeyValueConfig {
public:
    static KeyValueConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        KeyValueConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) {
        if (key.empty()) throw ConfigError("empty config key");
        kv_[key] = value;
    }

    // "key=value" as passed to --set
    void set_pair(const std::string& pair) {
        auto eq = pair.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + pair + "'");
        set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
    }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not a number: '" + it->second + "'");
        }
    }

    int get_int(const std::string& key, int fallback) const {
        double v = get_double(key, fallback);
        int i = static_cast<int>(v);
        if (v != i) throw ConfigError("config key " + key + " is not an integer");
        return i;
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not an unsigned integer");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config key " + key + " is not a boolean: '" + v + "'");
    }

    // Reject typos: every present key must be known.
    void check_known(const std::set<std::string>& known) const {
        for (const auto& [k, v] : kv_)
            if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }

    void echo(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write config echo to " + path);
        for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> kv_;
};

}  // namespace gcamat::io
