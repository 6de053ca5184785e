#pragma once

// Plain-text key-value config with [sections].
//
//   # comment
//   [train]
//   learning_rate = 1e-3
//
// Every entry keeps its source line so that errors can point at it.

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tftm/common.hpp"

namespace tftm {

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct ConfigSection {
    std::string name;
    int line = 0;
    std::vector<ConfigEntry> entries;

    const ConfigEntry* find(std::string_view key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

} // namespace detail

class Config {
public:
    Config() = default;

    static Config parse(std::string_view text, std::string origin = "<config>") {
        Config cfg;
        cfg.origin_ = std::move(origin);
        std::istringstream in{std::string(text)};
        std::string raw;
        int lineno = 0;
        ConfigSection* current = nullptr;
        while (std::getline(in, raw)) {
            ++lineno;
            auto hash = raw.find('#');
            std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']' || line.size() < 3)
                    throw ConfigError(cfg.where(lineno) + ": malformed section header '" + line + "'");
                std::string name = detail::trim(line.substr(1, line.size() - 2));
                if (cfg.section(name))
                    throw ConfigError(cfg.where(lineno) + ": duplicate section [" + name + "]");
                cfg.sections_.push_back({name, lineno, {}});
                current = &cfg.sections_.back();
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(cfg.where(lineno) + ": expected 'key = value', got '" + line + "'");
            if (!current)
                throw ConfigError(cfg.where(lineno) + ": entry outside of any [section]");
            std::string key = detail::trim(line.substr(0, eq));
            std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(cfg.where(lineno) + ": empty key");
            if (current->find(key))
                throw ConfigError(cfg.where(lineno) + ": duplicate key '" + key + "' in [" + current->name + "]");
            current->entries.push_back({key, value, lineno});
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str(), path);
    }

    const std::string& origin() const { return origin_; }
    const std::vector<ConfigSection>& sections() const { return sections_; }

    const ConfigSection* section(std::string_view name) const {
        for (const auto& s : sections_)
            if (s.name == name) return &s;
        return nullptr;
    }

    bool has(std::string_view sec, std::string_view key) const {
        auto* s = section(sec);
        return s && s->find(key);
    }

    std::string get_string(std::string_view sec, std::string_view key, std::optional<std::string> fallback = {}) const {
        if (auto* e = entry(sec, key)) return e->value;
        if (fallback) return *fallback;
        throw ConfigError(origin_ + ": missing required key '" + std::string(key) + "' in [" + std::string(sec) + "]");
    }

    double get_double(std::string_view sec, std::string_view key, std::optional<double> fallback = {}) const {
        auto* e = entry(sec, key);
        if (!e) {
            if (fallback) return *fallback;
            throw ConfigError(origin_ + ": missing required key '" + std::string(key) + "' in [" + std::string(sec) + "]");
        }
        return to_double(*e, e->value);
    }

    long long get_int(std::string_view sec, std::string_view key, std::optional<long long> fallback = {}) const {
        auto* e = entry(sec, key);
        if (!e) {
            if (fallback) return *fallback;
            throw ConfigError(origin_ + ": missing required key '" + std::string(key) + "' in [" + std::string(sec) + "]");
        }
        long long v = 0;
        auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
        if (ec != std::errc{} || ptr != e->value.data() + e->value.size())
            throw ConfigError(where(e->line) + ": '" + e->key + "' expects an integer, got '" + e->value + "'");
        return v;
    }

    std::vector<double> get_doubles(std::string_view sec, std::string_view key, std::optional<std::vector<double>> fallback = {}) const {
        auto* e = entry(sec, key);
        if (!e) {
            if (fallback) return *fallback;
            throw ConfigError(origin_ + ": missing required key '" + std::string(key) + "' in [" + std::string(sec) + "]");
        }
        std::vector<double> out;
        for (const auto& tok : detail::split_ws(e->value)) out.push_back(to_double(*e, tok));
        return out;
    }

    /// "file:line" for diagnostics.
    std::string where(int line) const { return origin_ + ":" + std::to_string(line); }

    /// Canonical text (sections and entries in file order), used for hashing.
    std::string canonical() const {
        std::string out;
        for (const auto& s : sections_) {
            out += "[" + s.name + "]\n";
            for (const auto& e : s.entries) out += e.key + "=" + e.value + "\n";
        }
        return out;
    }

    void set(const std::string& sec, const std::string& key, const std::string& value) {
        ConfigSection* s = nullptr;
        for (auto& cand : sections_)
            if (cand.name == sec) s = &cand;
        if (!s) {
            sections_.push_back({sec, 0, {}});
            s = &sections_.back();
        }
        for (auto& e : s->entries)
            if (e.key == key) {
                e.value = value;
                return;
            }
        s->entries.push_back({key, value, 0});
    }

private:
    const ConfigEntry* entry(std::string_view sec, std::string_view key) const {
        auto* s = section(sec);
        return s ? s->find(key) : nullptr;
    }

    double to_double(const ConfigEntry& e, const std::string& tok) const {
        try {
            std::size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(where(e.line) + ": '" + e.key + "' expects a number, got '" + tok + "'");
        }
    }

    std::string origin_ = "<config>";
    std::vector<ConfigSection> sections_;
};

} // namespace tftm
