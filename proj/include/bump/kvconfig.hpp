#pragma once

// Flat key = value config files, a TOML-compatible subset: dotted bare keys,
// quoted strings, numbers, booleans, # comments. No sections or arrays.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bump::kvconfig {

class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    // Typed getters throw config_error on missing keys or bad conversions;
    // the optional forms return nullopt when absent.
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::optional<double> maybe_double(const std::string& key) const;
    std::optional<std::int64_t> maybe_int(const std::string& key) const;
    std::optional<std::uint64_t> maybe_uint(const std::string& key) const;
    std::optional<bool> maybe_bool(const std::string& key) const;
    std::optional<std::string> maybe_string(const std::string& key) const;

    // Throws config_error naming the first key outside the allowed set.
    void restrict_keys(const std::vector<std::string>& allowed) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;  // raw value text, unquoted
    std::map<std::string, bool> quoted_;         // parsed from a quoted literal
};

}  // namespace bump::kvconfig
