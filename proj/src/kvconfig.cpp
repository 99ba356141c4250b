#include "bump/kvconfig.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "bump/errors.hpp"

namespace bump::kvconfig {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool valid_key(const std::string& key) {
    if (key.empty() || key.front() == '.' || key.back() == '.') return false;
    bool prev_dot = false;
    for (char c : key) {
        if (c == '.') {
            if (prev_dot) return false;
            prev_dot = true;
            continue;
        }
        prev_dot = false;
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
            return false;
    }
    return true;
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto fail = [&](const std::string& what) -> void {
            throw config_error("config line " + std::to_string(lineno) + ": " + what);
        };

        std::string body = line;
        // Comments start at an unquoted '#'.
        bool in_quote = false;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '"') in_quote = !in_quote;
            if (body[i] == '#' && !in_quote) {
                body = body.substr(0, i);
                break;
            }
        }
        body = trim(body);
        if (body.empty()) continue;

        const auto eq = body.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (!valid_key(key)) fail("bad key '" + key + "'");
        if (value.empty()) fail("missing value for '" + key + "'");
        if (cfg.values_.count(key)) fail("duplicate key '" + key + "'");

        bool quoted = false;
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                fail("unterminated string for '" + key + "'");
            value = value.substr(1, value.size() - 2);
            if (value.find('"') != std::string::npos)
                fail("embedded quote in string for '" + key + "'");
            quoted = true;
        }
        cfg.values_[key] = value;
        cfg.quoted_[key] = quoted;
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str());
    } catch (const config_error& e) {
        throw config_error(path.string() + ": " + e.what());
    }
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

namespace {

[[noreturn]] void missing(const std::string& key) {
    throw config_error("missing config key '" + key + "'");
}

}  // namespace

double Config::get_double(const std::string& key) const {
    const auto v = maybe_double(key);
    if (!v) missing(key);
    return *v;
}

std::int64_t Config::get_int(const std::string& key) const {
    const auto v = maybe_int(key);
    if (!v) missing(key);
    return *v;
}

std::uint64_t Config::get_uint(const std::string& key) const {
    const auto v = maybe_uint(key);
    if (!v) missing(key);
    return *v;
}

bool Config::get_bool(const std::string& key) const {
    const auto v = maybe_bool(key);
    if (!v) missing(key);
    return *v;
}

std::string Config::get_string(const std::string& key) const {
    const auto v = maybe_string(key);
    if (!v) missing(key);
    return *v;
}

std::optional<double> Config::maybe_double(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const std::string& s = it->second;
    double v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw config_error("config key '" + key + "' is not a number: " + s);
    return v;
}

std::optional<std::int64_t> Config::maybe_int(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const std::string& s = it->second;
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw config_error("config key '" + key + "' is not an integer: " + s);
    return v;
}

std::optional<std::uint64_t> Config::maybe_uint(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const std::string& s = it->second;
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw config_error("config key '" + key + "' is not a nonnegative integer: " + s);
    return v;
}

std::optional<bool> Config::maybe_bool(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw config_error("config key '" + key + "' is not a boolean: " + it->second);
}

std::optional<std::string> Config::maybe_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

void Config::restrict_keys(const std::vector<std::string>& allowed) const {
    for (const auto& [key, value] : values_) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw config_error("unknown config key '" + key + "'");
    }
}

}  // namespace bump::kvconfig
