#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace pgat {

// Flat `key = value` config text: one pair per line, '#' starts a comment.
// Unknown keys are rejected by the typed consumers for reproducibility.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    std::int64_t get_int(const std::string& key, std::int64_t fallback);
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);

    // Throws ConfigError if any key was never read through a getter.
    void reject_unknown_keys() const;

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

} // namespace pgat
