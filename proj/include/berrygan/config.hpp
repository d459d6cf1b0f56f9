#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace berrygan {

// Plain key = value text with # comments. Lookups fall back to the caller's
// default, so a config file only needs the keys it overrides.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key, const std::string& def) const;
    int get_int(const std::string& key, int def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

    // Overlay other's entries on top of this one.
    Config merged_with(const Config& other) const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace berrygan
