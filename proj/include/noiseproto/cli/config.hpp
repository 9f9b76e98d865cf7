#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace noiseproto::cli {

struct KeySpec {
    std::string name;           // kebab-case, doubles as the CLI flag name
    std::string default_value;  // empty string means "no default, optional"
    std::string help;
};

struct ConfigEntry {
    std::string value;
    std::string source;  // "default" | "file" | "manifest" | "flag"
};

// Resolved key/value configuration with source tracking. Precedence:
// flag > config file > manifest > built-in default.
class Config {
public:
    explicit Config(std::vector<KeySpec> schema);

    void apply_file(const std::string& path);
    void apply_values(const std::map<std::string, std::string>& values,
                      const std::string& source);

    bool known(const std::string& key) const;
    bool has(const std::string& key) const;  // present with non-empty value

    std::string str(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::uint64_t unsigned_integer(const std::string& key) const;
    double number(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<double> number_list(const std::string& key) const;

    const std::map<std::string, ConfigEntry>& entries() const { return entries_; }
    const std::vector<KeySpec>& schema() const { return schema_; }

private:
    const KeySpec& spec_for(const std::string& key) const;

    std::vector<KeySpec> schema_;
    std::map<std::string, ConfigEntry> entries_;
};

}  // namespace noiseproto::cli
