#include "noiseproto/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "noiseproto/error.hpp"

namespace noiseproto::cli {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config::Config(std::vector<KeySpec> schema) : schema_(std::move(schema)) {
    for (const KeySpec& spec : schema_) {
        entries_[spec.name] = ConfigEntry{spec.default_value, "default"};
    }
}

void Config::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open config file");
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::string> values;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ": line " + std::to_string(line_no) +
                               ": expected key=value");
        }
        values[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
    }
    apply_values(values, "file");
}

void Config::apply_values(const std::map<std::string, std::string>& values,
                          const std::string& source) {
    for (const auto& [key, value] : values) {
        if (!known(key)) {
            throw config_error("unknown config key '" + key + "'");
        }
        entries_[key] = ConfigEntry{value, source};
    }
}

bool Config::known(const std::string& key) const {
    return std::any_of(schema_.begin(), schema_.end(),
                       [&](const KeySpec& s) { return s.name == key; });
}

bool Config::has(const std::string& key) const {
    const auto it = entries_.find(key);
    return it != entries_.end() && !it->second.value.empty();
}

const KeySpec& Config::spec_for(const std::string& key) const {
    for (const KeySpec& spec : schema_) {
        if (spec.name == key) return spec;
    }
    throw config_error("unknown config key '" + key + "'");
}

std::string Config::str(const std::string& key) const {
    spec_for(key);
    return entries_.at(key).value;
}

std::int64_t Config::integer(const std::string& key) const {
    const std::string v = str(key);
    try {
        std::size_t used = 0;
        const std::int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

std::uint64_t Config::unsigned_integer(const std::string& key) const {
    const std::string v = str(key);
    try {
        std::size_t used = 0;
        const std::uint64_t out = std::stoull(v, &used);
        if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected unsigned integer, got '" + v +
                           "'");
    }
}

double Config::number(const std::string& key) const {
    const std::string v = str(key);
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool Config::boolean(const std::string& key) const {
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<double> Config::number_list(const std::string& key) const {
    const std::string v = str(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "': expected comma-separated numbers, got '" +
                               v + "'");
        }
    }
    return out;
}

}  // namespace noiseproto::cli
