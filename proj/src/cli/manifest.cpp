#include "noiseproto/cli/manifest.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "noiseproto/error.hpp"

namespace noiseproto::cli {

namespace {

// Compact SHA-1, sufficient for content fingerprints in manifests.
class Sha1 {
public:
    void update(const unsigned char* data, std::size_t len) {
        total_ += len;
        while (len > 0) {
            const std::size_t take = std::min(len, std::size_t{64} - fill_);
            std::copy_n(data, take, block_.data() + fill_);
            fill_ += take;
            data += take;
            len -= take;
            if (fill_ == 64) {
                process();
                fill_ = 0;
            }
        }
    }

    std::string hex_digest() {
        const std::uint64_t bits = total_ * 8;
        const unsigned char pad = 0x80;
        update(&pad, 1);
        const unsigned char zero = 0x00;
        while (fill_ != 56) update(&zero, 1);
        std::array<unsigned char, 8> len_bytes{};
        for (int i = 0; i < 8; ++i) {
            len_bytes[i] = static_cast<unsigned char>((bits >> (56 - 8 * i)) & 0xff);
        }
        update(len_bytes.data(), 8);

        char out[41];
        for (int i = 0; i < 5; ++i) std::snprintf(out + 8 * i, 9, "%08x", h_[i]);
        return std::string(out, 40);
    }

private:
    static std::uint32_t rol(std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

    void process() {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i) {
            w[i] = (static_cast<std::uint32_t>(block_[4 * i]) << 24) |
                   (static_cast<std::uint32_t>(block_[4 * i + 1]) << 16) |
                   (static_cast<std::uint32_t>(block_[4 * i + 2]) << 8) |
                   static_cast<std::uint32_t>(block_[4 * i + 3]);
        }
        for (int i = 16; i < 80; ++i) {
            w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        }
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5a827999;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ed9eba1;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8f1bbcdc;
            } else {
                f = b ^ c ^ d;
                k = 0xca62c1d6;
            }
            const std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = tmp;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
    }

    std::array<std::uint32_t, 5> h_{0x67452301, 0xefcdab89, 0x98badcfe, 0x10325476, 0xc3d2e1f0};
    std::array<unsigned char, 64> block_{};
    std::size_t fill_ = 0;
    std::uint64_t total_ = 0;
};

}  // namespace

std::string git_blob_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open for hashing");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();

    Sha1 sha;
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    sha.update(reinterpret_cast<const unsigned char*>(header.data()), header.size());
    sha.update(reinterpret_cast<const unsigned char*>(content.data()), content.size());
    return sha.hex_digest();
}

void write_json_atomic(const std::string& path, const nlohmann::json& j) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error(tmp + ": cannot open for writing");
        out << j.dump(2) << '\n';
        if (!out) throw io_error(tmp + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error(path + ": atomic rename failed: " + ec.message());
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error(path + ": " + e.what());
    }
    return j;
}

ManifestWriter::ManifestWriter(std::string command, const Config& config) {
    doc_["command"] = std::move(command);
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, entry] : config.entries()) {
        cfg[key] = {{"value", entry.value}, {"source", entry.source}};
    }
    doc_["config"] = std::move(cfg);
    doc_["inputs"] = nlohmann::json::object();
    doc_["outputs"] = nlohmann::json::array();
    doc_["timings_ms"] = nlohmann::json::object();
    doc_["metrics"] = nlohmann::json::object();
}

void ManifestWriter::add_input(const std::string& path) {
    doc_["inputs"][path] = git_blob_hash(path);
}

void ManifestWriter::add_output(const std::string& path) { doc_["outputs"].push_back(path); }

void ManifestWriter::set_metrics(const nlohmann::json& metrics) { doc_["metrics"] = metrics; }

void ManifestWriter::stage_begin(const std::string& name) {
    open_stages_[name] = std::chrono::steady_clock::now();
}

void ManifestWriter::stage_end(const std::string& name) {
    const auto it = open_stages_.find(name);
    if (it == open_stages_.end()) throw contract_error("stage_end without stage_begin: " + name);
    const auto elapsed = std::chrono::steady_clock::now() - it->second;
    doc_["timings_ms"][name] =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
    open_stages_.erase(it);
}

void ManifestWriter::write(const std::string& path) const { write_json_atomic(path, doc_); }

std::map<std::string, std::string> manifest_config_values(const nlohmann::json& manifest) {
    if (!manifest.contains("config") || !manifest["config"].is_object()) {
        throw io_error("manifest has no config object");
    }
    std::map<std::string, std::string> values;
    for (const auto& [key, entry] : manifest["config"].items()) {
        values[key] = entry.at("value").get<std::string>();
    }
    return values;
}

}  // namespace noiseproto::cli
