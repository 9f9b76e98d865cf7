#include "noiseproto/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "noiseproto/error.hpp"
#include "noiseproto/rng.hpp"

namespace noiseproto {

namespace {

constexpr char kMagic[4] = {'F', 'N', 'P', '1'};
constexpr std::uint32_t kVersion = 1;
// Payload guard: u32 dims can describe absurd sizes a real file never has.
constexpr std::uint64_t kMaxElements = 1ULL << 34;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t off = 0;
    const std::string& path;

    void need(std::size_t n, const char* what) const {
        if (off + n > buf.size()) {
            throw io_error(path + ": truncated " + what + " at byte offset " +
                           std::to_string(off));
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
        }
        off += 4;
        return v;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf[off++]);
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i]))
                    << (8 * i);
        }
        off += 8;
        return std::bit_cast<double>(bits);
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error(path + ": write failed");
}

Vec random_unit_direction(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (double& x : v) x = rng.normal();
    const double n = l2_norm(v);
    if (n < 1e-12) return random_unit_direction(rng, dim);
    for (double& x : v) x /= n;
    return v;
}

}  // namespace

void FeatureSet::validate() const {
    if (count() == 0 || dim() == 0) throw config_error("FeatureSet: empty feature matrix");
    if (clean_count > count()) {
        throw config_error("FeatureSet: clean count exceeds example count");
    }
    features.require_finite("FeatureSet class " + std::to_string(class_id));
    if (!planted_relevant.empty() && planted_relevant.size() != noisy_count()) {
        throw config_error("FeatureSet: planted flags must cover exactly the noisy columns");
    }
}

void save_features(const std::string& path, const FeatureSet& fs) {
    fs.validate();
    std::string out;
    out.reserve(25 + fs.features.size() * 8 + fs.planted_relevant.size());
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(fs.dim()));
    put_u32(out, static_cast<std::uint32_t>(fs.count()));
    put_u32(out, static_cast<std::uint32_t>(fs.clean_count));
    put_u32(out, fs.class_id);
    out.push_back(fs.planted_relevant.empty() ? '\0' : '\1');
    for (double x : fs.features.data()) put_f64(out, x);
    for (std::uint8_t f : fs.planted_relevant) out.push_back(static_cast<char>(f ? 1 : 0));
    write_file(path, out);
}

FeatureSet load_features(const std::string& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path};
    r.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw io_error(path + ": bad magic at byte offset 0");
    }
    r.off = 4;
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw io_error(path + ": unsupported version " + std::to_string(version) +
                       " at byte offset 4");
    }
    const std::uint32_t d = r.u32("dim");
    const std::uint32_t n = r.u32("count");
    const std::uint32_t k = r.u32("clean count");
    const std::uint32_t class_id = r.u32("class id");
    const std::uint8_t flags_present = r.u8("flags byte");
    if (d == 0 || n == 0) {
        throw io_error(path + ": zero dimension in header at byte offset 8");
    }
    if (k > n) {
        throw io_error(path + ": clean count exceeds example count at byte offset 16");
    }
    if (static_cast<std::uint64_t>(d) * n > kMaxElements) {
        throw io_error(path + ": dimension overflow at byte offset 8");
    }
    FeatureSet fs;
    fs.class_id = class_id;
    fs.clean_count = k;
    fs.features = Matrix(d, n);
    for (std::size_t i = 0; i < fs.features.size(); ++i) {
        fs.features.data()[i] = r.f64("feature payload");
    }
    if (flags_present) {
        fs.planted_relevant.resize(n - k);
        for (auto& f : fs.planted_relevant) f = r.u8("planted flags");
    }
    if (r.off != buf.size()) {
        throw io_error(path + ": trailing bytes at byte offset " + std::to_string(r.off));
    }
    fs.validate();
    return fs;
}

void save_features_csv(const std::string& path, const std::vector<FeatureSet>& sets) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    char num[64];
    for (const FeatureSet& fs : sets) {
        for (std::size_t j = 0; j < fs.count(); ++j) {
            out << fs.class_id << ',' << j << ',' << (j < fs.clean_count ? 1 : 0);
            for (std::size_t i = 0; i < fs.dim(); ++i) {
                std::snprintf(num, sizeof num, "%.17g", fs.features(i, j));
                out << ',' << num;
            }
            out << '\n';
        }
    }
    if (!out) throw io_error(path + ": write failed");
}

std::vector<FeatureSet> load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open for reading");

    struct Row {
        std::uint64_t id;
        bool clean;
        Vec values;
    };
    std::map<std::uint32_t, std::vector<Row>> by_class;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) {
            throw io_error(path + ": line " + std::to_string(line_no) + ": expected at least 4 columns");
        }
        try {
            Row row;
            const std::uint32_t cls = static_cast<std::uint32_t>(std::stoul(cells[0]));
            row.id = std::stoull(cells[1]);
            row.clean = std::stoi(cells[2]) != 0;
            row.values.reserve(cells.size() - 3);
            for (std::size_t i = 3; i < cells.size(); ++i) row.values.push_back(std::stod(cells[i]));
            by_class[cls].push_back(std::move(row));
        } catch (const std::exception&) {
            throw io_error(path + ": line " + std::to_string(line_no) + ": malformed row");
        }
    }
    std::vector<FeatureSet> sets;
    for (auto& [cls, rows] : by_class) {
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            if (a.clean != b.clean) return a.clean;
            return a.id < b.id;
        });
        const std::size_t d = rows.front().values.size();
        FeatureSet fs;
        fs.class_id = cls;
        fs.features = Matrix(d, rows.size());
        for (std::size_t j = 0; j < rows.size(); ++j) {
            if (rows[j].values.size() != d) {
                throw io_error(path + ": inconsistent feature width in class " +
                               std::to_string(cls));
            }
            if (rows[j].clean) fs.clean_count = j + 1;
            std::copy(rows[j].values.begin(), rows[j].values.end(), fs.features.col(j));
        }
        fs.validate();
        sets.push_back(std::move(fs));
    }
    return sets;
}

void SynthSpec::validate() const {
    if (classes == 0 || dim == 0 || clean_per_class == 0) {
        throw config_error("synth spec: classes, dim and clean-per-class must be >= 1");
    }
    if (relevant_fraction < 0.0 || relevant_fraction > 1.0) {
        throw config_error("synth spec: relevant fraction must be in [0, 1]");
    }
    if (!(sigma_in > 0.0) || !(sigma_out > 0.0)) {
        throw config_error("synth spec: spreads must be positive");
    }
}

SynthData synthesize(const SynthSpec& spec) {
    spec.validate();
    SynthData data;
    data.train.reserve(spec.classes);
    data.queries.reserve(spec.classes);

    for (std::size_t c = 0; c < spec.classes; ++c) {
        Rng rng(derive_seed(spec.seed, c));
        const Vec center = random_unit_direction(rng, spec.dim);

        auto near_center = [&]() {
            Vec v(spec.dim);
            for (std::size_t i = 0; i < spec.dim; ++i) {
                v[i] = center[i] + spec.sigma_in * rng.normal();
            }
            return v;
        };
        auto distractor = [&]() {
            Vec v = random_unit_direction(rng, spec.dim);
            for (std::size_t i = 0; i < spec.dim; ++i) v[i] += spec.sigma_out * rng.normal();
            return v;
        };
        auto place = [&](Matrix& m, std::size_t col, const Vec& v) {
            const double n = std::max(l2_norm(v), 1e-12);
            for (std::size_t i = 0; i < v.size(); ++i) m(i, col) = v[i] / n;
        };

        const std::size_t n_total = spec.clean_per_class + spec.noisy_per_class;
        const std::size_t n_relevant = static_cast<std::size_t>(
            std::llround(spec.relevant_fraction * static_cast<double>(spec.noisy_per_class)));

        FeatureSet train;
        train.class_id = static_cast<std::uint32_t>(c);
        train.clean_count = spec.clean_per_class;
        train.features = Matrix(spec.dim, n_total);
        train.planted_relevant.assign(spec.noisy_per_class, 0);
        for (std::size_t j = 0; j < spec.clean_per_class; ++j) place(train.features, j, near_center());
        for (std::size_t j = 0; j < spec.noisy_per_class; ++j) {
            const bool relevant = j < n_relevant;
            train.planted_relevant[j] = relevant ? 1 : 0;
            place(train.features, spec.clean_per_class + j, relevant ? near_center() : distractor());
        }
        data.train.push_back(std::move(train));

        if (spec.queries_per_class > 0) {
            FeatureSet q;
            q.class_id = static_cast<std::uint32_t>(c);
            q.clean_count = spec.queries_per_class;
            q.features = Matrix(spec.dim, spec.queries_per_class);
            for (std::size_t j = 0; j < spec.queries_per_class; ++j) place(q.features, j, near_center());
            data.queries.push_back(std::move(q));
        }
    }
    return data;
}

std::vector<FeatureSet> sample_trial(const std::vector<FeatureSet>& pool, std::size_t shot,
                                     std::uint64_t trial_seed) {
    if (shot == 0) throw config_error("sample_trial: shot must be >= 1");
    Rng rng(trial_seed);
    std::vector<FeatureSet> episode;
    episode.reserve(pool.size());
    for (const FeatureSet& fs : pool) {
        if (fs.clean_count < shot) {
            throw config_error("sample_trial: class " + std::to_string(fs.class_id) + " has " +
                               std::to_string(fs.clean_count) + " clean examples, need " +
                               std::to_string(shot));
        }
        const auto chosen = rng.sample_without_replacement(fs.clean_count, shot);
        FeatureSet out;
        out.class_id = fs.class_id;
        out.clean_count = shot;
        out.features = Matrix(fs.dim(), shot + fs.noisy_count());
        for (std::size_t j = 0; j < shot; ++j) {
            std::copy_n(fs.features.col(chosen[j]), fs.dim(), out.features.col(j));
        }
        for (std::size_t j = 0; j < fs.noisy_count(); ++j) {
            std::copy_n(fs.features.col(fs.clean_count + j), fs.dim(),
                        out.features.col(shot + j));
        }
        out.planted_relevant = fs.planted_relevant;
        episode.push_back(std::move(out));
    }
    return episode;
}

std::vector<std::vector<FeatureSet>> sample_trials(const std::vector<FeatureSet>& pool,
                                                   const TrialSpec& spec) {
    if (spec.trials == 0) throw config_error("trial spec: trial count must be >= 1");
    std::vector<std::vector<FeatureSet>> out;
    out.reserve(spec.trials);
    for (std::size_t t = 0; t < spec.trials; ++t) {
        out.push_back(sample_trial(pool, spec.shot, spec.seed + t));
    }
    return out;
}

}  // namespace noiseproto
