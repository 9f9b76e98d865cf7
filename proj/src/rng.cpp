#include "noiseproto/rng.hpp"

#include <algorithm>

#include "noiseproto/error.hpp"

namespace noiseproto {

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw config_error("sample_without_replacement: k exceeds population size");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    // Partial Fisher-Yates: first k slots hold the sample.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + index(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    Rng mixer(base ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xbf58476d1ce4e5b9ULL));
    return mixer.next_u64();
}

}  // namespace noiseproto
