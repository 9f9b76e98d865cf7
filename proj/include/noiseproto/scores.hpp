#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace noiseproto {

// Per-example class relevance. The first clean_count entries belong to the
// trusted examples; the rest are scores for the noisy ones. Values live
// strictly inside (0, 1).
struct RelevanceScores {
    std::vector<double> values;
    std::size_t clean_count = 0;

    std::size_t size() const { return values.size(); }
    std::size_t noisy_count() const { return values.size() - clean_count; }
    std::span<const double> noisy() const {
        return {values.data() + clean_count, noisy_count()};
    }

    double mean_clean() const;
    double mean_noisy() const;
    void validate() const;  // throws on out-of-range entries
};

void save_scores_csv(const std::string& path, const RelevanceScores& scores);
RelevanceScores load_scores_csv(const std::string& path);

}  // namespace noiseproto
