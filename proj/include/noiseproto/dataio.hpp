#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noiseproto/matrix.hpp"

namespace noiseproto {

// Per-class feature container. Columns are examples; the first clean_count
// columns are the trusted clean set, the rest carry noisy labels.
struct FeatureSet {
    std::uint32_t class_id = 0;
    std::size_t clean_count = 0;  // k
    Matrix features;              // d x N
    // Ground truth for synthetic data: one byte per noisy column,
    // 1 = actually relevant to the class. Empty when unknown.
    std::vector<std::uint8_t> planted_relevant;

    std::size_t dim() const { return features.rows(); }
    std::size_t count() const { return features.cols(); }
    std::size_t noisy_count() const { return count() - clean_count; }

    void validate() const;
};

// Binary container, little-endian, bit-exact round trips:
//   magic "FNP1" | u32 version=1 | u32 d | u32 N | u32 k | u32 class_id |
//   u8 flags_present | d*N float64 column-major | (N-k bytes of 0/1)
void save_features(const std::string& path, const FeatureSet& fs);
FeatureSet load_features(const std::string& path);

// CSV interchange, one row per example: class,id,is_clean,f0..f_{d-1}.
// Rows may arrive in any order; clean rows are placed before noisy ones.
void save_features_csv(const std::string& path, const std::vector<FeatureSet>& sets);
std::vector<FeatureSet> load_features_csv(const std::string& path);

struct SynthSpec {
    std::size_t classes = 5;
    std::size_t dim = 64;
    std::size_t clean_per_class = 5;
    std::size_t noisy_per_class = 200;
    double relevant_fraction = 0.2;  // share of noisy examples near the center
    double sigma_in = 0.05;          // spread of clean/relevant features
    double sigma_out = 0.3;          // spread of distractors
    std::size_t queries_per_class = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthData {
    std::vector<FeatureSet> train;    // k clean + noisy columns, flags set
    std::vector<FeatureSet> queries;  // held-out all-clean sets for evaluation
};

// Per class: a unit center direction; clean and relevant-noisy features are
// center + N(0, sigma_in^2), distractors are a fresh unit direction +
// N(0, sigma_out^2). Every feature is rescaled to unit norm.
SynthData synthesize(const SynthSpec& spec);

struct TrialSpec {
    std::size_t shot = 5;
    std::size_t trials = 5;
    std::uint64_t seed = 0;
};

// One episode: `shot` clean columns sampled without replacement per class
// (trial t draws with seed spec.seed + t) plus all noisy columns.
std::vector<FeatureSet> sample_trial(const std::vector<FeatureSet>& pool, std::size_t shot,
                                     std::uint64_t trial_seed);
std::vector<std::vector<FeatureSet>> sample_trials(const std::vector<FeatureSet>& pool,
                                                   const TrialSpec& spec);

}  // namespace noiseproto
