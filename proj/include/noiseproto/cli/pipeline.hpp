#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "noiseproto/classifier.hpp"
#include "noiseproto/cleaner.hpp"
#include "noiseproto/dataio.hpp"

namespace noiseproto::cli {

enum class Scorer { gcn, beta_weighting, similarity, clean_only };

Scorer parse_scorer(const std::string& name);

struct PipelineOptions {
    Scorer scorer = Scorer::gcn;
    bool prototype_nn = false;  // rank by prototypes instead of a trained classifier
    CleanerConfig cleaner;
    double beta_weight = 1.0;  // constant score for the beta-weighting scorer
    std::size_t k_neighbors = 10;
    double temperature = 15.0;
    TrainBatchSpec train;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
};

// Runs fn(0..count-1) on a small thread pool; any exception is rethrown on
// the calling thread after all workers join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

RelevanceScores score_class(const FeatureSet& fs, const PipelineOptions& opts,
                            std::uint64_t seed);

// Unified prototype for one scored class, honoring the configured grouping.
// `seed` feeds the clustering when grouping is feature_kmeans; pass the same
// seed the scorer ran with so exported groups match the training groups.
HybridPrototypes class_prototypes(const FeatureSet& fs, const RelevanceScores& scores,
                                  const PipelineOptions& opts, std::uint64_t seed);

struct TrialResult {
    double top1 = 0.0;
    double top5 = 0.0;
};

// One episode: score every class, build prototypes, optionally train the
// cosine classifier, evaluate on the query sets.
TrialResult run_trial(const std::vector<FeatureSet>& train_sets,
                      const std::vector<FeatureSet>& queries, const PipelineOptions& opts,
                      std::uint64_t trial_index);

struct ShotSummary {
    std::size_t shot = 0;
    std::vector<TrialResult> trials;
    double top1_mean = 0.0;
    double top1_std = 0.0;  // sample standard deviation
    double top5_mean = 0.0;
    double top5_std = 0.0;
};

ShotSummary evaluate_shot(const std::vector<FeatureSet>& pool,
                          const std::vector<FeatureSet>& queries, const PipelineOptions& opts,
                          std::size_t shot, std::size_t trials);

TrialResult evaluate_classifier(const CosineClassifier& clf,
                                const std::vector<FeatureSet>& queries);

}  // namespace noiseproto::cli
