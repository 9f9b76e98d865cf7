#include "noiseproto/cli/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "noiseproto/error.hpp"
#include "noiseproto/graph.hpp"
#include "noiseproto/rng.hpp"

namespace noiseproto::cli {

Scorer parse_scorer(const std::string& name) {
    if (name == "gcn") return Scorer::gcn;
    if (name == "beta") return Scorer::beta_weighting;
    if (name == "similarity") return Scorer::similarity;
    if (name == "clean-only") return Scorer::clean_only;
    throw config_error("unknown scorer '" + name + "' (expected gcn|beta|similarity|clean-only)");
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(workers, count);
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

RelevanceScores score_class(const FeatureSet& fs, const PipelineOptions& opts,
                            std::uint64_t seed) {
    switch (opts.scorer) {
        case Scorer::beta_weighting:
            return beta_weighting_scores(fs, opts.beta_weight);
        case Scorer::similarity:
            return similarity_scores(fs);
        case Scorer::clean_only:
            throw contract_error("score_class: clean-only pipeline has no scores");
        case Scorer::gcn:
            break;
    }
    if (opts.k_neighbors >= fs.count()) {
        throw config_error("k-neighbors must be below the class example count (class " +
                           std::to_string(fs.class_id) + " has " + std::to_string(fs.count()) +
                           " examples)");
    }
    const AffinityGraph graph = normalize_adjacency(build_affinity(fs, opts.k_neighbors));
    CleanerConfig cfg = opts.cleaner;
    cfg.seed = seed;
    return train_cleaner(fs, graph, cfg).scores;
}

HybridPrototypes class_prototypes(const FeatureSet& fs, const RelevanceScores& scores,
                                  const PipelineOptions& opts, std::uint64_t seed) {
    if (opts.cleaner.grouping == NoiseGrouping::feature_kmeans && fs.noisy_count() > 0) {
        const KmeansResult km = kmeans_noisy_features(fs, opts.cleaner.windows, seed);
        return unified_prototype_grouped(fs, scores, km.assignment, opts.cleaner.windows);
    }
    return unified_prototype(fs, scores, opts.cleaner.windows);
}

namespace {

Vec clean_mean(const FeatureSet& fs) {
    Vec mean(fs.dim(), 0.0);
    for (std::size_t j = 0; j < fs.clean_count; ++j) axpy(1.0, fs.features.col_span(j), mean);
    const double inv = 1.0 / static_cast<double>(fs.clean_count);
    for (double& x : mean) x *= inv;
    return mean;
}

}  // namespace

TrialResult run_trial(const std::vector<FeatureSet>& train_sets,
                      const std::vector<FeatureSet>& queries, const PipelineOptions& opts,
                      std::uint64_t trial_index) {
    if (train_sets.size() < 2) throw config_error("run_trial: need at least 2 classes");

    const std::size_t n_classes = train_sets.size();
    Matrix prototypes(train_sets.front().dim(), n_classes);
    std::vector<std::uint32_t> class_ids(n_classes);
    std::vector<RelevanceScores> scores(n_classes);

    parallel_for(n_classes, opts.workers, [&](std::size_t slot) {
        const FeatureSet& fs = train_sets[slot];
        class_ids[slot] = fs.class_id;
        Vec unified;
        if (opts.scorer == Scorer::clean_only) {
            unified = clean_mean(fs);
        } else {
            const std::uint64_t seed = derive_seed(opts.seed, trial_index, slot);
            scores[slot] = score_class(fs, opts, seed);
            unified = class_prototypes(fs, scores[slot], opts, seed).unified;
        }
        std::copy(unified.begin(), unified.end(), prototypes.col(slot));
    });

    CosineClassifier clf = init_from_prototypes(prototypes, class_ids, opts.temperature);
    if (!opts.prototype_nn && opts.scorer != Scorer::clean_only) {
        TrainBatchSpec spec = opts.train;
        spec.seed = derive_seed(opts.seed, trial_index, 0xC1F5);
        clf = train_classifier(clf, train_sets, scores, spec).clf;
    }
    return evaluate_classifier(clf, queries);
}

TrialResult evaluate_classifier(const CosineClassifier& clf,
                                const std::vector<FeatureSet>& queries) {
    const std::size_t depth = std::min<std::size_t>(5, clf.class_count());
    std::size_t total = 0, top1_hits = 0, top5_hits = 0;
    for (const FeatureSet& q : queries) {
        for (std::size_t j = 0; j < q.count(); ++j) {
            const auto ranked = predict_topk(clf, q.features.col_span(j), depth);
            ++total;
            if (ranked.front() == q.class_id) ++top1_hits;
            for (std::uint32_t id : ranked) {
                if (id == q.class_id) {
                    ++top5_hits;
                    break;
                }
            }
        }
    }
    if (total == 0) throw config_error("evaluate_classifier: no query examples");
    TrialResult result;
    result.top1 = static_cast<double>(top1_hits) / static_cast<double>(total);
    result.top5 = static_cast<double>(top5_hits) / static_cast<double>(total);
    return result;
}

ShotSummary evaluate_shot(const std::vector<FeatureSet>& pool,
                          const std::vector<FeatureSet>& queries, const PipelineOptions& opts,
                          std::size_t shot, std::size_t trials) {
    TrialSpec trial_spec;
    trial_spec.shot = shot;
    trial_spec.trials = trials;
    trial_spec.seed = opts.seed;
    const auto episodes = sample_trials(pool, trial_spec);

    ShotSummary summary;
    summary.shot = shot;
    summary.trials.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        summary.trials.push_back(run_trial(episodes[t], queries, opts, t));
    }

    auto mean_of = [&](auto get) {
        double acc = 0.0;
        for (const TrialResult& tr : summary.trials) acc += get(tr);
        return acc / static_cast<double>(summary.trials.size());
    };
    auto std_of = [&](auto get, double mean) {
        if (summary.trials.size() < 2) return 0.0;
        double acc = 0.0;
        for (const TrialResult& tr : summary.trials) {
            const double d = get(tr) - mean;
            acc += d * d;
        }
        return std::sqrt(acc / static_cast<double>(summary.trials.size() - 1));
    };
    summary.top1_mean = mean_of([](const TrialResult& tr) { return tr.top1; });
    summary.top5_mean = mean_of([](const TrialResult& tr) { return tr.top5; });
    summary.top1_std = std_of([](const TrialResult& tr) { return tr.top1; }, summary.top1_mean);
    summary.top5_std = std_of([](const TrialResult& tr) { return tr.top5; }, summary.top5_mean);
    return summary;
}

}  // namespace noiseproto::cli
