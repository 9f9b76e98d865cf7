#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "noiseproto/dataio.hpp"
#include "noiseproto/matrix.hpp"
#include "noiseproto/optim.hpp"
#include "noiseproto/scores.hpp"

namespace noiseproto {

// Temperature-scaled cosine classifier. Predictions always use
// l2-normalized weight columns and features.
struct CosineClassifier {
    Matrix weights;  // d x C
    double temperature = 15.0;
    std::vector<std::uint32_t> class_ids;

    std::size_t class_count() const { return weights.cols(); }
    std::size_t dim() const { return weights.rows(); }
};

struct TrainBatchSpec {
    std::size_t batch_size = 512;
    std::size_t epochs = 50;
    LrSchedule lr = LrSchedule::cosine(0.1, 0.001, 50);  // advanced once per epoch
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Weight columns are set to the prototypes as given (prediction normalizes).
CosineClassifier init_from_prototypes(const Matrix& prototypes,
                                      std::span<const std::uint32_t> class_ids,
                                      double temperature = 15.0);

// One training example: column `col` of dataset class slot `class_slot`.
// Clean columns weigh 1, noisy columns weigh their relevance score.
struct ExampleRef {
    std::uint32_t class_slot = 0;
    std::uint32_t col = 0;
};

std::vector<ExampleRef> all_examples(std::span<const FeatureSet> classes);

struct CeResult {
    double loss = 0.0;
    Matrix grad_weights;
};

// Relevance-weighted softmax cross entropy over the given examples. Each
// class's terms are normalized by that class's weight sum *within the given
// example set*, so full-set calls recover the per-class normalizer exactly
// and minibatch calls are the matching stochastic estimate.
CeResult weighted_ce_loss(const CosineClassifier& clf, std::span<const FeatureSet> classes,
                          std::span<const RelevanceScores> scores,
                          std::span<const ExampleRef> examples);

struct TrainResult {
    CosineClassifier clf;
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;  // full-set loss after each epoch
};

TrainResult train_classifier(const CosineClassifier& init, std::span<const FeatureSet> classes,
                             std::span<const RelevanceScores> scores,
                             const TrainBatchSpec& spec);

// Temperature-scaled cosine scores against every class, untransformed.
Vec predict_scores(const CosineClassifier& clf, std::span<const double> feature);
Vec predict_probs(const CosineClassifier& clf, std::span<const double> feature);

// Class ids ranked by score descending; ties break toward the smaller id.
std::vector<std::uint32_t> predict_topk(const CosineClassifier& clf,
                                        std::span<const double> feature, std::size_t topk);

// Nearest prototype by cosine similarity; ties break toward the smaller id.
std::uint32_t prototype_nn_classify(const Matrix& prototypes,
                                    std::span<const std::uint32_t> class_ids,
                                    std::span<const double> feature);

// Fraction of queries whose label appears in the first k ranked entries.
double topk_accuracy(std::span<const std::vector<std::uint32_t>> predictions,
                     std::span<const std::uint32_t> labels, std::size_t k);

}  // namespace noiseproto
