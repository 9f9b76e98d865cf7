#include "noiseproto/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noiseproto/error.hpp"
#include "noiseproto/rng.hpp"

namespace noiseproto {

namespace {

constexpr double kNormGuardEps = 1e-12;

double example_weight(std::span<const FeatureSet> classes,
                      std::span<const RelevanceScores> scores, const ExampleRef& ex) {
    const FeatureSet& fs = classes[ex.class_slot];
    if (ex.col < fs.clean_count) return 1.0;
    return scores[ex.class_slot].values[ex.col];
}

Vec normalized(std::span<const double> v) {
    Vec out(v.begin(), v.end());
    const double n = l2_norm(v);
    if (n > kNormGuardEps) {
        for (double& x : out) x /= n;
    }
    return out;
}

}  // namespace

void TrainBatchSpec::validate() const {
    if (batch_size == 0) throw config_error("train spec: batch size must be >= 1");
    if (epochs == 0) throw config_error("train spec: epochs must be >= 1");
    if (weight_decay < 0.0) throw config_error("train spec: weight decay must be >= 0");
    lr.validate();
}

CosineClassifier init_from_prototypes(const Matrix& prototypes,
                                      std::span<const std::uint32_t> class_ids,
                                      double temperature) {
    if (prototypes.cols() < 2) {
        throw config_error("init_from_prototypes: need at least 2 classes");
    }
    if (class_ids.size() != prototypes.cols()) {
        throw shape_error("init_from_prototypes: one class id per prototype required");
    }
    if (!(temperature > 0.0)) {
        throw config_error("init_from_prototypes: temperature must be positive");
    }
    for (std::size_t c = 0; c < prototypes.cols(); ++c) {
        if (l2_norm(prototypes.col_span(c)) < kNormGuardEps) {
            throw numeric_error("init_from_prototypes: zero prototype for class " +
                                std::to_string(class_ids[c]));
        }
    }
    CosineClassifier clf;
    clf.weights = prototypes;
    clf.temperature = temperature;
    clf.class_ids.assign(class_ids.begin(), class_ids.end());
    return clf;
}

std::vector<ExampleRef> all_examples(std::span<const FeatureSet> classes) {
    std::vector<ExampleRef> out;
    for (std::size_t slot = 0; slot < classes.size(); ++slot) {
        for (std::size_t col = 0; col < classes[slot].count(); ++col) {
            out.push_back({static_cast<std::uint32_t>(slot), static_cast<std::uint32_t>(col)});
        }
    }
    return out;
}

CeResult weighted_ce_loss(const CosineClassifier& clf, std::span<const FeatureSet> classes,
                          std::span<const RelevanceScores> scores,
                          std::span<const ExampleRef> examples) {
    if (classes.size() != scores.size()) {
        throw shape_error("weighted_ce_loss: one score vector per class required");
    }
    if (classes.size() != clf.class_count()) {
        throw shape_error("weighted_ce_loss: dataset classes do not match classifier");
    }
    const std::size_t n_classes = clf.class_count();
    const std::size_t d = clf.dim();

    // Per-class weight sums over the examples actually given.
    Vec class_weight(classes.size(), 0.0);
    for (const ExampleRef& ex : examples) {
        class_weight[ex.class_slot] += example_weight(classes, scores, ex);
    }

    Matrix w_hat = l2_normalize_columns(clf.weights);
    Vec w_norm(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) w_norm[c] = l2_norm(clf.weights.col_span(c));

    CeResult out;
    out.grad_weights = Matrix(d, n_classes);
    Matrix grad_what(d, n_classes);  // gradient w.r.t. the normalized columns

    Vec logits(n_classes), probs(n_classes);
    for (const ExampleRef& ex : examples) {
        const double w = example_weight(classes, scores, ex);
        if (w == 0.0 || class_weight[ex.class_slot] == 0.0) continue;
        const double u = w / class_weight[ex.class_slot];

        const Vec v_hat = normalized(classes[ex.class_slot].features.col_span(ex.col));
        double max_logit = -1e300;
        for (std::size_t c = 0; c < n_classes; ++c) {
            logits[c] = clf.temperature * dot(w_hat.col_span(c), v_hat);
            max_logit = std::max(max_logit, logits[c]);
        }
        double z = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            probs[c] = std::exp(logits[c] - max_logit);
            z += probs[c];
        }
        if (!std::isfinite(z) || z <= 0.0) {
            throw numeric_error("weighted_ce_loss: non-finite softmax");
        }
        for (std::size_t c = 0; c < n_classes; ++c) probs[c] /= z;

        const std::size_t target = ex.class_slot;
        out.loss -= u * (logits[target] - max_logit - std::log(z));
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double delta = u * (probs[c] - (c == target ? 1.0 : 0.0)) * clf.temperature;
            axpy(delta, v_hat, grad_what.col_span(c));
        }
    }

    // Pull the gradient back through the column normalization:
    // dL/dw = (I - w_hat w_hat^T) dL/dw_hat / ||w||.
    for (std::size_t c = 0; c < n_classes; ++c) {
        const auto wh = w_hat.col_span(c);
        const auto gh = grad_what.col_span(c);
        const double proj = dot(wh, gh);
        auto gw = out.grad_weights.col_span(c);
        for (std::size_t i = 0; i < d; ++i) {
            gw[i] = (gh[i] - proj * wh[i]) / w_norm[c];
        }
    }
    return out;
}

TrainResult train_classifier(const CosineClassifier& init, std::span<const FeatureSet> classes,
                             std::span<const RelevanceScores> scores,
                             const TrainBatchSpec& spec) {
    spec.validate();
    if (classes.empty()) throw config_error("train_classifier: empty dataset");
    if (classes.size() != init.class_count()) {
        throw shape_error("train_classifier: dataset classes do not match classifier");
    }
    for (std::size_t slot = 0; slot < classes.size(); ++slot) {
        if (scores[slot].size() != classes[slot].count()) {
            throw shape_error("train_classifier: scores do not match class " +
                              std::to_string(classes[slot].class_id));
        }
    }

    TrainResult result;
    result.clf = init;
    std::vector<ExampleRef> examples = all_examples(classes);
    if (examples.empty()) throw config_error("train_classifier: empty dataset");

    result.initial_loss = weighted_ce_loss(result.clf, classes, scores, examples).loss;

    AdamState state(result.clf.weights, "classifier_weights", 0.9, 0.999, 1e-8,
                    spec.weight_decay);
    Rng rng(spec.seed);
    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        const double lr = schedule_rate(spec.lr, epoch);
        rng.shuffle(examples);
        for (std::size_t start = 0; start < examples.size(); start += spec.batch_size) {
            const std::size_t len = std::min(spec.batch_size, examples.size() - start);
            const std::span<const ExampleRef> batch(examples.data() + start, len);
            CeResult ce = weighted_ce_loss(result.clf, classes, scores, batch);
            adam_step(result.clf.weights, ce.grad_weights, state, lr);
        }
        result.clf.weights.require_finite("train_classifier: weights after epoch " +
                                          std::to_string(epoch));
        result.epoch_loss.push_back(
            weighted_ce_loss(result.clf, classes, scores, all_examples(classes)).loss);
    }
    return result;
}

Vec predict_scores(const CosineClassifier& clf, std::span<const double> feature) {
    if (feature.size() != clf.dim()) throw shape_error("predict: feature dimension mismatch");
    const Vec v_hat = normalized(feature);
    Vec out(clf.class_count());
    for (std::size_t c = 0; c < clf.class_count(); ++c) {
        const auto col = clf.weights.col_span(c);
        const double n = l2_norm(col);
        out[c] = n < kNormGuardEps ? 0.0 : clf.temperature * dot(col, v_hat) / n;
    }
    return out;
}

Vec predict_probs(const CosineClassifier& clf, std::span<const double> feature) {
    Vec s = predict_scores(clf, feature);
    const double max_s = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double& x : s) {
        x = std::exp(x - max_s);
        z += x;
    }
    for (double& x : s) x /= z;
    return s;
}

std::vector<std::uint32_t> predict_topk(const CosineClassifier& clf,
                                        std::span<const double> feature, std::size_t topk) {
    if (topk > clf.class_count()) {
        throw config_error("predict_topk: topk exceeds class count");
    }
    const Vec s = predict_scores(clf, feature);
    std::vector<std::size_t> order(clf.class_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s[a] != s[b]) return s[a] > s[b];
        return clf.class_ids[a] < clf.class_ids[b];
    });
    std::vector<std::uint32_t> out(topk);
    for (std::size_t i = 0; i < topk; ++i) out[i] = clf.class_ids[order[i]];
    return out;
}

std::uint32_t prototype_nn_classify(const Matrix& prototypes,
                                    std::span<const std::uint32_t> class_ids,
                                    std::span<const double> feature) {
    if (class_ids.size() != prototypes.cols() || prototypes.cols() == 0) {
        throw shape_error("prototype_nn_classify: one class id per prototype required");
    }
    const double qn = l2_norm(feature);
    if (qn < kNormGuardEps) {
        throw numeric_error("prototype_nn_classify: zero-norm query");
    }
    double best = -2.0;
    std::uint32_t best_id = 0;
    bool first = true;
    for (std::size_t c = 0; c < prototypes.cols(); ++c) {
        const auto p = prototypes.col_span(c);
        const double pn = l2_norm(p);
        if (pn < kNormGuardEps) {
            throw numeric_error("prototype_nn_classify: zero prototype for class " +
                                std::to_string(class_ids[c]));
        }
        const double cosine = dot(p, feature) / (pn * qn);
        if (first || cosine > best || (cosine == best && class_ids[c] < best_id)) {
            best = cosine;
            best_id = class_ids[c];
            first = false;
        }
    }
    return best_id;
}

double topk_accuracy(std::span<const std::vector<std::uint32_t>> predictions,
                     std::span<const std::uint32_t> labels, std::size_t k) {
    if (predictions.size() != labels.size()) {
        throw shape_error("topk_accuracy: predictions/labels length mismatch");
    }
    if (predictions.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& ranked = predictions[i];
        const std::size_t depth = std::min(k, ranked.size());
        for (std::size_t j = 0; j < depth; ++j) {
            if (ranked[j] == labels[i]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace noiseproto
