#include <algorithm>

#include "mfusion/errors.hpp"
#include "mfusion/rng.hpp"
#include "mfusion/train.hpp"

namespace mfusion::train {
namespace {

constexpr std::size_t kEvalChunk = 32;  // sequences per tape when predicting

}

EvalResult metrics_from_confusion(
    const std::array<std::array<std::size_t, feat::kNumClasses>, feat::kNumClasses>& confusion) {
    EvalResult r;
    r.confusion = confusion;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < feat::kNumClasses; ++c) {
        correct += confusion[c][c];
        for (std::size_t p = 0; p < feat::kNumClasses; ++p) r.total += confusion[c][p];
    }
    if (r.total > 0) r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
    double f1_sum = 0;
    for (std::size_t c = 0; c < feat::kNumClasses; ++c) {
        std::size_t tp = confusion[c][c];
        std::size_t actual = 0, predicted = 0;
        for (std::size_t j = 0; j < feat::kNumClasses; ++j) {
            actual += confusion[c][j];
            predicted += confusion[j][c];
        }
        double recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        double precision =
            predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        r.per_class_accuracy[c] = recall;
        r.per_class_f1[c] = precision + recall > 0
                                ? 2.0 * precision * recall / (precision + recall)
                                : 0.0;
        f1_sum += r.per_class_f1[c];
    }
    r.macro_f1 = f1_sum / static_cast<double>(feat::kNumClasses);
    return r;
}

EvalResult evaluate(const model::ModelParams& params,
                    const std::vector<feat::LabeledSequence>& test_set) {
    if (test_set.empty()) throw ValidationError("test set is empty");
    std::array<std::array<std::size_t, feat::kNumClasses>, feat::kNumClasses> confusion{};
    for (std::size_t c0 = 0; c0 < test_set.size(); c0 += kEvalChunk) {
        std::size_t n = std::min(kEvalChunk, test_set.size() - c0);
        std::vector<const feat::LabeledSequence*> chunk;
        chunk.reserve(n);
        for (std::size_t j = 0; j < n; ++j) chunk.push_back(&test_set[c0 + j]);
        std::vector<std::vector<double>> probs = model::predict_probs_batch(params, chunk);
        for (std::size_t j = 0; j < n; ++j) {
            int label = test_set[c0 + j].label;
            if (label < 0 || label >= static_cast<int>(feat::kNumClasses))
                throw ValidationError("test label out of range: " + std::to_string(label));
            int pred = model::argmax_class(probs[j]);
            confusion[static_cast<std::size_t>(label)][static_cast<std::size_t>(pred)] += 1;
        }
    }
    return metrics_from_confusion(confusion);
}

double chance_accuracy(const std::vector<int>& labels, std::uint64_t seed, std::size_t n_draws) {
    if (labels.empty()) throw ValidationError("chance_accuracy: no labels");
    if (n_draws == 0) throw ValidationError("chance_accuracy: n_draws must be positive");
    Rng rng(seed);
    std::size_t hits = 0;
    for (std::size_t d = 0; d < n_draws; ++d) {
        for (int label : labels) {
            hits += rng.uniform_int(feat::kNumClasses) == static_cast<std::uint64_t>(label);
        }
    }
    return static_cast<double>(hits) / static_cast<double>(n_draws * labels.size());
}

double prior_accuracy(const data::DatasetManifest& manifest) {
    if (manifest.sequences.empty()) throw ValidationError("prior_accuracy: empty manifest");
    std::size_t majority = 0, total = 0;
    for (int count : manifest.class_counts) {
        majority = std::max(majority, static_cast<std::size_t>(count));
        total += static_cast<std::size_t>(count);
    }
    return static_cast<double>(majority) / static_cast<double>(total);
}

}  // namespace mfusion::train
