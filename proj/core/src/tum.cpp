#include <algorithm>

#include "mfusion/errors.hpp"
#include "mfusion/train.hpp"

namespace mfusion::train {

double tum_seconds(const std::array<bool, 5>& correct_at, TumRule rule) {
    double seconds = 0;
    if (rule == TumRule::kStableFromEarliest) {
        // earliest checkpoint from which every later checkpoint is also
        // correct; requires correctness at the final (1 s) checkpoint
        for (std::size_t j = correct_at.size(); j-- > 0;) {
            if (!correct_at[j]) break;
            seconds = kSecondsBefore[j];
        }
    } else {
        for (std::size_t j = 0; j < correct_at.size(); ++j) {
            if (correct_at[j]) {
                seconds = kSecondsBefore[j];
                break;
            }
        }
    }
    return seconds;
}

TumResult compute_tum(const model::ModelParams& params,
                      const std::vector<feat::LabeledSequence>& test_set, TumRule rule) {
    if (test_set.empty()) throw ValidationError("compute_tum: test set is empty");
    const std::size_t n = test_set.size();
    constexpr std::size_t kChunk = 32;

    // correct[j][i]: prediction right for sequence i when only the first
    // kKeepFrames[j] frames are visible
    std::array<std::vector<bool>, 5> correct;
    TumResult result;
    for (std::size_t j = 0; j < feat::kKeepFrames.size(); ++j) {
        correct[j].assign(n, false);
        std::size_t hits = 0;
        for (std::size_t c0 = 0; c0 < n; c0 += kChunk) {
            std::size_t m = std::min(kChunk, n - c0);
            std::vector<feat::LabeledSequence> truncated;
            truncated.reserve(m);
            for (std::size_t i = 0; i < m; ++i) {
                truncated.push_back(feat::truncate_and_pad(test_set[c0 + i], feat::kKeepFrames[j]));
            }
            std::vector<const feat::LabeledSequence*> ptrs;
            ptrs.reserve(m);
            for (const feat::LabeledSequence& s : truncated) ptrs.push_back(&s);
            std::vector<std::vector<double>> probs = model::predict_probs_batch(params, ptrs);
            for (std::size_t i = 0; i < m; ++i) {
                bool ok = model::argmax_class(probs[i]) == test_set[c0 + i].label;
                correct[j][c0 + i] = ok;
                hits += ok;
            }
        }
        result.checkpoint_accuracy[j] = static_cast<double>(hits) / static_cast<double>(n);
    }

    result.per_sequence_seconds.resize(n, 0.0);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::array<bool, 5> correct_at{};
        for (std::size_t j = 0; j < correct_at.size(); ++j) correct_at[j] = correct[j][i];
        double seconds = tum_seconds(correct_at, rule);
        result.per_sequence_seconds[i] = seconds;
        sum += seconds;
    }
    result.mean_seconds = sum / static_cast<double>(n);
    return result;
}

}  // namespace mfusion::train
