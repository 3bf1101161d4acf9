#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfusion/dataset.hpp"
#include "mfusion/models.hpp"

namespace mfusion::train {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    std::size_t early_stop_patience = 20;  // 0 disables early stopping
    std::array<bool, 3> modality_mask = {true, true, true};
    // share of sequences held out for validation loss / early stopping;
    // 0 trains on everything with no early stop
    double val_fraction = 0.1;
    // expand every sequence into its 5 zero-padded truncations (30..150
    // frames); the expansion happens after the train/val split so all
    // truncations of one sequence stay on one side
    bool varying_time = false;
};

struct EpochStats {
    double train_loss = 0;
    std::optional<double> val_loss;
};

struct TrainResult {
    model::ModelParams params;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;  // epoch whose weights were kept
    bool early_stopped = false;
};

// Mini-batch Adam on mean cross-entropy. Deterministic per config: shuffle,
// init, and split all derive from config.seed. Restores the best-validation
// weights when a validation split exists. Non-finite loss aborts with
// NumericError.
TrainResult train(const std::vector<feat::LabeledSequence>& training_set,
                  const model::ModelConfig& config, const TrainConfig& train_config);

struct EvalResult {
    std::size_t total = 0;
    double accuracy = 0;
    double macro_f1 = 0;
    // confusion[true][predicted]
    std::array<std::array<std::size_t, feat::kNumClasses>, feat::kNumClasses> confusion{};
    std::array<double, feat::kNumClasses> per_class_accuracy{};  // recall; 0 for absent classes
    std::array<double, feat::kNumClasses> per_class_f1{};        // 0 when precision+recall = 0
};

EvalResult metrics_from_confusion(
    const std::array<std::array<std::size_t, feat::kNumClasses>, feat::kNumClasses>& confusion);
EvalResult evaluate(const model::ModelParams& params,
                    const std::vector<feat::LabeledSequence>& test_set);

// seconds before the maneuver for each entry of feat::kKeepFrames
inline constexpr std::array<int, 5> kSecondsBefore = {5, 4, 3, 2, 1};

enum class TumRule {
    // seconds of the earliest checkpoint from which the prediction is
    // correct at that and every later checkpoint; never stably correct -> 0
    kStableFromEarliest,
    // seconds of the first correct checkpoint regardless of later flips
    kFirstCorrect,
};

struct TumResult {
    std::array<double, 5> checkpoint_accuracy{};  // aligned with feat::kKeepFrames
    double mean_seconds = 0;
    std::vector<double> per_sequence_seconds;
};

// Seconds before the maneuver for one sequence, from its per-checkpoint
// correctness (index-aligned with kSecondsBefore, i.e. 5 s first).
double tum_seconds(const std::array<bool, 5>& correct_at, TumRule rule);

TumResult compute_tum(const model::ModelParams& params,
                      const std::vector<feat::LabeledSequence>& test_set,
                      TumRule rule = TumRule::kStableFromEarliest);

// Expected accuracy of uniform random guessing on these labels, estimated
// with n_draws seeded passes.
double chance_accuracy(const std::vector<int>& labels, std::uint64_t seed,
                       std::size_t n_draws = 1000);
// Accuracy of always predicting the most common class.
double prior_accuracy(const data::DatasetManifest& manifest);

enum class Protocol { kZeroTime, kVaryingTime };

const char* protocol_name(Protocol protocol);

struct FoldReport {
    std::size_t fold = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    EvalResult eval;
    TumResult tum;  // filled under the varying-time protocol
};

struct BenchmarkReport {
    std::string arch;
    Protocol protocol = Protocol::kZeroTime;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::array<bool, 3> modality_mask = {true, true, true};
    std::vector<FoldReport> folds;
    double mean_accuracy = 0, std_accuracy = 0;  // sample stddev across folds
    double mean_macro_f1 = 0, std_macro_f1 = 0;
    // pooled over all folds' test predictions
    std::array<std::array<std::size_t, feat::kNumClasses>, feat::kNumClasses> confusion{};
    std::array<double, feat::kNumClasses> per_class_accuracy{};
    // varying-time only: pooled checkpoint accuracies and mean TUM seconds
    std::array<double, 5> checkpoint_accuracy{};
    double mean_tum_seconds = 0;
};

// Stratified k-fold protocol: fold f trains with seed base.seed + f, folds
// run concurrently (jobs threads, 0 = one per fold), aggregation always
// walks folds in index order so scheduling cannot change the report.
BenchmarkReport run_benchmark(const data::DatasetManifest& manifest,
                              const model::ModelConfig& config, Protocol protocol, std::size_t k,
                              const TrainConfig& base, std::size_t jobs = 0);

struct AblationCell {
    std::string name;  // e.g. "flstm_full"
    std::string arch;
    bool interior_only = false;
    EvalResult eval;
};

struct AblationReport {
    std::uint64_t seed = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::vector<AblationCell> cells;
};

// Modality ablation on one stratified holdout (fold 0 of a 5-fold split):
// both architectures, full modalities vs interior-only (gaze stream alone),
// zero-time protocol, trained concurrently.
AblationReport run_ablation(const data::DatasetManifest& manifest,
                            const model::FLstmConfig& flstm_config,
                            const model::FTfConfig& ftf_config, const TrainConfig& base,
                            std::size_t jobs = 0);

// report writers
std::string eval_json(const EvalResult& result);
std::string benchmark_json(const BenchmarkReport& report);
std::string benchmark_table(const BenchmarkReport& report);
// "seconds_before,accuracy" rows from 5 s down to 1 s
std::string checkpoint_csv(const BenchmarkReport& report);
// self-contained line chart of the checkpoint accuracy profile
std::string checkpoint_svg(const BenchmarkReport& report);
std::string ablation_json(const AblationReport& report);
std::string ablation_table(const AblationReport& report);

}  // namespace mfusion::train
