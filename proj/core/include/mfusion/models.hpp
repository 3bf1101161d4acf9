#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mfusion/encoders.hpp"
#include "mfusion/param_store.hpp"
#include "mfusion/tape.hpp"

namespace mfusion::model {

// Three per-modality LSTMs whose per-timestep hidden outputs are
// concatenated, flattened across time, and pushed through a two-layer MLP.
// The final sigmoid does not produce a distribution on its own, so the
// output is renormalized to sum to 1 (keeps the stated layer stack while
// making cross-entropy well defined).
struct FLstmConfig {
    std::size_t gaze_hidden = 10;
    std::size_t lane_hidden = 5;
    std::size_t object_hidden = 10;
    std::size_t mlp_hidden = 100;
    std::size_t n_classes = 5;
    std::size_t seq_len = 150;

    std::size_t concat_dim() const { return gaze_hidden + lane_hidden + object_hidden; }
    std::size_t flatten_dim() const { return seq_len * concat_dim(); }
    std::size_t param_count() const;
};

// Per-modality Linear-ReLU-Linear MLPs to latent widths 32/16/16, sinusoidal
// positional encoding added per modality, concatenated into 150 tokens of
// width 64, one post-norm encoder block (attention + feedforward, residual +
// layer norm around each), flattened to 9600, then an MLP head to softmax.
struct FTfConfig {
    std::size_t gaze_latent = 32;
    std::size_t object_latent = 16;
    std::size_t lane_latent = 16;
    std::size_t n_heads = 4;
    std::size_t head_hidden = 256;
    std::size_t ff_hidden = 256;
    std::size_t n_classes = 5;
    std::size_t seq_len = 150;
    bool use_positional = true;
    // extra trainable linear layer after each modality MLP (off by default;
    // kept as a switch because the two are a defensible reading of the same
    // architecture sketch)
    bool extra_projection = false;

    std::size_t token_dim() const { return gaze_latent + object_latent + lane_latent; }
    std::size_t flatten_dim() const { return seq_len * token_dim(); }
    std::size_t param_count() const;
};

using ModelConfig = std::variant<FLstmConfig, FTfConfig>;

const char* arch_name(const ModelConfig& config);  // "flstm" | "ftf"

struct ModelParams {
    ModelConfig config;
    num::ParamStore store;
    std::uint64_t train_seed = 0;
    // mask the producing run trained under; predict() re-applies it
    std::array<bool, 3> modality_mask = {true, true, true};

    const char* arch() const { return arch_name(config); }
};

// Weights ~ uniform(+-1/sqrt(fan_in)) drawn in a fixed creation order, biases
// zero, layer-norm gain 1 / shift 0. Deterministic per seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Parameter tensors registered as tape leaves, addressed by store path.
struct BoundParams {
    std::map<std::string, num::Value> leaves;

    num::Value at(const std::string& path) const;
};

BoundParams bind_params(num::Tape& tape, const num::ParamStore& store);
// After backward(): store.grad[path] += tape gradient of each leaf.
void accumulate_grads(const num::Tape& tape, const BoundParams& bound, num::ParamStore& store);

struct ForwardTrace {
    num::Value probs;   // (n_classes), sums to 1
    num::Value hidden;  // pre-flatten sequence: (seq_len x concat_dim) hidden
                        // concat for F-LSTM, (seq_len x token_dim) tokens
                        // entering attention for F-TF
};

ForwardTrace flstm_forward(num::Tape& tape, const BoundParams& bound, const FLstmConfig& config,
                           const feat::LabeledSequence& seq);
ForwardTrace ftf_forward(num::Tape& tape, const BoundParams& bound, const FTfConfig& config,
                         const feat::LabeledSequence& seq);
ForwardTrace model_forward(num::Tape& tape, const BoundParams& bound, const ModelParams& params,
                           const feat::LabeledSequence& seq);

// Fresh-tape forward on masked input; no gradients kept.
std::vector<double> predict_probs(const ModelParams& params, const feat::LabeledSequence& seq);
// Same, but binds the parameters once for the whole batch. Callers chunk
// large sets to bound tape memory.
std::vector<std::vector<double>> predict_probs_batch(
    const ModelParams& params, const std::vector<const feat::LabeledSequence*>& seqs);
// (argmax class, probabilities); ties break to the lowest class index.
std::pair<int, std::vector<double>> predict(const ModelParams& params,
                                            const feat::LabeledSequence& seq);
int argmax_class(const std::vector<double>& probs);

// Checkpoint: weight blob at weights_path plus a JSON sidecar
// (weights_path + ".json") carrying arch tag, config, seed, and mask.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& weights_path);
ModelParams load_checkpoint(const std::filesystem::path& weights_path);

}  // namespace mfusion::model
