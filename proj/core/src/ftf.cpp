#include <cmath>

#include "mfusion/errors.hpp"
#include "mfusion/models.hpp"
#include "model_detail.hpp"

namespace mfusion::model {
namespace {

std::size_t mlp_params(std::size_t latent, std::size_t in, bool extra_projection) {
    std::size_t n = latent * in + latent + latent * latent + latent;
    if (extra_projection) n += latent * latent + latent;
    return n;
}

// interleaved sin/cos positional table: row t, column pair (2i, 2i+1) is
// (sin, cos) of t / 10000^(2i/d)
num::Tensor positional_matrix(std::size_t rows, std::size_t d) {
    num::Tensor p({rows, d});
    for (std::size_t t = 0; t < rows; ++t) {
        for (std::size_t i = 0; 2 * i < d; ++i) {
            double freq = std::exp(-std::log(10000.0) * static_cast<double>(2 * i) /
                                   static_cast<double>(d));
            double angle = static_cast<double>(t) * freq;
            p.at(t, 2 * i) = std::sin(angle);
            if (2 * i + 1 < d) p.at(t, 2 * i + 1) = std::cos(angle);
        }
    }
    return p;
}

}  // namespace

std::size_t FTfConfig::param_count() const {
    std::size_t d = token_dim();
    std::size_t mlps = mlp_params(gaze_latent, feat::kGazeDims, extra_projection) +
                       mlp_params(object_latent, feat::kObjectDims, extra_projection) +
                       mlp_params(lane_latent, feat::kLaneDims, extra_projection);
    std::size_t attn = 4 * (d * d + d);
    std::size_t norms = 2 * 2 * d;
    std::size_t ff = ff_hidden * d + ff_hidden + d * ff_hidden + d;
    std::size_t head =
        head_hidden * flatten_dim() + head_hidden + n_classes * head_hidden + n_classes;
    return mlps + attn + norms + ff + head;
}

namespace detail {

void validate(const FTfConfig& config) {
    if (config.gaze_latent == 0 || config.object_latent == 0 || config.lane_latent == 0 ||
        config.head_hidden == 0 || config.ff_hidden == 0 || config.n_classes == 0 ||
        config.seq_len == 0)
        throw ValidationError("ftf config dimensions must be positive");
    if (config.n_heads == 0 || config.token_dim() % config.n_heads != 0)
        throw ValidationError("n_heads must divide token width " +
                              std::to_string(config.token_dim()));
}

void ftf_create_params(num::ParamStore& store, const FTfConfig& config, Rng& rng) {
    auto mlp = [&](const std::string& prefix, std::size_t latent, std::size_t in) {
        store.create(prefix + "_mlp/w1", uniform_init(rng, {latent, in}, in));
        store.create(prefix + "_mlp/b1", num::Tensor({latent}));
        store.create(prefix + "_mlp/w2", uniform_init(rng, {latent, latent}, latent));
        store.create(prefix + "_mlp/b2", num::Tensor({latent}));
        if (config.extra_projection) {
            store.create(prefix + "_proj/w", uniform_init(rng, {latent, latent}, latent));
            store.create(prefix + "_proj/b", num::Tensor({latent}));
        }
    };
    mlp("ftf/gaze", config.gaze_latent, feat::kGazeDims);
    mlp("ftf/object", config.object_latent, feat::kObjectDims);
    mlp("ftf/lane", config.lane_latent, feat::kLaneDims);

    std::size_t d = config.token_dim();
    for (const char* name : {"w_query", "w_key", "w_value", "w_out"}) {
        store.create(std::string("ftf/attn/") + name, uniform_init(rng, {d, d}, d));
    }
    for (const char* name : {"b_query", "b_key", "b_value", "b_out"}) {
        store.create(std::string("ftf/attn/") + name, num::Tensor({d}));
    }
    for (const char* block : {"ftf/ln1", "ftf/ln2"}) {
        num::Tensor gamma({d});
        gamma.fill(1.0);
        store.create(std::string(block) + "/gamma", std::move(gamma));
        store.create(std::string(block) + "/beta", num::Tensor({d}));
    }
    store.create("ftf/ff/w1", uniform_init(rng, {config.ff_hidden, d}, d));
    store.create("ftf/ff/b1", num::Tensor({config.ff_hidden}));
    store.create("ftf/ff/w2", uniform_init(rng, {d, config.ff_hidden}, config.ff_hidden));
    store.create("ftf/ff/b2", num::Tensor({d}));
    store.create("ftf/head/w1",
                 uniform_init(rng, {config.head_hidden, config.flatten_dim()},
                              config.flatten_dim()));
    store.create("ftf/head/b1", num::Tensor({config.head_hidden}));
    store.create("ftf/head/w2",
                 uniform_init(rng, {config.n_classes, config.head_hidden}, config.head_hidden));
    store.create("ftf/head/b2", num::Tensor({config.n_classes}));
}

}  // namespace detail

ForwardTrace ftf_forward(num::Tape& tape, const BoundParams& bound, const FTfConfig& config,
                         const feat::LabeledSequence& seq) {
    detail::validate(config);
    if (seq.frames.size() != config.seq_len)
        throw ValidationError("ftf_forward: expected " + std::to_string(config.seq_len) +
                              " frames, got " + std::to_string(seq.frames.size()));

    auto modality_input = [&](std::size_t off, std::size_t n) {
        num::Tensor x({config.seq_len, n});
        for (std::size_t t = 0; t < config.seq_len; ++t) {
            for (std::size_t i = 0; i < n; ++i) x.at(t, i) = seq.frames[t][off + i];
        }
        return tape.constant(std::move(x));
    };
    auto encode = [&](const std::string& prefix, std::size_t off, std::size_t n,
                      std::size_t latent) {
        num::Value x = modality_input(off, n);
        num::Value h = tape.relu(
            tape.linear_rows(x, bound.at(prefix + "_mlp/w1"), bound.at(prefix + "_mlp/b1")));
        num::Value z =
            tape.linear_rows(h, bound.at(prefix + "_mlp/w2"), bound.at(prefix + "_mlp/b2"));
        if (config.extra_projection) {
            z = tape.linear_rows(z, bound.at(prefix + "_proj/w"), bound.at(prefix + "_proj/b"));
        }
        if (config.use_positional) {
            z = tape.add(z, tape.constant(positional_matrix(config.seq_len, latent)));
        }
        return z;
    };

    num::Value tokens = tape.concat_cols(
        {encode("ftf/gaze", feat::kGazeOffset, feat::kGazeDims, config.gaze_latent),
         encode("ftf/object", feat::kObjectOffset, feat::kObjectDims, config.object_latent),
         encode("ftf/lane", feat::kLaneOffset, feat::kLaneDims, config.lane_latent)});

    num::AttentionParams attn{bound.at("ftf/attn/w_query"), bound.at("ftf/attn/w_key"),
                              bound.at("ftf/attn/w_value"), bound.at("ftf/attn/w_out"),
                              bound.at("ftf/attn/b_query"), bound.at("ftf/attn/b_key"),
                              bound.at("ftf/attn/b_value"), bound.at("ftf/attn/b_out")};
    num::Value attended = tape.self_attention(tokens, attn, config.n_heads).out;
    num::Value x1 = tape.layer_norm_rows(tape.add(tokens, attended), bound.at("ftf/ln1/gamma"),
                                         bound.at("ftf/ln1/beta"));
    num::Value ff = tape.linear_rows(
        tape.relu(tape.linear_rows(x1, bound.at("ftf/ff/w1"), bound.at("ftf/ff/b1"))),
        bound.at("ftf/ff/w2"), bound.at("ftf/ff/b2"));
    num::Value x2 = tape.layer_norm_rows(tape.add(x1, ff), bound.at("ftf/ln2/gamma"),
                                         bound.at("ftf/ln2/beta"));

    num::Value flat = tape.reshape(x2, {config.flatten_dim()});
    num::Value h = tape.relu(tape.linear(flat, bound.at("ftf/head/w1"), bound.at("ftf/head/b1")));
    num::Value logits = tape.linear(h, bound.at("ftf/head/w2"), bound.at("ftf/head/b2"));
    return {tape.softmax(logits), tokens};
}

}  // namespace mfusion::model
