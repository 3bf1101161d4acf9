#include <cmath>

#include "json.hpp"
#include "mfusion/errors.hpp"
#include "mfusion/io_util.hpp"
#include "mfusion/models.hpp"
#include "model_detail.hpp"

using json = nlohmann::json;

namespace mfusion::model {

namespace detail {

num::Tensor uniform_init(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
    num::Tensor t(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

}  // namespace detail

const char* arch_name(const ModelConfig& config) {
    return std::holds_alternative<FLstmConfig>(config) ? "flstm" : "ftf";
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams params;
    params.config = config;
    Rng rng(seed);
    if (const auto* c = std::get_if<FLstmConfig>(&config)) {
        detail::validate(*c);
        detail::flstm_create_params(params.store, *c, rng);
    } else {
        const auto& tc = std::get<FTfConfig>(config);
        detail::validate(tc);
        detail::ftf_create_params(params.store, tc, rng);
    }
    return params;
}

num::Value BoundParams::at(const std::string& path) const {
    auto it = leaves.find(path);
    if (it == leaves.end()) throw ValidationError("unbound parameter: " + path);
    return it->second;
}

BoundParams bind_params(num::Tape& tape, const num::ParamStore& store) {
    BoundParams bound;
    for (const auto& [path, slot] : store) {
        bound.leaves.emplace(path, tape.leaf(slot.value));
    }
    return bound;
}

void accumulate_grads(const num::Tape& tape, const BoundParams& bound, num::ParamStore& store) {
    for (const auto& [path, leaf] : bound.leaves) {
        const num::Tensor& g = tape.grad(leaf);
        if (!g.empty()) store.grad(path) += g;
    }
}

ForwardTrace model_forward(num::Tape& tape, const BoundParams& bound, const ModelParams& params,
                           const feat::LabeledSequence& seq) {
    if (const auto* c = std::get_if<FLstmConfig>(&params.config)) {
        return flstm_forward(tape, bound, *c, seq);
    }
    return ftf_forward(tape, bound, std::get<FTfConfig>(params.config), seq);
}

std::vector<double> predict_probs(const ModelParams& params, const feat::LabeledSequence& seq) {
    return predict_probs_batch(params, {&seq}).front();
}

std::vector<std::vector<double>> predict_probs_batch(
    const ModelParams& params, const std::vector<const feat::LabeledSequence*>& seqs) {
    bool masked = !(params.modality_mask[0] && params.modality_mask[1] && params.modality_mask[2]);
    num::Tape tape;
    BoundParams bound = bind_params(tape, params.store);
    std::vector<std::vector<double>> out;
    out.reserve(seqs.size());
    for (const feat::LabeledSequence* seq : seqs) {
        ForwardTrace trace =
            masked ? model_forward(tape, bound, params,
                                   feat::apply_modality_mask(*seq, params.modality_mask))
                   : model_forward(tape, bound, params, *seq);
        const num::Tensor& p = tape.val(trace.probs);
        out.emplace_back(p.data().begin(), p.data().end());
    }
    return out;
}

int argmax_class(const std::vector<double>& probs) {
    if (probs.empty()) throw ValidationError("argmax of empty probability vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return static_cast<int>(best);
}

std::pair<int, std::vector<double>> predict(const ModelParams& params,
                                            const feat::LabeledSequence& seq) {
    std::vector<double> probs = predict_probs(params, seq);
    return {argmax_class(probs), std::move(probs)};
}

namespace {

json config_to_json(const ModelConfig& config) {
    json j;
    if (const auto* c = std::get_if<FLstmConfig>(&config)) {
        j["gaze_hidden"] = c->gaze_hidden;
        j["lane_hidden"] = c->lane_hidden;
        j["object_hidden"] = c->object_hidden;
        j["mlp_hidden"] = c->mlp_hidden;
        j["n_classes"] = c->n_classes;
        j["seq_len"] = c->seq_len;
    } else {
        const auto& tc = std::get<FTfConfig>(config);
        j["gaze_latent"] = tc.gaze_latent;
        j["object_latent"] = tc.object_latent;
        j["lane_latent"] = tc.lane_latent;
        j["n_heads"] = tc.n_heads;
        j["head_hidden"] = tc.head_hidden;
        j["ff_hidden"] = tc.ff_hidden;
        j["n_classes"] = tc.n_classes;
        j["seq_len"] = tc.seq_len;
        j["use_positional"] = tc.use_positional;
        j["extra_projection"] = tc.extra_projection;
    }
    return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

ModelConfig config_from_json(const std::string& arch, const json& j) {
    if (arch == "flstm") {
        FLstmConfig c;
        maybe(j, "gaze_hidden", c.gaze_hidden);
        maybe(j, "lane_hidden", c.lane_hidden);
        maybe(j, "object_hidden", c.object_hidden);
        maybe(j, "mlp_hidden", c.mlp_hidden);
        maybe(j, "n_classes", c.n_classes);
        maybe(j, "seq_len", c.seq_len);
        return c;
    }
    if (arch == "ftf") {
        FTfConfig c;
        maybe(j, "gaze_latent", c.gaze_latent);
        maybe(j, "object_latent", c.object_latent);
        maybe(j, "lane_latent", c.lane_latent);
        maybe(j, "n_heads", c.n_heads);
        maybe(j, "head_hidden", c.head_hidden);
        maybe(j, "ff_hidden", c.ff_hidden);
        maybe(j, "n_classes", c.n_classes);
        maybe(j, "seq_len", c.seq_len);
        maybe(j, "use_positional", c.use_positional);
        maybe(j, "extra_projection", c.extra_projection);
        return c;
    }
    throw ValidationError("unknown architecture tag: " + arch);
}

std::filesystem::path sidecar_path(const std::filesystem::path& weights_path) {
    return std::filesystem::path(weights_path.string() + ".json");
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& weights_path) {
    params.store.save(weights_path);
    nlohmann::ordered_json j;
    j["arch"] = params.arch();
    j["train_seed"] = params.train_seed;
    j["modality_mask"] = params.modality_mask;
    j["config"] = config_to_json(params.config);
    io::atomic_write(sidecar_path(weights_path), j.dump(2) + "\n");
}

ModelParams load_checkpoint(const std::filesystem::path& weights_path) {
    ModelParams params;
    params.store = num::ParamStore::load(weights_path);
    json j = json::parse(io::read_file(sidecar_path(weights_path)), nullptr, false);
    if (j.is_discarded())
        throw ValidationError(sidecar_path(weights_path).string() + ": not valid JSON");
    if (!j.contains("arch") || !j["arch"].is_string())
        throw ValidationError("checkpoint sidecar missing 'arch'");
    params.config = config_from_json(j["arch"].get<std::string>(), j.value("config", json::object()));
    maybe(j, "train_seed", params.train_seed);
    if (j.contains("modality_mask")) {
        auto m = j["modality_mask"].get<std::vector<bool>>();
        if (m.size() != 3) throw ValidationError("modality_mask must have 3 entries");
        for (int i = 0; i < 3; ++i) params.modality_mask[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i)];
    }
    std::size_t expect = std::holds_alternative<FLstmConfig>(params.config)
                             ? std::get<FLstmConfig>(params.config).param_count()
                             : std::get<FTfConfig>(params.config).param_count();
    if (params.store.param_count() != expect)
        throw ValidationError("checkpoint weight count " +
                              std::to_string(params.store.param_count()) +
                              " does not match config (" + std::to_string(expect) + ")");
    return params;
}

}  // namespace mfusion::model
