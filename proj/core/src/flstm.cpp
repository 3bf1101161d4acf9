#include "mfusion/errors.hpp"
#include "mfusion/models.hpp"
#include "model_detail.hpp"

namespace mfusion::model {
namespace {

constexpr std::size_t lstm_params(std::size_t hidden, std::size_t in) {
    return 4 * (hidden * (in + hidden) + hidden);
}

}  // namespace

std::size_t FLstmConfig::param_count() const {
    std::size_t mlp = mlp_hidden * flatten_dim() + mlp_hidden + n_classes * mlp_hidden + n_classes;
    return lstm_params(gaze_hidden, feat::kGazeDims) + lstm_params(lane_hidden, feat::kLaneDims) +
           lstm_params(object_hidden, feat::kObjectDims) + mlp;
}

namespace detail {

void validate(const FLstmConfig& config) {
    if (config.gaze_hidden == 0 || config.lane_hidden == 0 || config.object_hidden == 0 ||
        config.mlp_hidden == 0 || config.n_classes == 0 || config.seq_len == 0)
        throw ValidationError("flstm config dimensions must be positive");
}

void flstm_create_params(num::ParamStore& store, const FLstmConfig& config, Rng& rng) {
    auto lstm = [&](const std::string& prefix, std::size_t hidden, std::size_t in) {
        std::size_t fan = in + hidden;
        for (const char* gate : {"w_in", "w_forget", "w_cell", "w_out"}) {
            store.create(prefix + "/" + gate, uniform_init(rng, {hidden, fan}, fan));
        }
        for (const char* gate : {"b_in", "b_forget", "b_cell", "b_out"}) {
            store.create(prefix + "/" + gate, num::Tensor({hidden}));
        }
    };
    lstm("flstm/gaze", config.gaze_hidden, feat::kGazeDims);
    lstm("flstm/lane", config.lane_hidden, feat::kLaneDims);
    lstm("flstm/object", config.object_hidden, feat::kObjectDims);
    store.create("flstm/mlp/w1",
                 uniform_init(rng, {config.mlp_hidden, config.flatten_dim()}, config.flatten_dim()));
    store.create("flstm/mlp/b1", num::Tensor({config.mlp_hidden}));
    store.create("flstm/mlp/w2",
                 uniform_init(rng, {config.n_classes, config.mlp_hidden}, config.mlp_hidden));
    store.create("flstm/mlp/b2", num::Tensor({config.n_classes}));
}

}  // namespace detail

ForwardTrace flstm_forward(num::Tape& tape, const BoundParams& bound, const FLstmConfig& config,
                           const feat::LabeledSequence& seq) {
    detail::validate(config);
    if (seq.frames.size() != config.seq_len)
        throw ValidationError("flstm_forward: expected " + std::to_string(config.seq_len) +
                              " frames, got " + std::to_string(seq.frames.size()));

    auto cell_params = [&](const std::string& prefix) {
        return num::LstmCellParams{bound.at(prefix + "/w_in"),   bound.at(prefix + "/w_forget"),
                                   bound.at(prefix + "/w_cell"), bound.at(prefix + "/w_out"),
                                   bound.at(prefix + "/b_in"),   bound.at(prefix + "/b_forget"),
                                   bound.at(prefix + "/b_cell"), bound.at(prefix + "/b_out")};
    };
    num::LstmCellParams gaze_cell = cell_params("flstm/gaze");
    num::LstmCellParams lane_cell = cell_params("flstm/lane");
    num::LstmCellParams object_cell = cell_params("flstm/object");

    num::Value hg = tape.constant(num::Tensor({config.gaze_hidden}));
    num::Value cg = hg;
    num::Value hl = tape.constant(num::Tensor({config.lane_hidden}));
    num::Value cl = hl;
    num::Value ho = tape.constant(num::Tensor({config.object_hidden}));
    num::Value co = ho;

    std::vector<num::Value> steps;
    steps.reserve(config.seq_len);
    for (std::size_t t = 0; t < config.seq_len; ++t) {
        const feat::FrameVec& f = seq.frames[t];
        auto slice = [&](std::size_t off, std::size_t n) {
            std::vector<double> v(f.begin() + static_cast<long>(off),
                                  f.begin() + static_cast<long>(off + n));
            return tape.constant(num::Tensor::vec(std::move(v)));
        };
        num::Value xg = slice(feat::kGazeOffset, feat::kGazeDims);
        num::Value xl = slice(feat::kLaneOffset, feat::kLaneDims);
        num::Value xo = slice(feat::kObjectOffset, feat::kObjectDims);
        std::tie(hg, cg) = tape.lstm_cell(xg, hg, cg, gaze_cell);
        std::tie(hl, cl) = tape.lstm_cell(xl, hl, cl, lane_cell);
        std::tie(ho, co) = tape.lstm_cell(xo, ho, co, object_cell);
        steps.push_back(tape.concat_vecs({hg, hl, ho}));
    }

    num::Value flat = tape.concat_vecs(steps);
    num::Value hidden = tape.reshape(flat, {config.seq_len, config.concat_dim()});
    num::Value z = tape.relu(tape.linear(flat, bound.at("flstm/mlp/w1"), bound.at("flstm/mlp/b1")));
    num::Value act =
        tape.sigmoid(tape.linear(z, bound.at("flstm/mlp/w2"), bound.at("flstm/mlp/b2")));
    return {tape.l1_normalize(act), hidden};
}

}  // namespace mfusion::model
