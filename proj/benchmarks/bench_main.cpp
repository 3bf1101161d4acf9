// Microbenchmarks for the hot paths: dense kernels, the two model forwards
// (with and without the backward sweep), pose recovery, and the scenario
// generator. Numbers here are for tracking regressions, not for publication.

#include <benchmark/benchmark.h>

#include <utility>
#include <vector>

#include "mfusion/dataset.hpp"
#include "mfusion/geometry.hpp"
#include "mfusion/models.hpp"
#include "mfusion/rng.hpp"
#include "mfusion/tape.hpp"
#include "mfusion/tensor.hpp"

using namespace mfusion;

namespace {

num::Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    num::Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

feat::LabeledSequence random_sequence(Rng& rng) {
    feat::LabeledSequence seq;
    seq.label = 2;
    seq.frames.resize(feat::kSeqLen);
    for (auto& frame : seq.frames)
        for (double& v : frame) v = rng.uniform(-1.0, 1.0);
    return seq;
}

void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    num::Tensor a = random_tensor({n, n}, rng);
    num::Tensor b = random_tensor({n, n}, rng);
    for (auto _ : state) {
        num::Tensor c = num::matmul(a, b);
        benchmark::DoNotOptimize(c.raw());
    }
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

void bm_lstm_cell(benchmark::State& state) {
    Rng rng(2);
    const std::size_t n_in = feat::kObjectDims, n_h = 10;
    num::Tensor w = random_tensor({n_h, n_in + n_h}, rng);
    num::Tensor b = random_tensor({n_h}, rng);
    num::Tensor x = random_tensor({n_in}, rng);
    for (auto _ : state) {
        num::Tape tape;
        num::LstmCellParams p{tape.leaf(w), tape.leaf(w), tape.leaf(w), tape.leaf(w),
                              tape.leaf(b), tape.leaf(b), tape.leaf(b), tape.leaf(b)};
        num::Value h = tape.constant(num::Tensor({n_h}));
        num::Value c = tape.constant(num::Tensor({n_h}));
        auto [nh, nc] = tape.lstm_cell(tape.constant(x), h, c, p);
        benchmark::DoNotOptimize(tape.val(nh).raw());
        benchmark::DoNotOptimize(tape.val(nc).raw());
    }
}
BENCHMARK(bm_lstm_cell);

void bm_self_attention(benchmark::State& state) {
    Rng rng(3);
    const std::size_t tsteps = feat::kSeqLen, d = 64;
    num::Tensor wm = random_tensor({d, d}, rng);
    num::Tensor bv = random_tensor({d}, rng);
    num::Tensor x = random_tensor({tsteps, d}, rng);
    for (auto _ : state) {
        num::Tape tape;
        num::AttentionParams p{tape.leaf(wm), tape.leaf(wm), tape.leaf(wm), tape.leaf(wm),
                               tape.leaf(bv), tape.leaf(bv), tape.leaf(bv), tape.leaf(bv)};
        num::AttentionResult res = tape.self_attention(tape.constant(x), p, 4);
        benchmark::DoNotOptimize(tape.val(res.out).raw());
    }
}
BENCHMARK(bm_self_attention);

template <typename Config>
void bm_forward(benchmark::State& state) {
    model::ModelParams params = model::init_params(Config{}, 5);
    Rng rng(6);
    feat::LabeledSequence seq = random_sequence(rng);
    for (auto _ : state) {
        num::Tape tape;
        model::BoundParams bound = model::bind_params(tape, params.store);
        model::ForwardTrace trace = model::model_forward(tape, bound, params, seq);
        benchmark::DoNotOptimize(tape.val(trace.probs).raw());
    }
}
BENCHMARK_TEMPLATE(bm_forward, model::FLstmConfig)->Name("bm_flstm_forward");
BENCHMARK_TEMPLATE(bm_forward, model::FTfConfig)->Name("bm_ftf_forward");

template <typename Config>
void bm_train_step(benchmark::State& state) {
    model::ModelParams params = model::init_params(Config{}, 5);
    Rng rng(6);
    feat::LabeledSequence seq = random_sequence(rng);
    for (auto _ : state) {
        num::Tape tape;
        model::BoundParams bound = model::bind_params(tape, params.store);
        model::ForwardTrace trace = model::model_forward(tape, bound, params, seq);
        num::Value loss = tape.cross_entropy(trace.probs, 2);
        tape.backward(loss);
        params.store.zero_grads();
        model::accumulate_grads(tape, bound, params.store);
        benchmark::DoNotOptimize(tape.val(loss).raw());
    }
}
BENCHMARK_TEMPLATE(bm_train_step, model::FLstmConfig)->Name("bm_flstm_train_step");
BENCHMARK_TEMPLATE(bm_train_step, model::FTfConfig)->Name("bm_ftf_train_step");

void bm_solve_pnp(benchmark::State& state) {
    Rng rng(7);
    geom::CameraIntrinsics cam;
    std::vector<geom::Vec3> cloud;
    for (int i = 0; i < 20; ++i)
        cloud.push_back({rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12),
                         rng.uniform(-0.12, 0.12)});
    geom::Pose truth{geom::axis_angle_to_mat({0.1, -0.05, 0.08}), {0.04, -0.03, 2.1}};
    std::vector<geom::Vec2> observed = geom::project(cloud, truth, cam);
    geom::Pose init{geom::kIdentity3, {0, 0, 2.2}};
    for (auto _ : state) {
        geom::Pose got = geom::solve_pnp(cloud, observed, cam, init);
        benchmark::DoNotOptimize(got.t[0]);
    }
}
BENCHMARK(bm_solve_pnp);

void bm_generate_synthetic(benchmark::State& state) {
    data::SynthConfig cfg;
    cfg.n_sequences = static_cast<std::size_t>(state.range(0));
    cfg.seed = 8;
    for (auto _ : state) {
        data::DatasetManifest m = data::generate_synthetic(cfg);
        benchmark::DoNotOptimize(m.sequences.data());
    }
}
BENCHMARK(bm_generate_synthetic)->Arg(20)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
