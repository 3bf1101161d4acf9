#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "mfusion/adam.hpp"
#include "mfusion/errors.hpp"
#include "mfusion/log.hpp"
#include "mfusion/rng.hpp"
#include "mfusion/train.hpp"

namespace mfusion::train {
namespace {

std::vector<feat::LabeledSequence> expand_truncations(
    const std::vector<feat::LabeledSequence>& seqs) {
    std::vector<feat::LabeledSequence> out;
    out.reserve(seqs.size() * feat::kKeepFrames.size());
    for (const auto& s : seqs) {
        for (std::size_t keep : feat::kKeepFrames) out.push_back(feat::truncate_and_pad(s, keep));
    }
    return out;
}

// mean cross-entropy without gradients, parameters bound once per chunk
double mean_loss(const model::ModelParams& params, const std::vector<feat::LabeledSequence>& set,
                 std::size_t chunk) {
    double sum = 0;
    for (std::size_t c0 = 0; c0 < set.size(); c0 += chunk) {
        std::size_t n = std::min(chunk, set.size() - c0);
        num::Tape tape;
        model::BoundParams bound = model::bind_params(tape, params.store);
        for (std::size_t j = 0; j < n; ++j) {
            const feat::LabeledSequence& s = set[c0 + j];
            model::ForwardTrace trace = model::model_forward(tape, bound, params, s);
            sum += tape.val(
                tape.cross_entropy(trace.probs, static_cast<std::size_t>(s.label)))[0];
        }
    }
    return sum / static_cast<double>(set.size());
}

}  // namespace

TrainResult train(const std::vector<feat::LabeledSequence>& training_set,
                  const model::ModelConfig& config, const TrainConfig& train_config) {
    if (training_set.empty()) throw ValidationError("training set is empty");
    if (train_config.batch_size == 0) throw ValidationError("batch_size must be >= 1");
    if (train_config.learning_rate < 0) throw ValidationError("learning_rate must be >= 0");
    if (train_config.val_fraction < 0 || train_config.val_fraction >= 1)
        throw ValidationError("val_fraction must lie in [0, 1)");

    Rng rng(train_config.seed);

    bool full_mask = train_config.modality_mask[0] && train_config.modality_mask[1] &&
                     train_config.modality_mask[2];
    std::vector<std::size_t> order(training_set.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t n_val =
        static_cast<std::size_t>(static_cast<double>(order.size()) * train_config.val_fraction);
    if (n_val >= order.size()) n_val = order.size() - 1;

    std::vector<feat::LabeledSequence> fit, val;
    fit.reserve(order.size() - n_val);
    val.reserve(n_val);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const feat::LabeledSequence& src = training_set[order[i]];
        feat::LabeledSequence masked =
            full_mask ? src : feat::apply_modality_mask(src, train_config.modality_mask);
        (i < n_val ? val : fit).push_back(std::move(masked));
    }
    if (train_config.varying_time) {
        fit = expand_truncations(fit);
        val = expand_truncations(val);
    }

    TrainResult result;
    result.params = model::init_params(config, train_config.seed);
    result.params.train_seed = train_config.seed;
    result.params.modality_mask = train_config.modality_mask;
    num::ParamStore& store = result.params.store;

    num::Adam::Config opt_config;
    opt_config.lr = train_config.learning_rate;
    num::Adam opt(opt_config);

    bool use_val = !val.empty();
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_theta;
    std::size_t stale = 0;

    std::vector<std::size_t> idx(fit.size());
    std::iota(idx.begin(), idx.end(), 0);

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        rng.shuffle(idx);
        double loss_sum = 0;
        for (std::size_t b0 = 0; b0 < idx.size(); b0 += train_config.batch_size) {
            std::size_t nb = std::min(train_config.batch_size, idx.size() - b0);
            num::Tape tape;
            model::BoundParams bound = model::bind_params(tape, store);
            std::vector<num::Value> losses;
            losses.reserve(nb);
            for (std::size_t j = 0; j < nb; ++j) {
                const feat::LabeledSequence& s = fit[idx[b0 + j]];
                model::ForwardTrace trace = model::model_forward(tape, bound, result.params, s);
                losses.push_back(
                    tape.cross_entropy(trace.probs, static_cast<std::size_t>(s.label)));
            }
            num::Tensor mean_weights({nb});
            mean_weights.fill(1.0 / static_cast<double>(nb));
            num::Value batch_loss =
                tape.dot(tape.concat_vecs(losses), std::move(mean_weights));
            double bl = tape.val(batch_loss)[0];
            if (!std::isfinite(bl))
                throw NumericError("training loss diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b0 / train_config.batch_size));
            loss_sum += bl * static_cast<double>(nb);
            store.zero_grads();
            tape.backward(batch_loss);
            model::accumulate_grads(tape, bound, store);
            opt.step(store);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(fit.size());
        if (use_val) {
            double vl = mean_loss(result.params, val, train_config.batch_size);
            if (!std::isfinite(vl))
                throw NumericError("validation loss diverged at epoch " + std::to_string(epoch));
            stats.val_loss = vl;
            result.history.push_back(stats);
            if (vl < best_val) {
                best_val = vl;
                result.best_epoch = epoch;
                best_theta = store.flatten();
                stale = 0;
            } else if (train_config.early_stop_patience > 0 &&
                       ++stale >= train_config.early_stop_patience) {
                result.early_stopped = true;
                log::info("early stop at epoch " + std::to_string(epoch) + " (best " +
                          std::to_string(result.best_epoch) + ")");
                break;
            }
        } else {
            result.history.push_back(stats);
            result.best_epoch = epoch;
        }
    }
    if (use_val && !best_theta.empty()) store.unflatten(best_theta);
    return result;
}

const char* protocol_name(Protocol protocol) {
    return protocol == Protocol::kZeroTime ? "zero-time" : "varying-time";
}

namespace {

std::vector<feat::LabeledSequence> gather(const data::DatasetManifest& manifest,
                                          const std::vector<std::size_t>& indices) {
    std::vector<feat::LabeledSequence> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(manifest.sequences[i]);
    return out;
}

// Run tasks 0..n-1 on up to `jobs` threads, rethrowing the first failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    if (jobs == 0 || jobs > n) jobs = n;
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

double sample_stddev(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0;
    double acc = 0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

BenchmarkReport run_benchmark(const data::DatasetManifest& manifest,
                              const model::ModelConfig& config, Protocol protocol, std::size_t k,
                              const TrainConfig& base, std::size_t jobs) {
    data::FoldSplit split = data::stratified_kfold(manifest, k, base.seed);
    BenchmarkReport report;
    report.arch = model::arch_name(config);
    report.protocol = protocol;
    report.k = k;
    report.seed = base.seed;
    report.modality_mask = base.modality_mask;
    report.folds.resize(k);

    parallel_for(k, jobs, [&](std::size_t f) {
        TrainConfig tc = base;
        tc.seed = base.seed + f;
        tc.varying_time = protocol == Protocol::kVaryingTime;
        std::vector<feat::LabeledSequence> train_set = gather(manifest, split.train_indices(f));
        std::vector<feat::LabeledSequence> test_set = gather(manifest, split.folds[f]);
        log::info("fold " + std::to_string(f) + ": training on " +
                  std::to_string(train_set.size()) + ", testing on " +
                  std::to_string(test_set.size()));
        TrainResult tr = train(train_set, config, tc);
        FoldReport fold;
        fold.fold = f;
        fold.train_count = train_set.size();
        fold.test_count = test_set.size();
        fold.eval = evaluate(tr.params, test_set);
        if (tc.varying_time) fold.tum = compute_tum(tr.params, test_set);
        report.folds[f] = std::move(fold);
    });

    std::vector<double> accs, f1s;
    std::size_t total = 0;
    double tum_weighted = 0;
    std::array<double, 5> checkpoint_weighted{};
    for (const FoldReport& fold : report.folds) {
        accs.push_back(fold.eval.accuracy);
        f1s.push_back(fold.eval.macro_f1);
        total += fold.test_count;
        for (std::size_t t = 0; t < feat::kNumClasses; ++t) {
            for (std::size_t p = 0; p < feat::kNumClasses; ++p)
                report.confusion[t][p] += fold.eval.confusion[t][p];
        }
        tum_weighted += fold.tum.mean_seconds * static_cast<double>(fold.test_count);
        for (std::size_t j = 0; j < 5; ++j)
            checkpoint_weighted[j] +=
                fold.tum.checkpoint_accuracy[j] * static_cast<double>(fold.test_count);
    }
    report.mean_accuracy =
        std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(k);
    report.std_accuracy = sample_stddev(accs, report.mean_accuracy);
    report.mean_macro_f1 = std::accumulate(f1s.begin(), f1s.end(), 0.0) / static_cast<double>(k);
    report.std_macro_f1 = sample_stddev(f1s, report.mean_macro_f1);
    report.per_class_accuracy = metrics_from_confusion(report.confusion).per_class_accuracy;
    if (protocol == Protocol::kVaryingTime && total > 0) {
        report.mean_tum_seconds = tum_weighted / static_cast<double>(total);
        for (std::size_t j = 0; j < 5; ++j)
            report.checkpoint_accuracy[j] = checkpoint_weighted[j] / static_cast<double>(total);
    }
    return report;
}

AblationReport run_ablation(const data::DatasetManifest& manifest,
                            const model::FLstmConfig& flstm_config,
                            const model::FTfConfig& ftf_config, const TrainConfig& base,
                            std::size_t jobs) {
    data::FoldSplit split = data::stratified_kfold(manifest, 5, base.seed);
    std::vector<feat::LabeledSequence> train_set = gather(manifest, split.train_indices(0));
    std::vector<feat::LabeledSequence> test_set = gather(manifest, split.folds[0]);

    constexpr std::array<bool, 3> kFull = {true, true, true};
    constexpr std::array<bool, 3> kInterior = {true, false, false};  // gaze stream only
    struct Task {
        const char* name;
        model::ModelConfig config;
        std::array<bool, 3> mask;
        bool interior;
    };
    std::array<Task, 4> tasks = {Task{"flstm_full", flstm_config, kFull, false},
                                 Task{"flstm_interior", flstm_config, kInterior, true},
                                 Task{"ftf_full", ftf_config, kFull, false},
                                 Task{"ftf_interior", ftf_config, kInterior, true}};

    AblationReport report;
    report.seed = base.seed;
    report.train_count = train_set.size();
    report.test_count = test_set.size();
    report.cells.resize(tasks.size());

    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        const Task& task = tasks[i];
        TrainConfig tc = base;
        tc.modality_mask = task.mask;
        tc.varying_time = false;
        log::info(std::string("ablation cell ") + task.name);
        TrainResult tr = train(train_set, task.config, tc);
        AblationCell cell;
        cell.name = task.name;
        cell.arch = model::arch_name(task.config);
        cell.interior_only = task.interior;
        cell.eval = evaluate(tr.params, test_set);
        report.cells[i] = std::move(cell);
    });
    return report;
}

}  // namespace mfusion::train
