#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "doctest.h"
#include "mfusion/dataset.hpp"
#include "mfusion/errors.hpp"
#include "mfusion/train.hpp"
#include "test_support.hpp"

using namespace mfusion;

namespace {

// full-length models at narrow widths so protocol tests stay fast
model::FLstmConfig slim_flstm() {
    model::FLstmConfig c;
    c.gaze_hidden = 3;
    c.lane_hidden = 2;
    c.object_hidden = 3;
    c.mlp_hidden = 8;
    return c;
}

model::FTfConfig slim_ftf() {
    model::FTfConfig c;
    c.gaze_latent = 4;
    c.object_latent = 2;
    c.lane_latent = 2;
    c.n_heads = 2;
    c.head_hidden = 8;
    c.ff_hidden = 8;
    return c;
}

// short-sequence variant for pure trainer mechanics
model::FLstmConfig tiny_flstm() {
    model::FLstmConfig c = slim_flstm();
    c.seq_len = 6;
    return c;
}

std::vector<feat::LabeledSequence> tiny_set(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<feat::LabeledSequence> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(testsup::random_seq(rng, static_cast<int>(i % 5), 6));
    return out;
}

data::DatasetManifest synth(std::size_t n, std::uint64_t seed, bool uniform = false) {
    data::SynthConfig cfg;
    cfg.n_sequences = n;
    cfg.seed = seed;
    if (uniform) cfg.class_distribution = {0.2, 0.2, 0.2, 0.2, 0.2};
    return data::generate_synthetic(cfg);
}

train::TrainConfig fast_config(std::size_t epochs) {
    train::TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 8;
    t.val_fraction = 0;
    t.early_stop_patience = 0;
    t.seed = 40;
    return t;
}

bool histories_equal(const std::vector<train::EpochStats>& a,
                     const std::vector<train::EpochStats>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].train_loss != b[i].train_loss || a[i].val_loss != b[i].val_loss) return false;
    }
    return true;
}

std::array<bool, 5> pattern(unsigned bits) {
    std::array<bool, 5> p{};
    for (unsigned i = 0; i < 5; ++i) p[i] = (bits >> i) & 1u;
    return p;
}

}  // namespace

TEST_SUITE("train-eval") {

TEST_CASE("trainer rejects degenerate configurations") {
    auto seqs = tiny_set(1, 4);
    train::TrainConfig t = fast_config(1);
    CHECK_THROWS_AS(train::train({}, tiny_flstm(), t), ValidationError);
    t.batch_size = 0;
    CHECK_THROWS_AS(train::train(seqs, tiny_flstm(), t), ValidationError);
    t = fast_config(1);
    t.learning_rate = -1;
    CHECK_THROWS_AS(train::train(seqs, tiny_flstm(), t), ValidationError);
    t = fast_config(1);
    t.val_fraction = 1.0;
    CHECK_THROWS_AS(train::train(seqs, tiny_flstm(), t), ValidationError);
}

TEST_CASE("zero learning rate leaves the initialization untouched") {
    auto seqs = tiny_set(2, 8);
    train::TrainConfig t = fast_config(4);
    t.learning_rate = 0;
    train::TrainResult r = train::train(seqs, tiny_flstm(), t);

    model::ModelParams init = model::init_params(tiny_flstm(), t.seed);
    CHECK(r.params.store.serialize() == init.store.serialize());

    REQUIRE(r.history.size() == 4);
    for (const auto& e : r.history)
        CHECK(std::fabs(e.train_loss - r.history[0].train_loss) < 1e-9);
}

TEST_CASE("training is deterministic in the seed") {
    auto seqs = tiny_set(3, 6);
    train::TrainConfig t = fast_config(3);
    t.val_fraction = 0.3;  // exercise the split + best-weight restore path too
    t.early_stop_patience = 2;
    train::TrainResult a = train::train(seqs, tiny_flstm(), t);
    train::TrainResult b = train::train(seqs, tiny_flstm(), t);
    CHECK(a.params.store.serialize() == b.params.store.serialize());
    CHECK(histories_equal(a.history, b.history));
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.early_stopped == b.early_stopped);
}

TEST_CASE("a small training set is learnable") {
    data::DatasetManifest m = synth(8, 31);
    train::TrainConfig t = fast_config(80);
    train::TrainResult r = train::train(m.sequences, slim_flstm(), t);
    train::EvalResult on_train = train::evaluate(r.params, m.sequences);
    CHECK(on_train.total == 8);
    CHECK(on_train.accuracy >= 7.0 / 8.0);
}

TEST_CASE("metrics from a hand-checked confusion matrix") {
    using Confusion = std::array<std::array<std::size_t, 5>, 5>;

    SUBCASE("all correct") {
        Confusion c{};
        for (std::size_t i = 0; i < 5; ++i) c[i][i] = 2;
        train::EvalResult e = train::metrics_from_confusion(c);
        CHECK(e.total == 10);
        CHECK(e.accuracy == 1.0);
        CHECK(e.macro_f1 == 1.0);
        for (double v : e.per_class_accuracy) CHECK(v == 1.0);
    }

    SUBCASE("four of five per class") {
        Confusion c{};
        for (std::size_t i = 0; i < 5; ++i) {
            c[i][i] = 4;
            c[i][(i + 1) % 5] = 1;
        }
        train::EvalResult e = train::metrics_from_confusion(c);
        CHECK(e.total == 25);
        CHECK(std::fabs(e.accuracy - 0.8) < 1e-12);
        CHECK(std::fabs(e.macro_f1 - 0.8) < 1e-12);
        for (double v : e.per_class_accuracy) CHECK(std::fabs(v - 0.8) < 1e-12);
    }

    SUBCASE("mixed fixture, worked by hand") {
        Confusion c = {{{4, 1, 0, 0, 0},
                        {1, 3, 0, 0, 0},
                        {0, 0, 2, 0, 0},
                        {0, 1, 0, 3, 0},
                        {0, 0, 0, 1, 1}}};
        train::EvalResult e = train::metrics_from_confusion(c);
        CHECK(e.total == 17);
        CHECK(std::fabs(e.accuracy - 13.0 / 17.0) < 1e-12);
        // recall: 4/5, 3/4, 1, 3/4, 1/2; precision: 4/5, 3/5, 1, 3/4, 1
        std::array<double, 5> recall = {0.8, 0.75, 1.0, 0.75, 0.5};
        std::array<double, 5> f1 = {0.8, 2.0 / 3.0, 1.0, 0.75, 2.0 / 3.0};
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(std::fabs(e.per_class_accuracy[i] - recall[i]) < 1e-12);
            CHECK(std::fabs(e.per_class_f1[i] - f1[i]) < 1e-12);
        }
        CHECK(std::fabs(e.macro_f1 - 233.0 / 300.0) < 1e-12);
    }

    SUBCASE("absent classes stay finite") {
        Confusion c{};
        c[0][0] = 3;
        c[0][1] = 1;
        c[1][1] = 2;
        train::EvalResult e = train::metrics_from_confusion(c);
        CHECK(e.total == 6);
        for (std::size_t i = 2; i < 5; ++i) {
            CHECK(e.per_class_accuracy[i] == 0.0);
            CHECK(e.per_class_f1[i] == 0.0);
        }
        CHECK(std::isfinite(e.macro_f1));
        CHECK(std::isfinite(e.accuracy));
    }
}

TEST_CASE("evaluate wires predictions into the confusion matrix") {
    // all-zero weights predict uniform probabilities, ties resolve to class 0
    model::ModelParams params = model::init_params(tiny_flstm(), 1);
    for (auto& [path, slot] : params.store) {
        (void)path;
        slot.value = num::Tensor(slot.value.shape());
    }

    auto seqs = tiny_set(4, 6);  // labels 0,1,2,3,4,0
    train::EvalResult e = train::evaluate(params, seqs);
    CHECK(e.total == 6);
    CHECK(std::fabs(e.accuracy - 2.0 / 6.0) < 1e-12);
    for (std::size_t t = 0; t < 5; ++t) {
        for (std::size_t p = 1; p < 5; ++p) CHECK(e.confusion[t][p] == 0);
    }
    CHECK(e.confusion[0][0] == 2);
    CHECK(e.per_class_accuracy[0] == 1.0);
    CHECK(e.per_class_accuracy[1] == 0.0);
}

TEST_CASE("time-until-maneuver per-sequence rule") {
    using train::TumRule;
    // correct_at runs earliest (5 s) to latest (1 s)
    CHECK(train::tum_seconds({true, true, true, true, true}, TumRule::kStableFromEarliest) == 5);
    CHECK(train::tum_seconds({false, false, false, false, true},
                             TumRule::kStableFromEarliest) == 1);
    CHECK(train::tum_seconds({true, false, true, true, true}, TumRule::kStableFromEarliest) == 3);
    CHECK(train::tum_seconds({true, true, false, true, true}, TumRule::kStableFromEarliest) == 2);
    CHECK(train::tum_seconds({false, false, false, false, false},
                             TumRule::kStableFromEarliest) == 0);

    CHECK(train::tum_seconds({true, false, true, true, true}, TumRule::kFirstCorrect) == 5);
    CHECK(train::tum_seconds({false, true, false, false, false}, TumRule::kFirstCorrect) == 4);
    CHECK(train::tum_seconds({false, false, false, false, false}, TumRule::kFirstCorrect) == 0);

    // flipping any checkpoint to correct never lowers the score, either rule
    for (auto rule : {TumRule::kStableFromEarliest, TumRule::kFirstCorrect}) {
        for (unsigned bits = 0; bits < 32; ++bits) {
            double base = train::tum_seconds(pattern(bits), rule);
            CHECK(base >= 0);
            CHECK(base <= 5);
            for (unsigned i = 0; i < 5; ++i) {
                if ((bits >> i) & 1u) continue;
                CHECK(train::tum_seconds(pattern(bits | (1u << i)), rule) >= base);
            }
        }
    }
}

TEST_CASE("full-length checkpoint equals the zero-time evaluation") {
    data::DatasetManifest m = synth(6, 33);
    model::ModelParams params = model::init_params(slim_flstm(), 5);
    train::TumResult tum = train::compute_tum(params, m.sequences);
    train::EvalResult zero = train::evaluate(params, m.sequences);
    CHECK(tum.checkpoint_accuracy[4] == zero.accuracy);  // 150-frame entry
    REQUIRE(tum.per_sequence_seconds.size() == 6);
    for (double s : tum.per_sequence_seconds) {
        CHECK(s >= 0);
        CHECK(s <= 5);
    }
}

TEST_CASE("chance and prior baselines") {
    std::vector<int> labels;
    for (int c = 0; c < 5; ++c) labels.insert(labels.end(), 20, c);
    double chance = train::chance_accuracy(labels, 17);
    CHECK(chance > 0.17);
    CHECK(chance < 0.23);
    CHECK(train::chance_accuracy(labels, 17) == chance);
    CHECK_THROWS_AS(train::chance_accuracy({}, 1), ValidationError);

    data::DatasetManifest m;
    const std::array<int, 5> counts = {234, 124, 58, 123, 55};
    for (int c = 0; c < 5; ++c) {
        for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
            feat::LabeledSequence s;
            s.label = c;
            m.sequences.push_back(std::move(s));
        }
    }
    m.recount();
    CHECK(train::prior_accuracy(m) == 234.0 / 594.0);
    CHECK_THROWS_AS(train::prior_accuracy(data::DatasetManifest{}), ValidationError);
}

TEST_CASE("cross-validated benchmark report is consistent and scheduling-independent") {
    data::DatasetManifest m = synth(20, 34);
    train::TrainConfig base = fast_config(2);
    train::BenchmarkReport rep =
        train::run_benchmark(m, slim_flstm(), train::Protocol::kZeroTime, 2, base, 1);

    CHECK(rep.arch == "flstm");
    CHECK(rep.k == 2);
    REQUIRE(rep.folds.size() == 2);
    std::array<std::array<std::size_t, 5>, 5> pooled{};
    double acc_sum = 0;
    for (const auto& f : rep.folds) {
        CHECK(f.train_count + f.test_count == 20);
        CHECK(f.test_count == 10);
        CHECK(f.eval.total == 10);
        std::size_t diag = 0, total = 0;
        for (std::size_t t = 0; t < 5; ++t) {
            for (std::size_t p = 0; p < 5; ++p) {
                total += f.eval.confusion[t][p];
                pooled[t][p] += f.eval.confusion[t][p];
            }
            diag += f.eval.confusion[t][t];
        }
        CHECK(total == 10);
        CHECK(std::fabs(f.eval.accuracy - static_cast<double>(diag) / 10.0) < 1e-12);
        acc_sum += f.eval.accuracy;
    }
    CHECK(rep.confusion == pooled);
    CHECK(std::fabs(rep.mean_accuracy - acc_sum / 2.0) < 1e-12);
    double dev = rep.folds[0].eval.accuracy - rep.mean_accuracy;
    CHECK(std::fabs(rep.std_accuracy - std::sqrt(2 * dev * dev / 1.0)) < 1e-12);

    // aggregation must not depend on the worker count
    train::BenchmarkReport rep2 =
        train::run_benchmark(m, slim_flstm(), train::Protocol::kZeroTime, 2, base, 2);
    CHECK(train::benchmark_json(rep) == train::benchmark_json(rep2));

    nlohmann::json j = nlohmann::json::parse(train::benchmark_json(rep));
    CHECK(j["protocol"] == "zero-time");
    CHECK(j["folds"].size() == 2);
    std::string table = train::benchmark_table(rep);
    CHECK(table.find("model flstm") != std::string::npos);
    CHECK(table.find("mean accuracy") != std::string::npos);
}

TEST_CASE("varying-time protocol reports checkpoint profile and lead time") {
    data::DatasetManifest m = synth(20, 34);
    train::TrainConfig base = fast_config(2);
    train::BenchmarkReport rep =
        train::run_benchmark(m, slim_flstm(), train::Protocol::kVaryingTime, 2, base, 1);

    for (double a : rep.checkpoint_accuracy) {
        CHECK(a >= 0);
        CHECK(a <= 1);
    }
    CHECK(rep.mean_tum_seconds >= 0);
    CHECK(rep.mean_tum_seconds <= 5);

    std::string csv = train::checkpoint_csv(rep);
    std::size_t lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    CHECK(lines == 6);
    CHECK(csv.rfind("seconds_before,accuracy\n5,", 0) == 0);

    std::string svg = train::checkpoint_svg(rep);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);

    std::string table = train::benchmark_table(rep);
    CHECK(table.find("checkpoint accuracy") != std::string::npos);
    CHECK(table.find("mean time-until-maneuver") != std::string::npos);
}

TEST_CASE("modality ablation trains all four cells on one holdout") {
    data::DatasetManifest m = synth(20, 35, /*uniform=*/true);
    train::TrainConfig base = fast_config(2);
    train::AblationReport rep = train::run_ablation(m, slim_flstm(), slim_ftf(), base, 2);

    CHECK(rep.train_count == 16);
    CHECK(rep.test_count == 4);
    REQUIRE(rep.cells.size() == 4);
    std::array<const char*, 4> names = {"flstm_full", "flstm_interior", "ftf_full",
                                        "ftf_interior"};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(rep.cells[i].name == names[i]);
        CHECK(rep.cells[i].interior_only == (i % 2 == 1));
        CHECK(rep.cells[i].arch == (i < 2 ? "flstm" : "ftf"));
        CHECK(rep.cells[i].eval.total == 4);
    }

    nlohmann::json j = nlohmann::json::parse(train::ablation_json(rep));
    CHECK(j["cells"].size() == 4);
    std::string table = train::ablation_table(rep);
    for (const char* name : names) CHECK(table.find(name) != std::string::npos);
}

TEST_CASE("single-result JSON writer") {
    std::array<std::array<std::size_t, 5>, 5> c{};
    c[0][0] = 3;
    c[1][0] = 1;
    train::EvalResult e = train::metrics_from_confusion(c);
    nlohmann::json j = nlohmann::json::parse(train::eval_json(e));
    CHECK(j["total"] == 4);
    CHECK(j["confusion"][1][0] == 1);
    CHECK(j.contains("macro_f1"));
}

}  // TEST_SUITE
