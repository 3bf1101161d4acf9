#include "cli.hpp"

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfusion/dataset.hpp"
#include "mfusion/errors.hpp"
#include "mfusion/io_util.hpp"
#include "mfusion/landmarks.hpp"
#include "mfusion/models.hpp"
#include "mfusion/train.hpp"

namespace mfusion::cli {
namespace {

using nlohmann::ordered_json;

std::string fmt(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::array<bool, 3> mask_from_name(const std::string& name) {
    if (name == "interior") return {true, false, false};
    return {true, true, true};
}

model::ModelConfig model_from_name(const std::string& name) {
    if (name == "ftf") return model::FTfConfig{};
    return model::FLstmConfig{};
}

std::string scalar_token(const ordered_json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    throw ValidationError("config key '" + key + "' must be a scalar");
}

// Splices the key/value pairs of `--config FILE` in as flags right after the
// subcommand name. Every option takes its last occurrence, so flags given
// explicitly on the command line override the file.
std::vector<std::string> inject_config(std::vector<std::string> args) {
    std::string path;
    bool found = false;
    for (std::size_t i = 0; i < args.size() && !found; ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ValidationError("--config expects a file path");
            path = args[i + 1];
            found = true;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            found = true;
        }
    }
    if (!found) return args;

    ordered_json j;
    try {
        j = ordered_json::parse(io::read_file(path));
    } catch (const Error& e) {
        throw ValidationError(std::string("config file: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError("config file " + path + " must hold a JSON object");

    std::vector<std::string> tokens;
    for (const auto& [key, value] : j.items()) {
        if (key == "config") continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) tokens.push_back("--" + key);
            continue;
        }
        tokens.push_back("--" + key);
        tokens.push_back(scalar_token(value, key));
    }

    std::size_t sub_at = 0;  // first non-flag token is the subcommand
    while (sub_at < args.size() && args[sub_at].rfind('-', 0) == 0) ++sub_at;
    const auto splice = args.begin() + static_cast<std::ptrdiff_t>(std::min(sub_at + 1, args.size()));
    std::vector<std::string> result(args.begin(), splice);
    result.insert(result.end(), tokens.begin(), tokens.end());
    result.insert(result.end(), splice, args.end());
    return result;
}

// flags shared by every command that trains models
struct TrainFlags {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::size_t patience = 20;
    double val_fraction = 0.1;
    std::string mask = "all";
};

void add_train_flags(CLI::App* sub, TrainFlags& f, bool with_mask) {
    sub->add_option("--epochs", f.epochs, "training epochs")->capture_default_str();
    sub->add_option("--batch-size", f.batch_size, "minibatch size")->capture_default_str();
    sub->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--seed", f.seed, "RNG seed")->capture_default_str();
    sub->add_option("--patience", f.patience, "early-stop patience in epochs (0 disables)")
        ->capture_default_str();
    sub->add_option("--val-fraction", f.val_fraction, "validation holdout share (0 disables)")
        ->capture_default_str();
    if (with_mask)
        sub->add_option("--mask", f.mask, "modality mask: all streams or interior (gaze) only")
            ->check(CLI::IsMember({"all", "interior"}))
            ->capture_default_str();
}

train::TrainConfig to_train_config(const TrainFlags& f) {
    train::TrainConfig tc;
    tc.epochs = f.epochs;
    tc.batch_size = f.batch_size;
    tc.learning_rate = f.lr;
    tc.seed = f.seed;
    tc.early_stop_patience = f.patience;
    tc.val_fraction = f.val_fraction;
    tc.modality_mask = mask_from_name(f.mask);
    return tc;
}

struct ExtractGazeOpts {
    std::string input, out, face_model;
    std::optional<double> fx, fy, cx, cy;
    double plane_z = 0.0;
    bool json = false;
};

int cmd_extract_gaze(const ExtractGazeOpts& o, std::ostream& out) {
    const geom::LandmarkFile file = geom::read_landmarks(o.input);
    if (file.frames.empty()) throw ValidationError(o.input + ": no frames");

    geom::CameraIntrinsics cam = file.cam;
    if (o.fx) cam.fx = *o.fx;
    if (o.fy) cam.fy = *o.fy;
    if (o.cx) cam.cx = *o.cx;
    if (o.cy) cam.cy = *o.cy;
    const geom::ModelFace face = o.face_model.empty()
                                     ? geom::ModelFace::generic()
                                     : geom::ModelFace::from_json(io::read_file(o.face_model));

    std::vector<std::pair<int, geom::GazeVector>> records;
    records.reserve(file.frames.size());
    std::size_t failures = 0;
    for (const auto& frame : file.frames) {
        geom::GazeVector g = geom::extract_gaze_vector(frame, face, cam, o.plane_z);
        if (!g.valid) ++failures;
        records.emplace_back(frame.frame, g);
    }
    geom::write_gaze_records(o.out, records);

    if (o.json) {
        ordered_json j;
        j["frames"] = records.size();
        j["failures"] = failures;
        j["skipped"] = file.skipped;
        j["out"] = o.out;
        out << j.dump(2) << "\n";
    } else {
        out << records.size() << " frames, " << failures << " failures, " << file.skipped
            << " skipped\n";
    }
    return 0;
}

struct SynthOpts {
    std::size_t n = 100;
    std::uint64_t seed = 1;
    double gaze_strength = 1.0;
    double exterior_strength = 0.8;
    double noise_sigma = 0.05;
    std::string out;
    bool json = false;
};

int cmd_synth(const SynthOpts& o, std::ostream& out) {
    data::SynthConfig sc;
    sc.n_sequences = o.n;
    sc.seed = o.seed;
    sc.gaze_signal_strength = o.gaze_strength;
    sc.exterior_signal_strength = o.exterior_strength;
    sc.noise_sigma = o.noise_sigma;
    const data::DatasetManifest manifest = data::generate_synthetic(sc);

    ordered_json prov;
    prov["generator"] = "synthetic";
    prov["n_sequences"] = sc.n_sequences;
    prov["seed"] = sc.seed;
    prov["gaze_signal_strength"] = sc.gaze_signal_strength;
    prov["exterior_signal_strength"] = sc.exterior_signal_strength;
    prov["noise_sigma"] = sc.noise_sigma;
    const std::string sidecar = o.out + ".meta.json";
    data::save_manifest(manifest, o.out, sidecar, prov.dump());

    if (o.json) {
        ordered_json j;
        j["out"] = o.out;
        j["sidecar"] = sidecar;
        j["n_sequences"] = manifest.sequences.size();
        j["class_counts"] = manifest.class_counts;
        out << j.dump(2) << "\n";
    } else {
        out << "wrote " << manifest.sequences.size() << " sequences to " << o.out << " (counts:";
        for (int c : manifest.class_counts) out << " " << c;
        out << ")\n";
    }
    return 0;
}

struct EncodeOpts {
    std::string input, out, layout;
    bool json = false;
};

data::LayoutDescriptor default_layout() {
    data::LayoutDescriptor ld;
    for (int c = 0; c < static_cast<int>(feat::kNumClasses); ++c)
        ld.labels[feat::maneuver_name(c)] = c;
    return ld;
}

int cmd_encode(const EncodeOpts& o, std::ostream& out) {
    const data::LayoutDescriptor layout =
        o.layout.empty() ? default_layout()
                         : data::LayoutDescriptor::from_json(io::read_file(o.layout));
    const data::DatasetManifest manifest = data::ingest_real(o.input, layout);

    ordered_json prov;
    prov["root"] = o.input;
    ordered_json labels;
    for (const auto& [folder, label] : layout.labels) labels[folder] = label;
    prov["labels"] = labels;
    const std::string sidecar = o.out + ".meta.json";
    data::save_manifest(manifest, o.out, sidecar, prov.dump());

    if (o.json) {
        ordered_json j;
        j["out"] = o.out;
        j["sidecar"] = sidecar;
        j["n_sequences"] = manifest.sequences.size();
        j["skipped"] = manifest.skipped;
        j["class_counts"] = manifest.class_counts;
        out << j.dump(2) << "\n";
    } else {
        out << "encoded " << manifest.sequences.size() << " sequences from " << o.input
            << " (skipped " << manifest.skipped << ") to " << o.out << "\n";
    }
    return 0;
}

struct TrainOpts {
    std::string data, out;
    std::string model = "flstm";
    std::string protocol = "zero";
    TrainFlags flags;
    bool json = false;
};

int cmd_train(const TrainOpts& o, std::ostream& out) {
    const data::DatasetManifest manifest = data::load_manifest(o.data);
    train::TrainConfig tc = to_train_config(o.flags);
    tc.varying_time = o.protocol == "varying";
    const train::TrainResult result =
        train::train(manifest.sequences, model_from_name(o.model), tc);
    model::save_checkpoint(result.params, o.out);

    const train::EpochStats& last = result.history.back();
    if (o.json) {
        ordered_json j;
        j["arch"] = result.params.arch();
        j["epochs_run"] = result.history.size();
        j["best_epoch"] = result.best_epoch;
        j["early_stopped"] = result.early_stopped;
        j["final_train_loss"] = last.train_loss;
        if (last.val_loss) j["final_val_loss"] = *last.val_loss;
        j["param_count"] = result.params.store.param_count();
        j["out"] = o.out;
        out << j.dump(2) << "\n";
    } else {
        out << "trained " << result.params.arch() << ": " << result.history.size()
            << " epochs (best " << result.best_epoch + 1
            << (result.early_stopped ? ", early stop" : "") << "), train loss "
            << fmt(last.train_loss);
        if (last.val_loss) out << ", val loss " << fmt(*last.val_loss);
        out << "\nwrote checkpoint to " << o.out << "\n";
    }
    return 0;
}

struct EvalOpts {
    std::string data, weights, out;
    bool tum = false;
    bool json = false;
};

int cmd_eval(const EvalOpts& o, std::ostream& out) {
    const data::DatasetManifest manifest = data::load_manifest(o.data);
    const model::ModelParams params = model::load_checkpoint(o.weights);
    const train::EvalResult er = train::evaluate(params, manifest.sequences);

    ordered_json top;
    top["arch"] = params.arch();
    top["weights"] = o.weights;
    top["eval"] = ordered_json::parse(train::eval_json(er));
    std::optional<train::TumResult> tum;
    if (o.tum) {
        tum = train::compute_tum(params, manifest.sequences);
        ordered_json jt;
        jt["seconds_before"] = train::kSecondsBefore;
        jt["checkpoint_accuracy"] = tum->checkpoint_accuracy;
        jt["mean_tum_seconds"] = tum->mean_seconds;
        top["tum"] = jt;
    }
    const std::string payload = top.dump(2) + "\n";
    if (!o.out.empty()) io::atomic_write(o.out, payload);
    if (o.json) {
        out << payload;
        return 0;
    }

    out << "arch: " << params.arch() << "\n";
    out << "sequences: " << er.total << "\n";
    out << "accuracy: " << fmt(er.accuracy) << "  macro F1: " << fmt(er.macro_f1) << "\n";
    out << "\nclass               accuracy      f1\n";
    for (std::size_t c = 0; c < feat::kNumClasses; ++c) {
        char line[80];
        std::snprintf(line, sizeof line, "%-18s %9s %7s\n",
                      feat::maneuver_name(static_cast<int>(c)),
                      fmt(er.per_class_accuracy[c]).c_str(), fmt(er.per_class_f1[c]).c_str());
        out << line;
    }
    out << "\nconfusion (rows true, cols predicted):\n";
    for (std::size_t t = 0; t < feat::kNumClasses; ++t) {
        char head[32];
        std::snprintf(head, sizeof head, "%-18s", feat::maneuver_name(static_cast<int>(t)));
        out << head;
        for (std::size_t p = 0; p < feat::kNumClasses; ++p) {
            char cell[16];
            std::snprintf(cell, sizeof cell, " %5zu", er.confusion[t][p]);
            out << cell;
        }
        out << "\n";
    }
    if (tum) {
        out << "\ncheckpoint accuracy:";
        for (std::size_t i = 0; i < tum->checkpoint_accuracy.size(); ++i)
            out << " " << train::kSecondsBefore[i] << "s " << fmt(tum->checkpoint_accuracy[i], 3);
        out << "\nmean time-until-maneuver: " << fmt(tum->mean_seconds, 2) << " s\n";
    }
    return 0;
}

struct BenchOpts {
    std::string data, out, csv, svg;
    std::string model = "flstm";
    std::string protocol = "zero";
    std::size_t k = 10;
    std::size_t jobs = 0;
    TrainFlags flags;
    bool json = false;
};

int cmd_benchmark(const BenchOpts& o, std::ostream& out) {
    if (o.protocol != "varying" && (!o.csv.empty() || !o.svg.empty()))
        throw ValidationError("--csv/--svg describe checkpoint profiles; they need --protocol varying");
    const data::DatasetManifest manifest = data::load_manifest(o.data);
    const train::Protocol protocol =
        o.protocol == "varying" ? train::Protocol::kVaryingTime : train::Protocol::kZeroTime;
    const train::BenchmarkReport report = train::run_benchmark(
        manifest, model_from_name(o.model), protocol, o.k, to_train_config(o.flags), o.jobs);

    if (!o.out.empty()) io::atomic_write(o.out, train::benchmark_json(report));
    if (!o.csv.empty()) io::atomic_write(o.csv, train::checkpoint_csv(report));
    if (!o.svg.empty()) io::atomic_write(o.svg, train::checkpoint_svg(report));
    out << (o.json ? train::benchmark_json(report) : train::benchmark_table(report));
    return 0;
}

struct AblateOpts {
    std::string data, out;
    std::size_t jobs = 0;
    TrainFlags flags;
    bool json = false;
};

int cmd_ablate(const AblateOpts& o, std::ostream& out) {
    const data::DatasetManifest manifest = data::load_manifest(o.data);
    const train::AblationReport report = train::run_ablation(
        manifest, model::FLstmConfig{}, model::FTfConfig{}, to_train_config(o.flags), o.jobs);
    if (!o.out.empty()) io::atomic_write(o.out, train::ablation_json(report));
    out << (o.json ? train::ablation_json(report) : train::ablation_table(report));
    return 0;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"multimodal driver maneuver prediction pipeline"};
    app.name("mfusion");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    std::string config_path;  // consumed by inject_config; registered so parsing accepts it
    ExtractGazeOpts eg;
    SynthOpts sy;
    EncodeOpts en;
    TrainOpts tr;
    EvalOpts ev;
    BenchOpts be;
    AblateOpts ab;

    const auto add_common = [&](CLI::App* sub, bool& json_flag) {
        sub->add_option("--config", config_path, "JSON file with flag values (explicit flags win)");
        sub->add_flag("--json", json_flag, "machine-readable output on stdout");
    };

    CLI::App* s_eg =
        app.add_subcommand("extract-gaze", "project facial landmarks to head/gaze plane points");
    s_eg->add_option("--input", eg.input, "landmark JSONL file")->required();
    s_eg->add_option("--out", eg.out, "gaze JSONL output path")->required();
    s_eg->add_option("--face-model", eg.face_model, "canonical 3D face JSON (default built-in)");
    s_eg->add_option("--fx", eg.fx, "focal length x override (default: file header)");
    s_eg->add_option("--fy", eg.fy, "focal length y override");
    s_eg->add_option("--cx", eg.cx, "principal point x override");
    s_eg->add_option("--cy", eg.cy, "principal point y override");
    s_eg->add_option("--plane-z", eg.plane_z, "gaze plane depth")->capture_default_str();
    add_common(s_eg, eg.json);

    CLI::App* s_sy = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    s_sy->add_option("--n", sy.n, "number of sequences")->capture_default_str();
    s_sy->add_option("--seed", sy.seed, "generator seed")->capture_default_str();
    s_sy->add_option("--gaze-strength", sy.gaze_strength, "gaze signal strength [0,1]")
        ->capture_default_str();
    s_sy->add_option("--exterior-strength", sy.exterior_strength,
                     "exterior context informativeness [0,1]")
        ->capture_default_str();
    s_sy->add_option("--noise-sigma", sy.noise_sigma, "gaussian noise level")->capture_default_str();
    s_sy->add_option("--out", sy.out, "dataset JSONL output path")->required();
    add_common(s_sy, sy.json);

    CLI::App* s_en = app.add_subcommand("encode", "assemble a dataset from per-video artifacts");
    s_en->add_option("--input", en.input, "dataset root directory")->required();
    s_en->add_option("--out", en.out, "dataset JSONL output path")->required();
    s_en->add_option("--layout", en.layout, "layout descriptor JSON (default: maneuver names)");
    add_common(s_en, en.json);

    CLI::App* s_tr = app.add_subcommand("train", "train one model on a dataset file");
    s_tr->add_option("--data", tr.data, "dataset JSONL")->required();
    s_tr->add_option("--model", tr.model, "architecture")
        ->check(CLI::IsMember({"flstm", "ftf"}))
        ->capture_default_str();
    s_tr->add_option("--protocol", tr.protocol, "zero: full sequences; varying: expand truncations")
        ->check(CLI::IsMember({"zero", "varying"}))
        ->capture_default_str();
    s_tr->add_option("--out", tr.out, "checkpoint output path")->required();
    add_train_flags(s_tr, tr.flags, true);
    add_common(s_tr, tr.json);

    CLI::App* s_ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset file");
    s_ev->add_option("--data", ev.data, "dataset JSONL")->required();
    s_ev->add_option("--weights", ev.weights, "checkpoint path")->required();
    s_ev->add_option("--out", ev.out, "also write the JSON report here");
    s_ev->add_flag("--tum", ev.tum, "add checkpoint accuracies and time-until-maneuver");
    add_common(s_ev, ev.json);

    CLI::App* s_be = app.add_subcommand("benchmark", "stratified k-fold cross-validation");
    s_be->add_option("--data", be.data, "dataset JSONL")->required();
    s_be->add_option("--model", be.model, "architecture")
        ->check(CLI::IsMember({"flstm", "ftf"}))
        ->capture_default_str();
    s_be->add_option("--protocol", be.protocol, "zero-time or varying-time protocol")
        ->check(CLI::IsMember({"zero", "varying"}))
        ->capture_default_str();
    s_be->add_option("--k", be.k, "number of folds")->capture_default_str();
    s_be->add_option("--jobs", be.jobs, "concurrent folds (0 = one thread per fold)")
        ->capture_default_str();
    s_be->add_option("--out", be.out, "write the JSON report here");
    s_be->add_option("--csv", be.csv, "write checkpoint accuracies as CSV (varying only)");
    s_be->add_option("--svg", be.svg, "write the checkpoint profile chart (varying only)");
    add_train_flags(s_be, be.flags, true);
    add_common(s_be, be.json);

    CLI::App* s_ab = app.add_subcommand("ablate", "full vs interior-only ablation, both models");
    s_ab->add_option("--data", ab.data, "dataset JSONL")->required();
    s_ab->add_option("--jobs", ab.jobs, "concurrent trainings (0 = one per cell)")
        ->capture_default_str();
    s_ab->add_option("--out", ab.out, "write the JSON report here");
    add_train_flags(s_ab, ab.flags, false);
    add_common(s_ab, ab.json);

    try {
        args = inject_config(std::move(args));
        std::vector<const char*> argv;
        argv.reserve(args.size() + 1);
        argv.push_back("mfusion");
        for (const std::string& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (s_eg->parsed()) return cmd_extract_gaze(eg, out);
        if (s_sy->parsed()) return cmd_synth(sy, out);
        if (s_en->parsed()) return cmd_encode(en, out);
        if (s_tr->parsed()) return cmd_train(tr, out);
        if (s_ev->parsed()) return cmd_eval(ev, out);
        if (s_be->parsed()) return cmd_benchmark(be, out);
        if (s_ab->parsed()) return cmd_ablate(ab, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DatasetError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {  // io, numeric, shape, geometry: runtime failures
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace mfusion::cli
