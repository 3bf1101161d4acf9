#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "mfusion/train.hpp"

namespace mfusion::train {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json eval_to_json(const EvalResult& e) {
    ordered_json j;
    j["total"] = e.total;
    j["accuracy"] = e.accuracy;
    j["macro_f1"] = e.macro_f1;
    j["per_class_accuracy"] = e.per_class_accuracy;
    j["per_class_f1"] = e.per_class_f1;
    j["confusion"] = e.confusion;
    return j;
}

std::string fmt(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string eval_json(const EvalResult& result) { return eval_to_json(result).dump(2) + "\n"; }

std::string benchmark_json(const BenchmarkReport& report) {
    ordered_json j;
    j["arch"] = report.arch;
    j["protocol"] = protocol_name(report.protocol);
    j["k"] = report.k;
    j["seed"] = report.seed;
    j["modality_mask"] = report.modality_mask;
    j["mean_accuracy"] = report.mean_accuracy;
    j["std_accuracy"] = report.std_accuracy;
    j["mean_macro_f1"] = report.mean_macro_f1;
    j["std_macro_f1"] = report.std_macro_f1;
    j["confusion"] = report.confusion;
    j["per_class_accuracy"] = report.per_class_accuracy;
    if (report.protocol == Protocol::kVaryingTime) {
        ordered_json cp = ordered_json::array();
        for (std::size_t i = 0; i < 5; ++i) {
            cp.push_back({{"seconds_before", kSecondsBefore[i]},
                          {"keep_frames", feat::kKeepFrames[i]},
                          {"accuracy", report.checkpoint_accuracy[i]}});
        }
        j["checkpoint_accuracy"] = cp;
        j["mean_tum_seconds"] = report.mean_tum_seconds;
    }
    ordered_json folds = ordered_json::array();
    for (const FoldReport& f : report.folds) {
        ordered_json jf;
        jf["fold"] = f.fold;
        jf["train_count"] = f.train_count;
        jf["test_count"] = f.test_count;
        jf["eval"] = eval_to_json(f.eval);
        if (report.protocol == Protocol::kVaryingTime) {
            jf["checkpoint_accuracy"] = f.tum.checkpoint_accuracy;
            jf["mean_tum_seconds"] = f.tum.mean_seconds;
        }
        folds.push_back(std::move(jf));
    }
    j["folds"] = std::move(folds);
    return j.dump(2) + "\n";
}

std::string benchmark_table(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "model " << report.arch << "  protocol " << protocol_name(report.protocol) << "  k="
        << report.k << "  seed=" << report.seed << "  mask="
        << (report.modality_mask[0] ? "g" : "-") << (report.modality_mask[1] ? "o" : "-")
        << (report.modality_mask[2] ? "l" : "-") << "\n\n";
    out << "fold  accuracy  macro_f1  test\n";
    for (const FoldReport& f : report.folds) {
        out << f.fold << "     " << fmt(f.eval.accuracy) << "    " << fmt(f.eval.macro_f1)
            << "    " << f.test_count << "\n";
    }
    out << "\nmean accuracy " << fmt(report.mean_accuracy) << " +- " << fmt(report.std_accuracy)
        << "\nmean macro F1 " << fmt(report.mean_macro_f1) << " +- " << fmt(report.std_macro_f1)
        << "\n\nconfusion (rows true, cols predicted):\n";
    out << "                ";
    for (std::size_t p = 0; p < feat::kNumClasses; ++p) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%12s", feat::maneuver_name(static_cast<int>(p)));
        out << buf;
    }
    out << "\n";
    for (std::size_t t = 0; t < feat::kNumClasses; ++t) {
        char head[24];
        std::snprintf(head, sizeof head, "%-16s", feat::maneuver_name(static_cast<int>(t)));
        out << head;
        for (std::size_t p = 0; p < feat::kNumClasses; ++p) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%12zu", report.confusion[t][p]);
            out << buf;
        }
        out << "  recall " << fmt(report.per_class_accuracy[t]) << "\n";
    }
    if (report.protocol == Protocol::kVaryingTime) {
        out << "\ncheckpoint accuracy:\n";
        for (std::size_t i = 0; i < 5; ++i) {
            out << "  " << kSecondsBefore[i] << " s before (" << feat::kKeepFrames[i]
                << " frames): " << fmt(report.checkpoint_accuracy[i]) << "\n";
        }
        out << "mean time-until-maneuver: " << fmt(report.mean_tum_seconds, 2) << " s\n";
    }
    return out.str();
}

std::string checkpoint_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "seconds_before,accuracy\n";
    for (std::size_t i = 0; i < 5; ++i) {
        out << kSecondsBefore[i] << "," << fmt(report.checkpoint_accuracy[i], 6) << "\n";
    }
    return out.str();
}

std::string checkpoint_svg(const BenchmarkReport& report) {
    // fixed 640x400 canvas; x runs 5 s (left) to 1 s (right), y is accuracy
    const double x0 = 70, x1 = 600, y0 = 340, y1 = 40;
    auto px = [&](std::size_t i) { return x0 + (x1 - x0) * static_cast<double>(i) / 4.0; };
    auto py = [&](double acc) { return y0 + (y1 - y0) * acc; };
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
           "viewBox=\"0 0 640 400\">\n"
        << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    // axes
    out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 10; tick += 2) {
        double acc = tick / 10.0;
        out << "<line x1=\"" << x0 - 4 << "\" y1=\"" << py(acc) << "\" x2=\"" << x0 << "\" y2=\""
            << py(acc) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << x0 - 10 << "\" y=\"" << py(acc) + 4
            << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(acc, 1) << "</text>\n";
    }
    for (std::size_t i = 0; i < 5; ++i) {
        out << "<text x=\"" << px(i) << "\" y=\"" << y0 + 20
            << "\" font-size=\"12\" text-anchor=\"middle\">" << kSecondsBefore[i] << " s</text>\n";
    }
    out << "<text x=\"335\" y=\"375\" font-size=\"13\" text-anchor=\"middle\">time before "
           "maneuver</text>\n";
    out << "<text x=\"20\" y=\"190\" font-size=\"13\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 20 190)\">accuracy</text>\n";
    out << "<text x=\"335\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">" << report.arch
        << " checkpoint accuracy (" << protocol_name(report.protocol) << ")</text>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < 5; ++i) {
        out << px(i) << "," << py(report.checkpoint_accuracy[i]) << " ";
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < 5; ++i) {
        out << "<circle cx=\"" << px(i) << "\" cy=\"" << py(report.checkpoint_accuracy[i])
            << "\" r=\"4\" fill=\"#1f77b4\"/>\n"
            << "<text x=\"" << px(i) << "\" y=\"" << py(report.checkpoint_accuracy[i]) - 10
            << "\" font-size=\"11\" text-anchor=\"middle\">"
            << fmt(report.checkpoint_accuracy[i], 3) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string ablation_json(const AblationReport& report) {
    ordered_json j;
    j["seed"] = report.seed;
    j["train_count"] = report.train_count;
    j["test_count"] = report.test_count;
    ordered_json cells = ordered_json::array();
    for (const AblationCell& c : report.cells) {
        ordered_json jc;
        jc["name"] = c.name;
        jc["arch"] = c.arch;
        jc["interior_only"] = c.interior_only;
        jc["eval"] = eval_to_json(c.eval);
        cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    return j.dump(2) + "\n";
}

std::string ablation_table(const AblationReport& report) {
    std::ostringstream out;
    out << "modality ablation  seed=" << report.seed << "  train=" << report.train_count
        << "  test=" << report.test_count << "\n\n";
    out << "cell             accuracy  macro_f1\n";
    for (const AblationCell& c : report.cells) {
        char head[24];
        std::snprintf(head, sizeof head, "%-16s", c.name.c_str());
        out << head << " " << fmt(c.eval.accuracy) << "    " << fmt(c.eval.macro_f1) << "\n";
    }
    double flstm_gap = 0, ftf_gap = 0;
    double full[2] = {0, 0}, interior[2] = {0, 0};
    for (const AblationCell& c : report.cells) {
        int a = c.arch == "flstm" ? 0 : 1;
        (c.interior_only ? interior : full)[a] = c.eval.accuracy;
    }
    flstm_gap = full[0] - interior[0];
    ftf_gap = full[1] - interior[1];
    out << "\nfull-minus-interior gap: flstm " << fmt(flstm_gap) << ", ftf " << fmt(ftf_gap)
        << "\n";
    return out.str();
}

}  // namespace mfusion::train
