#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "mfusion/dataset.hpp"
#include "mfusion/errors.hpp"
#include "mfusion/io_util.hpp"
#include "mfusion/landmarks.hpp"
#include "mfusion/log.hpp"
#include "mfusion/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mfusion::data {
namespace {

// detections.jsonl: `{"frame": int, "detections": [{"cx","cy","w","h","class_id"}]}`
// per line; frames without a line are empty. Throws ValidationError on bad lines.
std::vector<std::vector<feat::Detection>> read_detections(const fs::path& path) {
    std::vector<std::vector<feat::Detection>> frames(feat::kSeqLen);
    std::vector<bool> seen(feat::kSeqLen, false);
    std::vector<std::string> lines = io::read_lines(path);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const std::string where = path.string() + " line " + std::to_string(li + 1);
        json j = json::parse(lines[li], nullptr, false);
        if (j.is_discarded()) throw ValidationError(where + ": not valid JSON");
        if (!j.is_object() || !j.contains("frame") || !j["frame"].is_number_integer())
            throw ValidationError(where + ": missing integer 'frame'");
        long frame = j["frame"].get<long>();
        if (frame < 0 || frame >= static_cast<long>(feat::kSeqLen))
            throw ValidationError(where + ": frame index out of range");
        auto f = static_cast<std::size_t>(frame);
        if (seen[f]) throw ValidationError(where + ": duplicate frame " + std::to_string(frame));
        seen[f] = true;
        if (!j.contains("detections") || !j["detections"].is_array())
            throw ValidationError(where + ": missing 'detections' array");
        for (const json& dj : j["detections"]) {
            if (!dj.is_object() || !dj.contains("cx") || !dj.contains("cy") ||
                !dj.contains("w") || !dj.contains("h") || !dj.contains("class_id"))
                throw ValidationError(where + ": detection missing cx/cy/w/h/class_id");
            feat::Detection d;
            d.cx = dj["cx"].get<double>();
            d.cy = dj["cy"].get<double>();
            d.w = dj["w"].get<double>();
            d.h = dj["h"].get<double>();
            d.class_id = dj["class_id"].get<int>();
            frames[f].push_back(d);
        }
    }
    return frames;
}

// lanes.json: one `{"lane_position","num_lanes","near_intersection"}` object,
// held constant across the clip.
feat::LaneInfo read_lanes(const fs::path& path) {
    json j = json::parse(io::read_file(path), nullptr, false);
    if (j.is_discarded()) throw ValidationError(path.string() + ": not valid JSON");
    if (!j.is_object() || !j.contains("lane_position") || !j.contains("num_lanes") ||
        !j.contains("near_intersection"))
        throw ValidationError(path.string() +
                              ": expected lane_position/num_lanes/near_intersection");
    feat::LaneInfo info;
    info.lane_position = j["lane_position"].get<int>();
    info.num_lanes = j["num_lanes"].get<int>();
    info.near_intersection = j["near_intersection"].get<int>();
    return info;
}

feat::LabeledSequence assemble_video(const fs::path& dir, const std::string& id, int label,
                                     const LayoutDescriptor& layout) {
    auto records = geom::read_gaze_records(dir / layout.gaze_file);
    if (records.size() != feat::kSeqLen)
        throw ValidationError(dir.string() + ": expected " + std::to_string(feat::kSeqLen) +
                              " gaze records, got " + std::to_string(records.size()));
    std::vector<std::array<double, feat::kGazeDims>> gaze(feat::kSeqLen);
    int valid = 0;
    for (std::size_t t = 0; t < feat::kSeqLen; ++t) {
        if (records[t].first != static_cast<int>(t))
            throw ValidationError(dir.string() + ": gaze frames must run 0.." +
                                  std::to_string(feat::kSeqLen - 1) + " in order");
        const geom::GazeVector& g = records[t].second;
        gaze[t] = {g.head_x, g.head_y, g.gaze_x, g.gaze_y};
        if (g.valid) ++valid;
    }
    auto objects = read_detections(dir / layout.detections_file);
    std::vector<feat::LaneInfo> lanes(feat::kSeqLen, read_lanes(dir / layout.lanes_file));
    feat::LabeledSequence seq = feat::assemble_sequence(id, label, gaze, objects, lanes);
    seq.valid_frames = valid;
    return seq;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

LayoutDescriptor LayoutDescriptor::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("layout descriptor: not valid JSON");
    if (!j.is_object() || !j.contains("labels") || !j["labels"].is_object() ||
        j["labels"].empty())
        throw ValidationError("layout descriptor: missing non-empty 'labels' object");
    LayoutDescriptor d;
    for (const auto& [folder, id] : j["labels"].items()) {
        if (!id.is_number_integer())
            throw ValidationError("layout descriptor: label for '" + folder +
                                  "' must be an integer");
        int v = id.get<int>();
        if (v < 0 || v >= static_cast<int>(feat::kNumClasses))
            throw ValidationError("layout descriptor: label id " + std::to_string(v) +
                                  " out of range");
        d.labels[folder] = v;
    }
    if (j.contains("gaze_file")) d.gaze_file = j["gaze_file"].get<std::string>();
    if (j.contains("detections_file")) d.detections_file = j["detections_file"].get<std::string>();
    if (j.contains("lanes_file")) d.lanes_file = j["lanes_file"].get<std::string>();
    return d;
}

DatasetManifest ingest_real(const fs::path& root, const LayoutDescriptor& layout) {
    if (!fs::exists(root) || !fs::is_directory(root))
        throw IoError("dataset root is not a directory: " + root.string());
    DatasetManifest out;
    out.source = "real-adapter";
    bool any_label_dir = false;
    for (const fs::path& label_dir : sorted_subdirs(root)) {
        auto it = layout.labels.find(label_dir.filename().string());
        if (it == layout.labels.end()) {
            log::info("ignoring unlabeled folder " + label_dir.string());
            continue;
        }
        any_label_dir = true;
        for (const fs::path& video_dir : sorted_subdirs(label_dir)) {
            std::string id = it->first + "/" + video_dir.filename().string();
            try {
                out.sequences.push_back(assemble_video(video_dir, id, it->second, layout));
            } catch (const Error& e) {
                log::info("warning: skipping " + id + ": " + e.what());
                ++out.skipped;
            }
        }
    }
    if (!any_label_dir)
        throw DatasetError("no labeled maneuver folders under " + root.string());
    if (out.sequences.empty())
        throw DatasetError("no usable videos under " + root.string() + " (" +
                           std::to_string(out.skipped) + " skipped)");
    out.recount();
    return out;
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
    if (fold >= folds.size()) throw ValidationError("fold index out of range");
    std::set<std::size_t> test(folds[fold].begin(), folds[fold].end());
    std::size_t total = 0;
    for (const auto& f : folds) total += f.size();
    std::vector<std::size_t> train;
    train.reserve(total - test.size());
    for (std::size_t i = 0; i < total; ++i) {
        if (!test.count(i)) train.push_back(i);
    }
    return train;
}

FoldSplit stratified_kfold(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("stratified k-fold needs k >= 2");
    std::array<std::vector<std::size_t>, feat::kNumClasses> by_class;
    for (std::size_t i = 0; i < manifest.sequences.size(); ++i) {
        int label = manifest.sequences[i].label;
        if (label < 0 || label >= static_cast<int>(feat::kNumClasses))
            throw ValidationError("sequence label out of range: " + std::to_string(label));
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }
    for (const auto& members : by_class) {
        if (!members.empty() && members.size() < k)
            throw ValidationError("k exceeds smallest class count (" +
                                  std::to_string(members.size()) + " < " + std::to_string(k) +
                                  ")");
    }

    Rng rng(seed);
    FoldSplit split;
    split.k = k;
    split.folds.assign(k, {});
    std::vector<std::size_t> sizes(k, 0);
    for (auto& members : by_class) {
        if (members.empty()) continue;
        rng.shuffle(members);
        std::size_t q = members.size() / k;
        std::size_t r = members.size() % k;
        // Hand the r remainder items to the currently least-loaded folds
        // (ties to the lowest index) so overall fold sizes differ by at most
        // one while each class stays within one per fold.
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
        std::size_t next = 0;
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t fold = order[j];
            std::size_t take = q + (j < r ? 1 : 0);
            for (std::size_t c = 0; c < take; ++c)
                split.folds[fold].push_back(members[next++]);
            sizes[fold] += take;
        }
    }
    for (auto& fold : split.folds) std::sort(fold.begin(), fold.end());
    return split;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& jsonl_path,
                   const fs::path& sidecar_path, const std::string& provenance_json) {
    feat::write_sequences(jsonl_path, manifest.sequences);
    nlohmann::ordered_json j;
    j["source"] = manifest.source;
    j["n_sequences"] = manifest.sequences.size();
    j["class_counts"] = manifest.class_counts;
    j["skipped"] = manifest.skipped;
    if (provenance_json.empty()) {
        j["provenance"] = nullptr;
    } else {
        json p = json::parse(provenance_json, nullptr, false);
        if (p.is_discarded()) throw ValidationError("provenance is not valid JSON");
        j["provenance"] = p;
    }
    io::atomic_write(sidecar_path, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const fs::path& jsonl_path) {
    DatasetManifest out;
    out.sequences = feat::read_sequences(jsonl_path);
    out.source = "file";
    out.recount();
    return out;
}

}  // namespace mfusion::data
