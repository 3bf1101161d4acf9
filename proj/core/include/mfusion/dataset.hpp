#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfusion/encoders.hpp"
#include "mfusion/sequence_io.hpp"

namespace mfusion::data {

struct DatasetManifest {
    std::vector<feat::LabeledSequence> sequences;
    std::array<int, feat::kNumClasses> class_counts{};
    std::string source;  // "synthetic" | "real-adapter" | "file"
    std::size_t skipped = 0;

    void recount();  // recompute class_counts from sequences
};

struct SynthConfig {
    std::size_t n_sequences = 100;
    // empirical maneuver distribution of the real dataset (counts
    // 234/124/58/123/55 over 594 videos)
    std::array<double, 5> class_distribution = {234.0 / 594.0, 124.0 / 594.0, 58.0 / 594.0,
                                                123.0 / 594.0, 55.0 / 594.0};
    double gaze_signal_strength = 1.0;
    double exterior_signal_strength = 0.8;
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;
};

// Deterministic scenario generator; a pure function of the config. Gaze
// drifts toward the maneuver side from a sampled onset (turns farther than
// lane changes, saccade pulses on top); lane context keeps every generated
// maneuver feasible; with probability exterior_signal_strength a sequence
// draws a label-informative exterior context (otherwise a neutral one), so
// at strength 0 exterior channels carry no label information at all.
DatasetManifest generate_synthetic(const SynthConfig& config);

// Maps maneuver folder names to label ids and names the per-video artifact
// files. Parsed from a small JSON config:
// `{"labels": {"folder": id, ...}, "gaze_file": "gaze.jsonl",
//   "detections_file": "detections.jsonl", "lanes_file": "lanes.json"}`
struct LayoutDescriptor {
    std::map<std::string, int> labels;
    std::string gaze_file = "gaze.jsonl";
    std::string detections_file = "detections.jsonl";
    std::string lanes_file = "lanes.json";

    static LayoutDescriptor from_json(const std::string& text);
};

// Walks root/<maneuver-folder>/<video-id>/ and assembles one sequence per
// video from its gaze/detections/lanes artifacts. Videos failing validation
// (wrong frame counts, unreadable artifacts) are skipped and logged.
DatasetManifest ingest_real(const std::filesystem::path& root, const LayoutDescriptor& layout);

struct FoldSplit {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> folds;  // test indices per fold

    std::vector<std::size_t> train_indices(std::size_t fold) const;
};

// Class-stratified k-fold: fold sizes differ by <= 1 overall and by <= 1
// within every class. Requires 2 <= k <= smallest class count.
FoldSplit stratified_kfold(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed);

// Sequences as JSONL plus a provenance sidecar JSON (source, n_sequences,
// class_counts, and generator config or ingest root).
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& jsonl_path,
                   const std::filesystem::path& sidecar_path, const std::string& provenance_json);
DatasetManifest load_manifest(const std::filesystem::path& jsonl_path);

}  // namespace mfusion::data
