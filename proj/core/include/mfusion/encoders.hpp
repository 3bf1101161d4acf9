#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mfusion/errors.hpp"

namespace mfusion::feat {

inline constexpr std::size_t kSeqLen = 150;
inline constexpr std::size_t kGazeDims = 4;
inline constexpr std::size_t kObjectSlots = 5;
inline constexpr std::size_t kObjectDims = 25;  // 5 slots x (cx, cy, h, w, class_id)
inline constexpr std::size_t kLaneDims = 3;
inline constexpr std::size_t kFrameDims = kGazeDims + kObjectDims + kLaneDims;  // 32
inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::array<std::size_t, 5> kKeepFrames = {30, 60, 90, 120, 150};

// column offsets inside a frame vector
inline constexpr std::size_t kGazeOffset = 0;
inline constexpr std::size_t kObjectOffset = kGazeDims;
inline constexpr std::size_t kLaneOffset = kGazeDims + kObjectDims;

// Maneuver labels. Counts in the real dataset run 234/124/58/123/55 in this
// order, so index 0 is also the majority class.
enum Maneuver : int {
    kStraight = 0,
    kLeftLaneChange = 1,
    kLeftTurn = 2,
    kRightLaneChange = 3,
    kRightTurn = 4,
};
const char* maneuver_name(int label);

struct Detection {
    double cx = 0, cy = 0;  // box center, normalized [0,1] image coords
    double w = 0, h = 0;    // normalized size, > 0
    int class_id = 0;       // 0..4 (Car, Pedestrian, Traffic light, Sign, Bus)
};

struct LaneInfo {
    int lane_position = 1;  // 1 = leftmost
    int num_lanes = 1;
    int near_intersection = 0;  // 0 or 1
};

using FrameVec = std::array<double, kFrameDims>;

struct LabeledSequence {
    std::string id;
    int label = 0;
    int valid_frames = static_cast<int>(kSeqLen);
    std::vector<FrameVec> frames;  // exactly kSeqLen
};

// Top-5 detections by area (w*h, ties by cx then cy ascending) as
// (cx, cy, h, w, class_id) slots; empty slots are (0,0,0,0,-1).
std::array<double, kObjectDims> encode_objects(const std::vector<Detection>& detections);

// [lane_position, num_lanes, near_intersection]
std::array<double, kLaneDims> encode_lanes(const LaneInfo& info);

// Stitch full streams (one entry per frame, all exactly kSeqLen long) into a
// LabeledSequence with valid_frames = kSeqLen.
LabeledSequence assemble_sequence(const std::string& id, int label,
                                  const std::vector<std::array<double, kGazeDims>>& gaze,
                                  const std::vector<std::vector<Detection>>& objects,
                                  const std::vector<LaneInfo>& lanes);

// Keep the first keep_frames frames verbatim and zero every later component
// (object class sentinels included: padding is literal zeros).
LabeledSequence truncate_and_pad(const LabeledSequence& seq, std::size_t keep_frames);

// Zero out masked modalities (gaze, objects, lanes) across all frames.
LabeledSequence apply_modality_mask(const LabeledSequence& seq, const std::array<bool, 3>& mask);

}  // namespace mfusion::feat
