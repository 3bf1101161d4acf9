#include "mfusion/encoders.hpp"

#include <algorithm>

namespace mfusion::feat {

const char* maneuver_name(int label) {
    switch (label) {
        case kStraight: return "straight";
        case kLeftLaneChange: return "left-lane-change";
        case kLeftTurn: return "left-turn";
        case kRightLaneChange: return "right-lane-change";
        case kRightTurn: return "right-turn";
        default: throw ValidationError("bad maneuver label " + std::to_string(label));
    }
}

std::array<double, kObjectDims> encode_objects(const std::vector<Detection>& detections) {
    for (const auto& d : detections) {
        if (d.class_id < 0 || d.class_id > 4) {
            throw ValidationError("detection class_id " + std::to_string(d.class_id) +
                                  " outside 0..4");
        }
        if (d.cx < 0 || d.cx > 1 || d.cy < 0 || d.cy > 1) {
            throw ValidationError("detection center outside [0,1]");
        }
        if (d.w <= 0 || d.h <= 0) throw ValidationError("detection box must have positive size");
    }
    std::vector<Detection> sorted = detections;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
        const double aa = a.w * a.h, ab = b.w * b.h;
        if (aa != ab) return aa > ab;
        if (a.cx != b.cx) return a.cx < b.cx;
        return a.cy < b.cy;
    });

    std::array<double, kObjectDims> out{};
    for (std::size_t slot = 0; slot < kObjectSlots; ++slot) {
        double* s = out.data() + slot * 5;
        if (slot < sorted.size()) {
            const Detection& d = sorted[slot];
            s[0] = d.cx;
            s[1] = d.cy;
            s[2] = d.h;
            s[3] = d.w;
            s[4] = static_cast<double>(d.class_id);
        } else {
            s[4] = -1.0;
        }
    }
    return out;
}

std::array<double, kLaneDims> encode_lanes(const LaneInfo& info) {
    if (info.lane_position < 1 || info.num_lanes < 1) {
        throw ValidationError("lane_position and num_lanes must be >= 1");
    }
    if (info.lane_position > info.num_lanes) {
        throw ValidationError("lane_position " + std::to_string(info.lane_position) +
                              " exceeds num_lanes " + std::to_string(info.num_lanes));
    }
    if (info.near_intersection != 0 && info.near_intersection != 1) {
        throw ValidationError("near_intersection must be 0 or 1");
    }
    return {static_cast<double>(info.lane_position), static_cast<double>(info.num_lanes),
            static_cast<double>(info.near_intersection)};
}

LabeledSequence assemble_sequence(const std::string& id, int label,
                                  const std::vector<std::array<double, kGazeDims>>& gaze,
                                  const std::vector<std::vector<Detection>>& objects,
                                  const std::vector<LaneInfo>& lanes) {
    if (label < 0 || label >= static_cast<int>(kNumClasses)) {
        throw ValidationError("bad maneuver label " + std::to_string(label));
    }
    auto check_len = [](const char* what, std::size_t n) {
        if (n != kSeqLen) {
            throw ValidationError(std::string(what) + " stream has " + std::to_string(n) +
                                  " frames, need " + std::to_string(kSeqLen));
        }
    };
    check_len("gaze", gaze.size());
    check_len("object", objects.size());
    check_len("lane", lanes.size());

    LabeledSequence seq;
    seq.id = id;
    seq.label = label;
    seq.valid_frames = static_cast<int>(kSeqLen);
    seq.frames.resize(kSeqLen);
    for (std::size_t t = 0; t < kSeqLen; ++t) {
        FrameVec& f = seq.frames[t];
        std::copy(gaze[t].begin(), gaze[t].end(), f.begin() + kGazeOffset);
        const auto obj = encode_objects(objects[t]);
        std::copy(obj.begin(), obj.end(), f.begin() + kObjectOffset);
        const auto lane = encode_lanes(lanes[t]);
        std::copy(lane.begin(), lane.end(), f.begin() + kLaneOffset);
    }
    return seq;
}

LabeledSequence truncate_and_pad(const LabeledSequence& seq, std::size_t keep_frames) {
    if (std::find(kKeepFrames.begin(), kKeepFrames.end(), keep_frames) == kKeepFrames.end()) {
        throw ValidationError("keep_frames must be one of {30,60,90,120,150}, got " +
                              std::to_string(keep_frames));
    }
    if (seq.frames.size() != kSeqLen) {
        throw ValidationError("sequence " + seq.id + " has " + std::to_string(seq.frames.size()) +
                              " frames, need " + std::to_string(kSeqLen));
    }
    LabeledSequence out;
    out.id = seq.id;
    out.label = seq.label;
    out.valid_frames = static_cast<int>(keep_frames);
    out.frames.resize(kSeqLen);
    for (std::size_t t = 0; t < keep_frames; ++t) out.frames[t] = seq.frames[t];
    for (std::size_t t = keep_frames; t < kSeqLen; ++t) out.frames[t].fill(0.0);
    return out;
}

LabeledSequence apply_modality_mask(const LabeledSequence& seq, const std::array<bool, 3>& mask) {
    LabeledSequence out = seq;
    for (auto& f : out.frames) {
        if (!mask[0]) std::fill(f.begin() + kGazeOffset, f.begin() + kGazeOffset + kGazeDims, 0.0);
        if (!mask[1])
            std::fill(f.begin() + kObjectOffset, f.begin() + kObjectOffset + kObjectDims, 0.0);
        if (!mask[2]) std::fill(f.begin() + kLaneOffset, f.begin() + kLaneOffset + kLaneDims, 0.0);
    }
    return out;
}

}  // namespace mfusion::feat
