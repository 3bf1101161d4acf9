#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "mfusion/geometry.hpp"

namespace mfusion::geom {

// Parsed landmark stream. `skipped` counts frame lines that were valid JSON
// but failed validation (missing keys, out-of-bounds coordinates) and were
// dropped with a logged warning; lines that are not JSON at all are fatal.
struct LandmarkFile {
    double width = 0;
    double height = 0;
    CameraIntrinsics cam;
    std::vector<LandmarkFrame> frames;
    std::size_t skipped = 0;
};

// File layout: line 1 is a header `{"width","height","fx","fy","cx","cy"}`,
// each further line one frame:
// `{"frame": int, "landmarks": {"name": [u,v], ...},
//   "landmarks3d": {"name": [x,y,z], ...},            (optional)
//   "eyes": {"left_center": [x,y,z]|null, "left_pupil": ...,
//            "right_center": ..., "right_pupil": ...}} (optional)`
LandmarkFile read_landmarks(const std::filesystem::path& path);

// GazeVector records as JSONL: `{"frame","valid","head_x","head_y","gaze_x","gaze_y"}`.
void write_gaze_records(const std::filesystem::path& path,
                        const std::vector<std::pair<int, GazeVector>>& records);
std::vector<std::pair<int, GazeVector>> read_gaze_records(const std::filesystem::path& path);

}  // namespace mfusion::geom
