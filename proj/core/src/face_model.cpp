#include "json.hpp"
#include "mfusion/geometry.hpp"

namespace mfusion::geom {

namespace {

// covariance determinant of the point cloud; ~0 for coplanar sets
double cloud_spread(const std::vector<Vec3>& pts) {
    Vec3 mean{};
    for (const auto& p : pts)
        for (int i = 0; i < 3; ++i) mean[i] += p[i] / static_cast<double>(pts.size());
    Mat3 cov{};
    for (const auto& p : pts) {
        const Vec3 d = {p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov[r * 3 + c] += d[r] * d[c];
    }
    return det(cov);
}

}  // namespace

const Vec3* ModelFace::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return &points[i];
    }
    return nullptr;
}

ModelFace ModelFace::generic() {
    // 26 canonical landmarks, meters, alphabetical. Eye centers sit 64 mm
    // apart on the x axis; the nose tip protrudes toward the camera
    // (negative z); y grows downward like image rows.
    static const std::vector<std::pair<std::string, Vec3>> kPoints = {
        {"chin", {0.000, 0.110, -0.010}},
        {"forehead", {0.000, -0.055, -0.012}},
        {"left_brow_inner", {-0.018, -0.020, -0.006}},
        {"left_brow_outer", {-0.044, -0.024, 0.000}},
        {"left_cheek", {-0.045, 0.045, 0.010}},
        {"left_eye_center", {-0.032, 0.000, 0.000}},
        {"left_eye_inner", {-0.014, 0.000, 0.005}},
        {"left_eye_outer", {-0.050, 0.002, 0.010}},
        {"left_jaw", {-0.050, 0.085, 0.015}},
        {"left_temple", {-0.058, -0.020, 0.020}},
        {"mouth_bottom", {0.000, 0.078, -0.016}},
        {"mouth_left", {-0.026, 0.070, -0.012}},
        {"mouth_right", {0.026, 0.070, -0.012}},
        {"mouth_top", {0.000, 0.062, -0.018}},
        {"nose_left", {-0.016, 0.038, -0.018}},
        {"nose_right", {0.016, 0.038, -0.018}},
        {"nose_root", {0.000, 0.003, -0.008}},
        {"nose_tip", {0.000, 0.035, -0.035}},
        {"right_brow_inner", {0.018, -0.020, -0.006}},
        {"right_brow_outer", {0.044, -0.024, 0.000}},
        {"right_cheek", {0.045, 0.045, 0.010}},
        {"right_eye_center", {0.032, 0.000, 0.000}},
        {"right_eye_inner", {0.014, 0.000, 0.005}},
        {"right_eye_outer", {0.050, 0.002, 0.010}},
        {"right_jaw", {0.050, 0.085, 0.015}},
        {"right_temple", {0.058, -0.020, 0.020}},
    };
    ModelFace face;
    for (const auto& [name, p] : kPoints) {
        face.names.push_back(name);
        face.points.push_back(p);
    }
    return face;
}

ModelFace ModelFace::from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("face model: ") + e.what());
    }
    if (!doc.contains("landmarks") || !doc["landmarks"].is_object()) {
        throw ValidationError("face model: missing \"landmarks\" object");
    }
    ModelFace face;
    for (const auto& [name, coords] : doc["landmarks"].items()) {
        if (!coords.is_array() || coords.size() != 3) {
            throw ValidationError("face model: landmark " + name + " is not a 3-vector");
        }
        face.names.push_back(name);
        face.points.push_back(
            {coords[0].get<double>(), coords[1].get<double>(), coords[2].get<double>()});
    }
    if (face.size() < 6) {
        throw ValidationError("face model: need at least 6 landmarks, got " +
                              std::to_string(face.size()));
    }
    if (cloud_spread(face.points) < 1e-18) {
        throw ValidationError("face model: landmarks are coplanar");
    }
    return face;
}

}  // namespace mfusion::geom
