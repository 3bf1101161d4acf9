#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfusion/errors.hpp"

namespace mfusion::geom {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;      // row-major
using Affine3 = std::array<double, 12>;  // row-major 3x4, [A | b]

inline constexpr Mat3 kIdentity3 = {1, 0, 0, 0, 1, 0, 0, 0, 1};

Vec3 mul(const Mat3& m, const Vec3& v);
Mat3 mul(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& m);
double det(const Mat3& m);

// Rotation from an axis-angle vector (angle = |w|, axis = w/|w|).
Mat3 axis_angle_to_mat(const Vec3& w);
// Geodesic angle between two rotations, in radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);
// Nearest rotation matrix in the Frobenius sense.
Mat3 orthonormalize(const Mat3& m);

struct CameraIntrinsics {
    double fx = 1000.0;
    double fy = 1000.0;
    double cx = 640.0;
    double cy = 360.0;
};

struct Pose {
    Mat3 r = kIdentity3;
    Vec3 t = {0, 0, 0};

    Vec3 apply(const Vec3& p) const {
        const Vec3 rp = mul(r, p);
        return {rp[0] + t[0], rp[1] + t[1], rp[2] + t[2]};
    }
};

// Canonical 3D face: named landmarks in a face-centered frame (x right,
// y down, z increasing away from the camera when the face looks at it; the
// nose points toward negative z). Units are meters.
struct ModelFace {
    std::vector<std::string> names;  // lexicographic
    std::vector<Vec3> points;        // parallel to names

    std::size_t size() const { return names.size(); }
    const Vec3* find(const std::string& name) const;

    static ModelFace generic();
    static ModelFace from_json(const std::string& json_text);
};

// Per-frame 2D landmarks plus the optional source-space 3D estimates needed
// for the eye rays. Source space is whatever frame the upstream landmark
// detector reports; fit_affine3d maps it onto the canonical model.
struct LandmarkFrame {
    int frame = 0;
    std::map<std::string, Vec2> landmarks;    // pixel (u, v)
    std::map<std::string, Vec3> landmarks3d;  // source-space estimates, optional
    std::optional<Vec3> left_center, left_pupil, right_center, right_pupil;
};

// Head and gaze points on the windshield plane, in plane units (meters
// divided by kPlaneHalfWidth, so typical values land in roughly [-1, 1]).
struct GazeVector {
    double head_x = 0, head_y = 0, gaze_x = 0, gaze_y = 0;
    bool valid = false;
};

inline constexpr double kPlaneHalfWidth = 0.5;
inline constexpr Pose kDefaultHeadInit{kIdentity3, {0, 0, 0.7}};

// Thrown when the LM loop rejects 10 consecutive steps; carries the best pose
// seen and its mean squared reprojection error.
struct PnpDivergence : GeometryError {
    PnpDivergence(const std::string& msg, Pose p, double res)
        : GeometryError(msg), last_pose(p), residual(res) {}
    Pose last_pose;
    double residual;
};

// Pinhole projection u = fx X/Z + cx, v = fy Y/Z + cy of (X,Y,Z) = R p + t.
// Throws GeometryError naming the point index if any depth is non-positive.
Vec2 project_point(const Vec3& p, const Pose& pose, const CameraIntrinsics& cam);
std::vector<Vec2> project(const std::vector<Vec3>& points, const Pose& pose,
                          const CameraIntrinsics& cam);

double mean_sq_reprojection(const std::vector<Vec3>& points, const std::vector<Vec2>& observed,
                            const CameraIntrinsics& cam, const Pose& pose);

// Levenberg-Marquardt on axis-angle + translation, minimizing mean squared
// reprojection error. Needs >= 6 correspondences and an init pose with all
// points in front of the camera.
Pose solve_pnp(const std::vector<Vec3>& model_points, const std::vector<Vec2>& observed,
               const CameraIntrinsics& cam, const Pose& init);

// Least-squares affine A with A [p;1] ~ q. Needs >= 4 correspondences with a
// non-coplanar source configuration.
Affine3 fit_affine3d(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);
Vec3 apply_affine(const Affine3& a, const Vec3& p);

// Intersection of the infinite line through `origin` and `through` with the
// plane z = plane_z. Throws GeometryError when the line is parallel
// (|dz| < 1e-12).
Vec2 ray_plane(const Vec3& origin, const Vec3& through, double plane_z);

// Full per-frame pipeline: PnP head pose from named 2D landmarks, head ray
// along the face forward axis, per-eye rays through affine-mapped eye
// center/pupil pairs averaged on the plane. Any per-frame failure yields the
// all-zero sentinel with valid=false; nothing throws.
GazeVector extract_gaze_vector(const LandmarkFrame& frame, const ModelFace& model,
                               const CameraIntrinsics& cam, double plane_z = 0.0,
                               const Pose& init = kDefaultHeadInit);

}  // namespace mfusion::geom
