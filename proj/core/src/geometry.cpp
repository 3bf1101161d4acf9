#include "mfusion/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace mfusion::geom {

namespace {

Eigen::Matrix3d to_eigen(const Mat3& m) {
    Eigen::Matrix3d e;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) e(r, c) = m[r * 3 + c];
    return e;
}

Mat3 from_eigen(const Eigen::Matrix3d& e) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[r * 3 + c] = e(r, c);
    return m;
}

}  // namespace

Vec3 mul(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
    return c;
}

Mat3 transpose(const Mat3& m) {
    return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

double det(const Mat3& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 axis_angle_to_mat(const Vec3& w) {
    const double theta = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    if (theta < 1e-12) {
        // first-order: I + [w]x
        return {1, -w[2], w[1], w[2], 1, -w[0], -w[1], w[0], 1};
    }
    const double x = w[0] / theta, y = w[1] / theta, z = w[2] / theta;
    const double c = std::cos(theta), s = std::sin(theta), v = 1.0 - c;
    return {c + x * x * v,     x * y * v - z * s, x * z * v + y * s,
            y * x * v + z * s, c + y * y * v,     y * z * v - x * s,
            z * x * v - y * s, z * y * v + x * s, c + z * z * v};
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
    const Mat3 rel = mul(transpose(a), b);
    const double tr = rel[0] + rel[4] + rel[8];
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

Mat3 orthonormalize(const Mat3& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(to_eigen(m),
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d vt = svd.matrixV().transpose();
    if ((u * vt).determinant() < 0) u.col(2) = -u.col(2);
    return from_eigen(u * vt);
}

Vec2 project_point(const Vec3& p, const Pose& pose, const CameraIntrinsics& cam) {
    if (cam.fx <= 0 || cam.fy <= 0) throw ValidationError("camera focal lengths must be positive");
    const Vec3 pc = pose.apply(p);
    if (pc[2] <= 0) throw GeometryError("point behind camera (depth " + std::to_string(pc[2]) + ")");
    return {cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy};
}

std::vector<Vec2> project(const std::vector<Vec3>& points, const Pose& pose,
                          const CameraIntrinsics& cam) {
    if (cam.fx <= 0 || cam.fy <= 0) throw ValidationError("camera focal lengths must be positive");
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 pc = pose.apply(points[i]);
        if (pc[2] <= 0) {
            throw GeometryError("point " + std::to_string(i) + " behind camera (depth " +
                                std::to_string(pc[2]) + ")");
        }
        out.push_back({cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy});
    }
    return out;
}

double mean_sq_reprojection(const std::vector<Vec3>& points, const std::vector<Vec2>& observed,
                            const CameraIntrinsics& cam, const Pose& pose) {
    const auto proj = project(points, pose, cam);
    double acc = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const double du = proj[i][0] - observed[i][0];
        const double dv = proj[i][1] - observed[i][1];
        acc += du * du + dv * dv;
    }
    return acc / static_cast<double>(proj.size());
}

namespace {

// mean squared reprojection error, or nullopt if any point falls behind the
// camera (treated as a rejected LM trial)
std::optional<double> try_cost(const std::vector<Vec3>& pts, const std::vector<Vec2>& obs,
                               const CameraIntrinsics& cam, const Pose& pose) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 pc = pose.apply(pts[i]);
        if (pc[2] <= 0) return std::nullopt;
        const double du = cam.fx * pc[0] / pc[2] + cam.cx - obs[i][0];
        const double dv = cam.fy * pc[1] / pc[2] + cam.cy - obs[i][1];
        acc += du * du + dv * dv;
    }
    return acc / static_cast<double>(pts.size());
}

}  // namespace

Pose solve_pnp(const std::vector<Vec3>& model_points, const std::vector<Vec2>& observed,
               const CameraIntrinsics& cam, const Pose& init) {
    if (model_points.size() != observed.size()) {
        throw ValidationError("solve_pnp: " + std::to_string(model_points.size()) +
                              " model points vs " + std::to_string(observed.size()) +
                              " observations");
    }
    if (model_points.size() < 6) {
        throw ValidationError("solve_pnp needs at least 6 correspondences, got " +
                              std::to_string(model_points.size()));
    }

    Pose pose = init;
    pose.r = orthonormalize(pose.r);
    auto cost = try_cost(model_points, observed, cam, pose);
    if (!cost) throw GeometryError("solve_pnp: init pose places points behind the camera");

    const std::size_t n = model_points.size();
    double lambda = 1e-3;

    for (int iter = 0; iter < 100; ++iter) {
        // accumulate J^T J and J^T r for residual r = projected - observed,
        // with the rotation updated on the left: R <- exp([dw]x) R
        Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 rp = mul(pose.r, model_points[i]);
            const Vec3 pc = {rp[0] + pose.t[0], rp[1] + pose.t[1], rp[2] + pose.t[2]};
            const double X = pc[0], Y = pc[1], Z = pc[2];
            const double ru = cam.fx * X / Z + cam.cx - observed[i][0];
            const double rv = cam.fy * Y / Z + cam.cy - observed[i][1];

            // d(pc)/d(dw) = -[R p]x, d(pc)/d(dt) = I
            Eigen::Matrix<double, 3, 6> dpc;
            dpc << 0, rp[2], -rp[1], 1, 0, 0,
                   -rp[2], 0, rp[0], 0, 1, 0,
                   rp[1], -rp[0], 0, 0, 0, 1;
            Eigen::Matrix<double, 2, 3> duv;
            duv << cam.fx / Z, 0, -cam.fx * X / (Z * Z),
                   0, cam.fy / Z, -cam.fy * Y / (Z * Z);
            const Eigen::Matrix<double, 2, 6> j = duv * dpc;
            jtj += j.transpose() * j;
            jtr += j.transpose() * Eigen::Vector2d(ru, rv);
        }

        int rejections = 0;
        bool accepted = false;
        while (rejections < 10) {
            Eigen::Matrix<double, 6, 6> damped = jtj;
            for (int d = 0; d < 6; ++d) damped(d, d) += lambda;
            const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-jtr);
            if (delta.norm() < 1e-10) return pose;

            Pose trial;
            trial.r = orthonormalize(
                mul(axis_angle_to_mat({delta(0), delta(1), delta(2)}), pose.r));
            trial.t = {pose.t[0] + delta(3), pose.t[1] + delta(4), pose.t[2] + delta(5)};

            const auto trial_cost = try_cost(model_points, observed, cam, trial);
            if (trial_cost && *trial_cost <= *cost) {
                pose = trial;
                cost = trial_cost;
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                break;
            }
            // cost change at the double-rounding floor: nothing left to gain
            if (trial_cost && *trial_cost - *cost <= 1e-12 * std::max(*cost, 1e-12)) {
                return pose;
            }
            lambda *= 10.0;
            ++rejections;
        }
        if (!accepted) {
            throw PnpDivergence("solve_pnp: 10 consecutive step rejections (residual " +
                                    std::to_string(*cost) + ")",
                                pose, *cost);
        }
    }
    return pose;
}

Affine3 fit_affine3d(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    if (src.size() != dst.size()) {
        throw ValidationError("fit_affine3d: " + std::to_string(src.size()) + " source vs " +
                              std::to_string(dst.size()) + " destination points");
    }
    if (src.size() < 4) {
        throw ValidationError("fit_affine3d needs at least 4 correspondences, got " +
                              std::to_string(src.size()));
    }

    // normal equations: A G = B with G = sum h h^T, B = sum q h^T, h = [p;1]
    Eigen::Matrix4d g = Eigen::Matrix4d::Zero();
    Eigen::Matrix<double, 3, 4> b = Eigen::Matrix<double, 3, 4>::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Eigen::Vector4d h(src[i][0], src[i][1], src[i][2], 1.0);
        const Eigen::Vector3d q(dst[i][0], dst[i][1], dst[i][2]);
        g += h * h.transpose();
        b += q * h.transpose();
    }

    Eigen::JacobiSVD<Eigen::Matrix4d> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(3) < 1e-10 * sv(0)) {
        throw GeometryError("fit_affine3d: degenerate (coplanar or collinear) source points");
    }
    const Eigen::Matrix<double, 3, 4> a = svd.solve(b.transpose()).transpose();

    Affine3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) out[r * 4 + c] = a(r, c);
    return out;
}

Vec3 apply_affine(const Affine3& a, const Vec3& p) {
    return {a[0] * p[0] + a[1] * p[1] + a[2] * p[2] + a[3],
            a[4] * p[0] + a[5] * p[1] + a[6] * p[2] + a[7],
            a[8] * p[0] + a[9] * p[1] + a[10] * p[2] + a[11]};
}

Vec2 ray_plane(const Vec3& origin, const Vec3& through, double plane_z) {
    const double dz = through[2] - origin[2];
    if (std::fabs(dz) < 1e-12) throw GeometryError("ray parallel to plane");
    const double s = (plane_z - origin[2]) / dz;
    return {origin[0] + s * (through[0] - origin[0]), origin[1] + s * (through[1] - origin[1])};
}

GazeVector extract_gaze_vector(const LandmarkFrame& frame, const ModelFace& model,
                               const CameraIntrinsics& cam, double plane_z, const Pose& init) {
    try {
        std::vector<Vec3> model_pts;
        std::vector<Vec2> observed;
        for (std::size_t i = 0; i < model.names.size(); ++i) {
            auto it = frame.landmarks.find(model.names[i]);
            if (it == frame.landmarks.end()) continue;
            model_pts.push_back(model.points[i]);
            observed.push_back(it->second);
        }
        if (model_pts.size() < 6) return {};

        const Pose pose = solve_pnp(model_pts, observed, cam, init);

        // head ray: face origin along the forward axis (0,0,-1) in face frame
        const Vec3 forward = mul(pose.r, Vec3{0, 0, -1});
        const Vec3 head_through = {pose.t[0] + forward[0], pose.t[1] + forward[1],
                                   pose.t[2] + forward[2]};
        const Vec2 head = ray_plane(pose.t, head_through, plane_z);

        if (!frame.left_center || !frame.left_pupil || !frame.right_center ||
            !frame.right_pupil) {
            return {};
        }
        std::vector<Vec3> src, dst;
        for (std::size_t i = 0; i < model.names.size(); ++i) {
            auto it = frame.landmarks3d.find(model.names[i]);
            if (it == frame.landmarks3d.end()) continue;
            src.push_back(it->second);
            dst.push_back(model.points[i]);
        }
        if (src.size() < 4) return {};
        const Affine3 a = fit_affine3d(src, dst);

        auto to_camera = [&](const Vec3& p) { return pose.apply(apply_affine(a, p)); };
        const Vec2 left = ray_plane(to_camera(*frame.left_center),
                                    to_camera(*frame.left_pupil), plane_z);
        const Vec2 right = ray_plane(to_camera(*frame.right_center),
                                     to_camera(*frame.right_pupil), plane_z);

        GazeVector out;
        out.head_x = head[0] / kPlaneHalfWidth;
        out.head_y = head[1] / kPlaneHalfWidth;
        out.gaze_x = (left[0] + right[0]) / 2.0 / kPlaneHalfWidth;
        out.gaze_y = (left[1] + right[1]) / 2.0 / kPlaneHalfWidth;
        out.valid = true;
        return out;
    } catch (const GeometryError&) {
        return {};
    } catch (const ValidationError&) {
        return {};
    }
}

}  // namespace mfusion::geom
