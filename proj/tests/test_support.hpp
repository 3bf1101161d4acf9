#pragma once

// Shared test plumbing: finite-difference gradient oracle, synthetic landmark
// scene renderer, scratch directories, and small data builders.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mfusion/encoders.hpp"
#include "mfusion/geometry.hpp"
#include "mfusion/io_util.hpp"
#include "mfusion/models.hpp"
#include "mfusion/param_store.hpp"
#include "mfusion/rng.hpp"
#include "mfusion/tape.hpp"

namespace testsup {

namespace num = mfusion::num;
namespace geom = mfusion::geom;
namespace feat = mfusion::feat;

// ---------------------------------------------------------------------------
// finite-difference gradient oracle

struct FdReport {
    double max_rel_err = 0;
    std::size_t checked = 0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0;
    double numeric_at_worst = 0;
};

// Checks the analytic gradient of a scalar loss over every tensor in `store`
// against central finite differences. `run(true)` must zero nothing itself:
// the harness zeroes grads, then expects the callback to build a fresh tape
// from the store's current values, run backward, accumulate gradients into
// the store, and return the loss; `run(false)` only returns the loss. The
// relative error denominator is floored so near-zero gradient pairs compare
// on an absolute scale.
template <typename RunFn>
FdReport fd_check(num::ParamStore& store, RunFn&& run, double h = 1e-5, std::size_t stride = 1) {
    store.zero_grads();
    run(true);
    const std::vector<double> g = store.flatten_grads();
    const std::vector<double> x0 = store.flatten();

    FdReport rep;
    std::vector<double> x = x0;
    for (std::size_t i = 0; i < x0.size(); i += stride) {
        x[i] = x0[i] + h;
        store.unflatten(x);
        double lp = run(false);
        x[i] = x0[i] - h;
        store.unflatten(x);
        double lm = run(false);
        x[i] = x0[i];

        double numeric = (lp - lm) / (2 * h);
        double denom = std::max({std::fabs(g[i]), std::fabs(numeric), 1e-3});
        double rel = std::fabs(g[i] - numeric) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = i;
            rep.analytic_at_worst = g[i];
            rep.numeric_at_worst = numeric;
        }
        ++rep.checked;
    }
    store.unflatten(x0);
    return rep;
}

// ---------------------------------------------------------------------------
// random builders

inline num::Tensor random_tensor(std::vector<std::size_t> shape, mfusion::Rng& rng,
                                 double scale = 1.0) {
    num::Tensor t(std::move(shape));
    for (double& v : t.data()) v = scale * rng.uniform(-1.0, 1.0);
    return t;
}

inline feat::LabeledSequence random_seq(mfusion::Rng& rng, int label,
                                        std::size_t n_frames = feat::kSeqLen,
                                        double scale = 1.0) {
    feat::LabeledSequence seq;
    seq.id = "test-" + std::to_string(label);
    seq.label = label;
    seq.valid_frames = static_cast<int>(n_frames);
    seq.frames.resize(n_frames);
    for (auto& frame : seq.frames) {
        for (double& v : frame) v = scale * rng.uniform(-1.0, 1.0);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// scratch directories

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mfusion-test-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// landmark scene renderer
//
// Renders a landmark file for a head at a known pose. 2D landmarks are exact
// projections of the generic face at that pose; 3D landmarks are the face
// points pushed through a deliberately wild (but exactly invertible) affine
// "source space" so the affine fit has real work to do; eye entries live in
// the same source space with the pupil displaced 0.012 units along a chosen
// face-frame gaze direction. With pose.r = identity and gaze_dir (0,0,-1)
// the head and gaze plane points agree in closed form.

struct SceneOptions {
    geom::Pose pose = geom::kDefaultHeadInit;
    geom::Vec3 gaze_dir{0, 0, -1};  // face frame, unit-ish, z < 0 looks at the plane
    int n_frames = 1;
    bool with_landmarks3d = true;
    bool with_eyes = true;
};

// face-space -> source-space map used for landmarks3d / eyes
inline geom::Affine3 scene_source_map() {
    return geom::Affine3{480, 3, -2, 120, -4, 505, 6, -80, 2, -5, 490, 33};
}

inline nlohmann::json vec3_json(const geom::Vec3& v) {
    return nlohmann::json::array({v[0], v[1], v[2]});
}

inline std::string render_scene(const SceneOptions& opt) {
    const geom::ModelFace face = geom::ModelFace::generic();
    const geom::CameraIntrinsics cam;  // 1000/1000/640/360
    const geom::Affine3 src = scene_source_map();

    nlohmann::ordered_json header;
    header["width"] = 1280;
    header["height"] = 720;
    header["fx"] = cam.fx;
    header["fy"] = cam.fy;
    header["cx"] = cam.cx;
    header["cy"] = cam.cy;
    std::string out = header.dump() + "\n";

    const geom::Vec3 left_eye{-0.032, 0.0, 0.0};
    const geom::Vec3 right_eye{0.032, 0.0, 0.0};
    auto pupil = [&](const geom::Vec3& center) {
        return geom::Vec3{center[0] + 0.012 * opt.gaze_dir[0], center[1] + 0.012 * opt.gaze_dir[1],
                          center[2] + 0.012 * opt.gaze_dir[2]};
    };

    for (int f = 0; f < opt.n_frames; ++f) {
        nlohmann::ordered_json line;
        line["frame"] = f;
        nlohmann::ordered_json lm = nlohmann::ordered_json::object();
        nlohmann::ordered_json lm3 = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < face.size(); ++i) {
            auto [u, v] = geom::project_point(face.points[i], opt.pose, cam);
            lm[face.names[i]] = nlohmann::json::array({u, v});
            if (opt.with_landmarks3d)
                lm3[face.names[i]] = vec3_json(geom::apply_affine(src, face.points[i]));
        }
        line["landmarks"] = lm;
        if (opt.with_landmarks3d) line["landmarks3d"] = lm3;
        if (opt.with_eyes) {
            nlohmann::ordered_json eyes;
            eyes["left_center"] = vec3_json(geom::apply_affine(src, left_eye));
            eyes["left_pupil"] = vec3_json(geom::apply_affine(src, pupil(left_eye)));
            eyes["right_center"] = vec3_json(geom::apply_affine(src, right_eye));
            eyes["right_pupil"] = vec3_json(geom::apply_affine(src, pupil(right_eye)));
            line["eyes"] = eyes;
        }
        out += line.dump() + "\n";
    }
    return out;
}

}  // namespace testsup
