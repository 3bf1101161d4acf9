#include "mfusion/landmarks.hpp"

#include <sstream>

#include "json.hpp"
#include "mfusion/io_util.hpp"
#include "mfusion/log.hpp"

namespace mfusion::geom {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::exception&) {
        throw ValidationError("line " + std::to_string(lineno) + ": not valid JSON");
    }
}

std::optional<Vec3> read_vec3(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_array() || j.size() != 3) return std::nullopt;
    for (const auto& v : j)
        if (!v.is_number()) return std::nullopt;
    return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// returns nullopt (not a frame to keep) and logs the reason
std::optional<LandmarkFrame> parse_frame(const json& j, std::size_t lineno, double width,
                                         double height) {
    auto drop = [lineno](const std::string& why) -> std::optional<LandmarkFrame> {
        log::info("warning: line ", lineno, " skipped: ", why);
        return std::nullopt;
    };
    if (!j.is_object()) return drop("not an object");
    if (!j.contains("frame") || !j["frame"].is_number_integer()) return drop("missing frame number");
    if (!j.contains("landmarks") || !j["landmarks"].is_object()) return drop("missing landmarks");

    LandmarkFrame f;
    f.frame = j["frame"].get<int>();
    for (const auto& [name, uv] : j["landmarks"].items()) {
        if (!uv.is_array() || uv.size() != 2 || !uv[0].is_number() || !uv[1].is_number()) {
            return drop("landmark " + name + " is not a [u,v] pair");
        }
        const double u = uv[0].get<double>();
        const double v = uv[1].get<double>();
        if (u < 0 || u > width || v < 0 || v > height) {
            return drop("landmark " + name + " outside image bounds");
        }
        f.landmarks[name] = {u, v};
    }
    if (j.contains("landmarks3d")) {
        if (!j["landmarks3d"].is_object()) return drop("landmarks3d is not an object");
        for (const auto& [name, xyz] : j["landmarks3d"].items()) {
            const auto p = read_vec3(xyz);
            if (!p) return drop("landmarks3d " + name + " is not a 3-vector");
            f.landmarks3d[name] = *p;
        }
    }
    if (j.contains("eyes")) {
        if (!j["eyes"].is_object()) return drop("eyes is not an object");
        const auto& eyes = j["eyes"];
        auto pick = [&](const char* key) -> std::optional<Vec3> {
            if (!eyes.contains(key)) return std::nullopt;
            return read_vec3(eyes[key]);
        };
        f.left_center = pick("left_center");
        f.left_pupil = pick("left_pupil");
        f.right_center = pick("right_center");
        f.right_pupil = pick("right_pupil");
    }
    return f;
}

}  // namespace

LandmarkFile read_landmarks(const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    if (first == lines.size()) throw ValidationError(path.string() + ": no frames");

    const json header = parse_line(lines[first], first + 1);
    LandmarkFile file;
    for (const char* key : {"width", "height", "fx", "fy", "cx", "cy"}) {
        if (!header.contains(key) || !header[key].is_number()) {
            throw ValidationError("line " + std::to_string(first + 1) + ": header missing " +
                                  std::string(key));
        }
    }
    file.width = header["width"].get<double>();
    file.height = header["height"].get<double>();
    file.cam = {header["fx"].get<double>(), header["fy"].get<double>(),
                header["cx"].get<double>(), header["cy"].get<double>()};
    if (file.cam.fx <= 0 || file.cam.fy <= 0) {
        throw ValidationError("line " + std::to_string(first + 1) +
                              ": focal lengths must be positive");
    }

    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const json j = parse_line(lines[i], i + 1);
        if (auto f = parse_frame(j, i + 1, file.width, file.height)) {
            file.frames.push_back(std::move(*f));
        } else {
            ++file.skipped;
        }
    }
    if (file.frames.empty() && file.skipped == 0) {
        throw ValidationError(path.string() + ": no frames");
    }
    return file;
}

void write_gaze_records(const std::filesystem::path& path,
                        const std::vector<std::pair<int, GazeVector>>& records) {
    io::atomic_write(path, [&](std::ostream& os) {
        for (const auto& [frame, g] : records) {
            nlohmann::ordered_json j;
            j["frame"] = frame;
            j["valid"] = g.valid;
            j["head_x"] = g.head_x;
            j["head_y"] = g.head_y;
            j["gaze_x"] = g.gaze_x;
            j["gaze_y"] = g.gaze_y;
            os << j.dump() << '\n';
        }
    });
}

std::vector<std::pair<int, GazeVector>> read_gaze_records(const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    std::vector<std::pair<int, GazeVector>> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const json j = parse_line(lines[i], i + 1);
        for (const char* key : {"frame", "valid", "head_x", "head_y", "gaze_x", "gaze_y"}) {
            if (!j.contains(key)) {
                throw ValidationError("line " + std::to_string(i + 1) + ": missing " +
                                      std::string(key));
            }
        }
        GazeVector g;
        g.valid = j["valid"].get<bool>();
        g.head_x = j["head_x"].get<double>();
        g.head_y = j["head_y"].get<double>();
        g.gaze_x = j["gaze_x"].get<double>();
        g.gaze_y = j["gaze_y"].get<double>();
        out.emplace_back(j["frame"].get<int>(), g);
    }
    return out;
}

}  // namespace mfusion::geom
