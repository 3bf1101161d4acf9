#include "mfusion/sequence_io.hpp"

#include "json.hpp"
#include "mfusion/io_util.hpp"

namespace mfusion::feat {

using nlohmann::json;

void write_sequences(const std::filesystem::path& path,
                     const std::vector<LabeledSequence>& sequences) {
    io::atomic_write(path, [&](std::ostream& os) {
        for (const auto& seq : sequences) {
            nlohmann::ordered_json j;
            j["id"] = seq.id;
            j["label"] = seq.label;
            j["valid_frames"] = seq.valid_frames;
            auto frames = json::array();
            for (const auto& f : seq.frames) frames.push_back(json(f));
            j["frames"] = std::move(frames);
            os << j.dump() << '\n';
        }
    });
}

std::vector<LabeledSequence> read_sequences(const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    std::vector<LabeledSequence> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        json j;
        try {
            j = json::parse(lines[i]);
        } catch (const json::exception&) {
            throw ValidationError("line " + std::to_string(i + 1) + ": not valid JSON");
        }
        auto fail = [i](const std::string& why) {
            throw ValidationError("line " + std::to_string(i + 1) + ": " + why);
        };
        if (!j.is_object() || !j.contains("id") || !j.contains("label") ||
            !j.contains("valid_frames") || !j.contains("frames")) {
            fail("missing id/label/valid_frames/frames");
        }
        LabeledSequence seq;
        seq.id = j["id"].get<std::string>();
        seq.label = j["label"].get<int>();
        seq.valid_frames = j["valid_frames"].get<int>();
        if (seq.label < 0 || seq.label >= static_cast<int>(kNumClasses)) fail("bad label");
        if (seq.valid_frames < 0 || seq.valid_frames > static_cast<int>(kSeqLen)) {
            fail("bad valid_frames");
        }
        const auto& frames = j["frames"];
        if (!frames.is_array() || frames.size() != kSeqLen) {
            fail("frames must be an array of " + std::to_string(kSeqLen));
        }
        seq.frames.resize(kSeqLen);
        for (std::size_t t = 0; t < kSeqLen; ++t) {
            const auto& row = frames[t];
            if (!row.is_array() || row.size() != kFrameDims) {
                fail("frame " + std::to_string(t) + " must have " + std::to_string(kFrameDims) +
                     " values");
            }
            for (std::size_t c = 0; c < kFrameDims; ++c) {
                seq.frames[t][c] = row[c].get<double>();
            }
        }
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace mfusion::feat
