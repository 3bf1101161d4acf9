#pragma once

#include <filesystem>
#include <vector>

#include "mfusion/encoders.hpp"

namespace mfusion::feat {

// JSON Lines, one sequence per line:
// `{"id": str, "label": int, "valid_frames": int, "frames": [[32 floats] x 150]}`.
// Doubles round-trip bit-exactly (shortest-representation printing).
void write_sequences(const std::filesystem::path& path,
                     const std::vector<LabeledSequence>& sequences);
std::vector<LabeledSequence> read_sequences(const std::filesystem::path& path);

}  // namespace mfusion::feat
