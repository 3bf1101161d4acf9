#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfusion/tensor.hpp"

namespace mfusion::num {

// Named parameter slots plus parallel gradient accumulators. Slots iterate in
// lexicographic path order, which fixes the flatten layout and the byte order
// of serialized blobs.
class ParamStore {
public:
    struct Slot {
        Tensor value;
        Tensor grad;  // same shape as value, zero until a backward pass runs
    };

    // Registers a new slot; the gradient starts as zeros of the same shape.
    Tensor& create(const std::string& path, Tensor init);

    bool has(const std::string& path) const { return slots_.count(path) != 0; }
    Slot& slot(const std::string& path);
    const Slot& slot(const std::string& path) const;
    Tensor& value(const std::string& path) { return slot(path).value; }
    const Tensor& value(const std::string& path) const { return slot(path).value; }
    Tensor& grad(const std::string& path) { return slot(path).grad; }

    std::size_t slot_count() const { return slots_.size(); }
    // total number of scalar parameters
    std::size_t param_count() const;
    std::vector<std::string> paths() const;

    void zero_grads();

    // Flatten/unflatten walk slots in path order; unflatten(flatten()) is the
    // identity and requires an exact length match.
    std::vector<double> flatten() const;
    std::vector<double> flatten_grads() const;
    void unflatten(const std::vector<double>& flat);

    auto begin() { return slots_.begin(); }
    auto end() { return slots_.end(); }
    auto begin() const { return slots_.begin(); }
    auto end() const { return slots_.end(); }

    // Binary blob: "MFW1", u64 slot count, then per slot (path order):
    // u32 path length, path bytes, u32 rank, rank u64 dims, little-endian f64
    // payload.
    std::vector<std::uint8_t> serialize() const;
    static ParamStore deserialize(const std::vector<std::uint8_t>& blob);

    void save(const std::filesystem::path& path) const;
    static ParamStore load(const std::filesystem::path& path);

private:
    std::map<std::string, Slot> slots_;
};

}  // namespace mfusion::num
