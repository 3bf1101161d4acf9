#include "mfusion/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mfusion/errors.hpp"
#include "mfusion/io_util.hpp"

namespace mfusion::num {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    put_u64(out, std::bit_cast<std::uint64_t>(d));
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw IoError("parameter blob truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace

Tensor& ParamStore::create(const std::string& path, Tensor init) {
    if (slots_.count(path)) throw ValidationError("parameter slot already exists: " + path);
    Tensor grad(init.shape());
    auto [it, ok] = slots_.emplace(path, Slot{std::move(init), std::move(grad)});
    (void)ok;
    return it->second.value;
}

ParamStore::Slot& ParamStore::slot(const std::string& path) {
    auto it = slots_.find(path);
    if (it == slots_.end()) throw ValidationError("unknown parameter slot: " + path);
    return it->second;
}

const ParamStore::Slot& ParamStore::slot(const std::string& path) const {
    auto it = slots_.find(path);
    if (it == slots_.end()) throw ValidationError("unknown parameter slot: " + path);
    return it->second;
}

std::size_t ParamStore::param_count() const {
    std::size_t n = 0;
    for (const auto& [path, s] : slots_) n += s.value.size();
    return n;
}

std::vector<std::string> ParamStore::paths() const {
    std::vector<std::string> out;
    out.reserve(slots_.size());
    for (const auto& [path, s] : slots_) out.push_back(path);
    return out;
}

void ParamStore::zero_grads() {
    for (auto& [path, s] : slots_) s.grad.fill(0.0);
}

std::vector<double> ParamStore::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& [path, s] : slots_) {
        flat.insert(flat.end(), s.value.data().begin(), s.value.data().end());
    }
    return flat;
}

std::vector<double> ParamStore::flatten_grads() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& [path, s] : slots_) {
        flat.insert(flat.end(), s.grad.data().begin(), s.grad.data().end());
    }
    return flat;
}

void ParamStore::unflatten(const std::vector<double>& flat) {
    if (flat.size() != param_count()) {
        throw ShapeError("unflatten: got " + std::to_string(flat.size()) +
                         " values for " + std::to_string(param_count()) + " parameters");
    }
    std::size_t off = 0;
    for (auto& [path, s] : slots_) {
        std::memcpy(s.value.raw(), flat.data() + off, s.value.size() * sizeof(double));
        off += s.value.size();
    }
}

std::vector<std::uint8_t> ParamStore::serialize() const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'M', 'F', 'W', '1'});
    put_u64(out, slots_.size());
    for (const auto& [path, s] : slots_) {
        put_u32(out, static_cast<std::uint32_t>(path.size()));
        out.insert(out.end(), path.begin(), path.end());
        put_u32(out, static_cast<std::uint32_t>(s.value.rank()));
        for (std::size_t d : s.value.shape()) put_u64(out, d);
        for (double v : s.value.data()) put_f64(out, v);
    }
    return out;
}

ParamStore ParamStore::deserialize(const std::vector<std::uint8_t>& blob) {
    Reader r{blob};
    if (r.bytes(4) != "MFW1") throw IoError("parameter blob: bad magic");
    const std::uint64_t count = r.u64();
    ParamStore store;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string path = r.bytes(r.u32());
        const std::uint32_t rank = r.u32();
        if (rank < 1 || rank > 2) {
            throw IoError("parameter blob: slot " + path + " has rank " + std::to_string(rank));
        }
        std::vector<std::size_t> shape(rank);
        std::size_t total = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(r.u64());
            total *= d;
        }
        std::vector<double> data(total);
        for (auto& v : data) v = r.f64();
        store.create(path, Tensor(std::move(shape), std::move(data)));
    }
    if (r.pos != blob.size()) throw IoError("parameter blob: trailing bytes");
    return store;
}

void ParamStore::save(const std::filesystem::path& path) const {
    const auto blob = serialize();
    io::atomic_write(path, std::string(reinterpret_cast<const char*>(blob.data()), blob.size()));
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
    const std::string raw = io::read_file(path);
    std::vector<std::uint8_t> blob(raw.begin(), raw.end());
    return deserialize(blob);
}

}  // namespace mfusion::num
