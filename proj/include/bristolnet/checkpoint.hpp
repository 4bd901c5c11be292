#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bristolnet/nets.hpp"

namespace bristolnet {

/// Serialized named-tensor set. On disk: magic "SSNN", u32 version (= 1),
/// u32 tensor count, then per tensor u16 name length + UTF-8 name, u8 rank,
/// u32 dims, float32 values, everything little-endian, row-major.
struct Checkpoint {
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::vector<float> values;
    };
    uint32_t version = 1;
    std::vector<Entry> entries;

    const Entry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw FormatError("checkpoint: truncated file");
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

inline void write_f32(std::ostream& os, const float* p, size_t n) {
    static_assert(sizeof(float) == 4, "float must be 32-bit");
    // x86 is little-endian; write raw IEEE-754 words
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 4));
}

inline void read_f32(std::istream& is, float* p, size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 4));
    if (!is) throw FormatError("checkpoint: truncated tensor data");
}

}  // namespace detail

inline Checkpoint checkpoint_from_network(const Network& net) {
    Checkpoint ck;
    for (const auto& nt : net.state()) ck.entries.push_back({nt.name, nt.tensor->shape, nt.tensor->data});
    return ck;
}

inline void write_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
    os.write("SSNN", 4);
    detail::write_le<uint32_t>(os, ck.version);
    detail::write_le<uint32_t>(os, static_cast<uint32_t>(ck.entries.size()));
    for (const auto& e : ck.entries) {
        if (e.name.size() > 0xffff) throw ContractViolation("checkpoint: tensor name too long");
        detail::write_le<uint16_t>(os, static_cast<uint16_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        detail::write_le<uint8_t>(os, static_cast<uint8_t>(e.shape.size()));
        for (int d : e.shape) detail::write_le<uint32_t>(os, static_cast<uint32_t>(d));
        detail::write_f32(os, e.values.data(), e.values.size());
    }
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SSNN", 4) != 0) throw FormatError("checkpoint: bad magic, not an SSNN file");
    Checkpoint ck;
    ck.version = detail::read_le<uint32_t>(is);
    if (ck.version != 1) throw FormatError("checkpoint: unsupported version " + std::to_string(ck.version));
    const uint32_t count = detail::read_le<uint32_t>(is);
    ck.entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        Checkpoint::Entry e;
        const uint16_t name_len = detail::read_le<uint16_t>(is);
        e.name.resize(name_len);
        is.read(e.name.data(), name_len);
        if (!is) throw FormatError("checkpoint: truncated tensor name");
        const uint8_t rank = detail::read_le<uint8_t>(is);
        size_t numel = 1;
        for (uint8_t r = 0; r < rank; ++r) {
            const uint32_t d = detail::read_le<uint32_t>(is);
            if (d == 0 || d > 0x7fffffffu) throw FormatError("checkpoint: bad dimension in tensor '" + e.name + "'");
            e.shape.push_back(static_cast<int>(d));
            numel *= d;
        }
        e.values.resize(numel);
        detail::read_f32(is, e.values.data(), numel);
        for (const auto& prev : ck.entries)
            if (prev.name == e.name) throw FormatError("checkpoint: duplicate tensor name '" + e.name + "'");
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

/// Copies checkpoint values into the network's state tensors. Any missing,
/// extra or shape-mismatched tensor is an error naming the offender.
inline void apply_checkpoint(const Checkpoint& ck, Network& net) {
    const auto& state = net.state();
    if (ck.entries.size() != state.size())
        throw ContractViolation("checkpoint: tensor count " + std::to_string(ck.entries.size()) +
                                " does not match architecture (" + std::to_string(state.size()) + " expected)");
    for (const auto& nt : state) {
        const auto* e = ck.find(nt.name);
        if (!e) throw ContractViolation("checkpoint: missing tensor '" + nt.name + "'");
        if (e->shape != nt.tensor->shape)
            throw ContractViolation("checkpoint: shape mismatch for tensor '" + nt.name + "'");
        nt.tensor->data = e->values;
    }
}

inline void save_checkpoint(const Network& net, const std::string& path) {
    write_checkpoint(checkpoint_from_network(net), path);
}

inline void load_checkpoint(const std::string& path, Network& net) { apply_checkpoint(read_checkpoint(path), net); }

}  // namespace bristolnet
