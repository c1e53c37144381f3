#pragma once

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>

#include "gcamat/model/network.hpp"

// Checkpoint container: little-endian binary, magic "GCAM", version, tensor
// count; per tensor: name length + UTF-8 name, dtype tag (0 = f32, 1 = u32),
// 4-D shape, raw payload; trailing CRC32 over everything before it.

namespace gcamat::model {

struct CheckpointEntry {
    uint32_t dtype = 0;  // 0 = f32, 1 = u32
    Shape shape{1, 1, 1, 0};
    std::vector<float> f32;
    std::vector<uint32_t> u32;

    std::size_t count() const { return shape.numel(); }
};

using CheckpointMap = std::map<std::string, CheckpointEntry>;

inline constexpr char kCheckpointMagic[4] = {'G', 'C', 'A', 'M'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {
inline void put_u32(std::string& buf, uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    buf.append(b, 4);
}
inline uint32_t get_u32(const std::string& buf, std::size_t& off) {
    if (off + 4 > buf.size()) throw IoError("checkpoint truncated");
    uint32_t v = (static_cast<uint32_t>(static_cast<unsigned char>(buf[off]))) |
                 (static_cast<uint32_t>(static_cast<unsigned char>(buf[off + 1])) << 8) |
                 (static_cast<uint32_t>(static_cast<unsigned char>(buf[off + 2])) << 16) |
                 (static_cast<uint32_t>(static_cast<unsigned char>(buf[off + 3])) << 24);
    off += 4;
    return v;
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const CheckpointMap& entries) {
    std::string buf;
    buf.append(kCheckpointMagic, 4);
    detail::put_u32(buf, kCheckpointVersion);
    detail::put_u32(buf, static_cast<uint32_t>(entries.size()));
    for (const auto& [name, e] : entries) {
        detail::put_u32(buf, static_cast<uint32_t>(name.size()));
        buf.append(name);
        detail::put_u32(buf, e.dtype);
        detail::put_u32(buf, static_cast<uint32_t>(e.shape.n));
        detail::put_u32(buf, static_cast<uint32_t>(e.shape.c));
        detail::put_u32(buf, static_cast<uint32_t>(e.shape.h));
        detail::put_u32(buf, static_cast<uint32_t>(e.shape.w));
        if (e.dtype == 0) {
            if (e.f32.size() != e.count()) throw IoError("checkpoint entry " + name + " size mismatch");
            for (float v : e.f32) {
                uint32_t bits;
                std::memcpy(&bits, &v, 4);
                detail::put_u32(buf, bits);
            }
        } else if (e.dtype == 1) {
            if (e.u32.size() != e.count()) throw IoError("checkpoint entry " + name + " size mismatch");
            for (uint32_t v : e.u32) detail::put_u32(buf, v);
        } else {
            throw IoError("checkpoint entry " + name + " has unknown dtype");
        }
    }
    uint32_t crc = static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    detail::put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to " + path);
}

inline CheckpointMap load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw IoError("checkpoint " + path + " is too small");

    uint32_t stored_crc;
    {
        std::size_t off = buf.size() - 4;
        stored_crc = detail::get_u32(buf, off);
    }
    uint32_t crc = static_cast<uint32_t>(::crc32(
        0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) throw IoError("checkpoint " + path + " failed its CRC32 check");

    std::size_t off = 0;
    if (std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
        throw IoError("checkpoint " + path + " has a bad magic header");
    off = 4;
    uint32_t version = detail::get_u32(buf, off);
    if (version != kCheckpointVersion)
        throw IoError("checkpoint " + path + " has unsupported version " + std::to_string(version));
    uint32_t count = detail::get_u32(buf, off);

    CheckpointMap entries;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = detail::get_u32(buf, off);
        if (off + name_len > buf.size()) throw IoError("checkpoint truncated in name");
        std::string name = buf.substr(off, name_len);
        off += name_len;
        CheckpointEntry e;
        e.dtype = detail::get_u32(buf, off);
        e.shape.n = static_cast<int>(detail::get_u32(buf, off));
        e.shape.c = static_cast<int>(detail::get_u32(buf, off));
        e.shape.h = static_cast<int>(detail::get_u32(buf, off));
        e.shape.w = static_cast<int>(detail::get_u32(buf, off));
        std::size_t n = e.count();
        if (e.dtype == 0) {
            e.f32.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                uint32_t bits = detail::get_u32(buf, off);
                std::memcpy(&e.f32[k], &bits, 4);
            }
        } else if (e.dtype == 1) {
            e.u32.resize(n);
            for (std::size_t k = 0; k < n; ++k) e.u32[k] = detail::get_u32(buf, off);
        } else {
            throw IoError("checkpoint entry " + name + " has unknown dtype tag " +
                          std::to_string(e.dtype));
        }
        entries.emplace(std::move(name), std::move(e));
    }
    return entries;
}

template <typename T>
CheckpointEntry tensor_entry(const Tensor<T>& t) {
    CheckpointEntry e;
    e.dtype = 0;
    e.shape = t.shape();
    e.f32.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) e.f32[i] = static_cast<float>(t[i]);
    return e;
}

template <typename T>
Tensor<T> entry_tensor(const CheckpointEntry& e, const std::string& name) {
    if (e.dtype != 0) throw IoError("checkpoint entry " + name + " is not an f32 tensor");
    Tensor<T> t(e.shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(e.f32[i]);
    return t;
}

// All model parameters and state as checkpoint entries.
template <typename T>
CheckpointMap snapshot(MattingNetwork<T>& net) {
    CheckpointMap out;
    for (const auto& [name, var] : net.params().params) out.emplace(name, tensor_entry(var->value));
    for (const auto& [name, tensor] : net.params().state) out.emplace(name, tensor_entry(*tensor));
    return out;
}

// Load every model tensor from the map; extra entries (optimizer state, rng)
// are ignored, missing model tensors are an error.
template <typename T>
void restore(MattingNetwork<T>& net, const CheckpointMap& entries) {
    auto fetch = [&](const std::string& name) -> const CheckpointEntry& {
        auto it = entries.find(name);
        if (it == entries.end()) throw IoError("checkpoint is missing tensor " + name);
        return it->second;
    };
    for (auto& [name, var] : net.params().params) {
        const CheckpointEntry& e = fetch(name);
        if (e.shape != var->value.shape())
            throw IoError("checkpoint tensor " + name + " has shape " + e.shape.str() +
                          ", model expects " + var->value.shape().str());
        var->value = entry_tensor<T>(e, name);
    }
    for (auto& [name, tensor] : net.params().state) {
        const CheckpointEntry& e = fetch(name);
        if (e.shape != tensor->shape())
            throw IoError("checkpoint tensor " + name + " has shape " + e.shape.str() +
                          ", model expects " + tensor->shape().str());
        *tensor = entry_tensor<T>(e, name);
    }
}

}  // namespace gcamat::model
