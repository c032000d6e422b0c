#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "s2sr/error.hpp"
#include "s2sr/nn/model.hpp"
#include "s2sr/raster_io.hpp"

namespace s2sr::nn {

// SRW1 layout, little-endian:
//   "SRW1" | u32 header_len | header JSON (spec + metadata)
//   | u32 tensor_count | per tensor: u32 name_len, name, u32 rank, rank x u32 dims, binary32 payload

namespace detail {

inline void put_u32(std::string& b, std::uint32_t v) {
    char tmp[4];
    std::memcpy(tmp, &v, 4);
    b.append(tmp, 4);
}

class Reader {
public:
    explicit Reader(const std::string& buf) : buf_(buf) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        std::memcpy(&v, buf_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void floats(float* dst, std::size_t n) {
        need(n * 4);
        std::memcpy(dst, buf_.data() + pos_, n * 4);
        pos_ += n * 4;
    }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) throw DataError("truncated checkpoint");
    }
    const std::string& buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

struct Checkpoint {
    ModelParams<float> params;
    nlohmann::json meta;  // free-form training metadata
};

inline std::string encode_checkpoint(const ModelParams<float>& p, const nlohmann::json& meta = nlohmann::json::object()) {
    const nlohmann::json header = {{"spec", to_json(p.spec)}, {"meta", meta}};
    const std::string hj = header.dump();
    std::string b = "SRW1";
    detail::put_u32(b, static_cast<std::uint32_t>(hj.size()));
    b += hj;
    detail::put_u32(b, static_cast<std::uint32_t>(p.tensors.size()));
    for (const auto& [name, t] : p.tensors) {
        detail::put_u32(b, static_cast<std::uint32_t>(name.size()));
        b += name;
        detail::put_u32(b, 4);
        for (int d : {t->shape.n, t->shape.c, t->shape.h, t->shape.w}) detail::put_u32(b, static_cast<std::uint32_t>(d));
        b.append(reinterpret_cast<const char*>(t->value.data()), t->numel() * sizeof(float));
    }
    return b;
}

inline Checkpoint decode_checkpoint(const std::string& buf) {
    if (buf.size() < 4 || buf.compare(0, 4, "SRW1") != 0) throw DataError("bad checkpoint magic");
    detail::Reader rd(buf);
    rd.bytes(4);
    const std::uint32_t hlen = rd.u32();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(rd.bytes(hlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad checkpoint header: ") + e.what());
    }
    Checkpoint ck;
    ck.params.spec = spec_from_json(header.at("spec"));
    ck.meta = header.value("meta", nlohmann::json::object());
    const std::uint32_t count = rd.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = rd.bytes(rd.u32());
        const std::uint32_t rank = rd.u32();
        if (rank != 4) throw DataError("checkpoint tensor " + name + " has rank " + std::to_string(rank));
        Shape s;
        s.n = static_cast<int>(rd.u32());
        s.c = static_cast<int>(rd.u32());
        s.h = static_cast<int>(rd.u32());
        s.w = static_cast<int>(rd.u32());
        std::vector<float> v(s.numel());
        rd.floats(v.data(), v.size());
        ck.params.add(name, make_leaf<float>(s, std::move(v), true));
    }
    // Layout must match what the spec implies.
    const auto layout = conv_layout(ck.params.spec);
    if (ck.params.tensors.size() != 2 * layout.size()) throw DataError("checkpoint tensor count does not match its spec");
    for (const auto& d : layout) {
        const auto& w = ck.params.get(d.name + ".weight");
        if (w->shape != Shape{d.out_channels, d.in_channels, 3, 3}) throw DataError("checkpoint shape mismatch at " + d.name);
    }
    return ck;
}

inline void save_checkpoint(const ModelParams<float>& p, const std::filesystem::path& path,
                            const nlohmann::json& meta = nlohmann::json::object()) {
    write_file_bytes(path, encode_checkpoint(p, meta));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing checkpoint " + path.string());
    return decode_checkpoint(read_file_bytes(path));
}

/// FNV-1a 64-bit, hex; identifies checkpoint bytes in reports.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace s2sr::nn
