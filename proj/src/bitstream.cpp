#include "hidcode/bitstream.hpp"

#include <bit>
#include <fstream>

#include "hidcode/errors.hpp"

namespace hidcode {

int bits_per_token(std::uint32_t V) {
    if (V < 2 || (V & (V - 1)) != 0)
        throw ValidationError("codebook size must be a power of two, at least 2");
    return std::bit_width(V - 1);
}

std::size_t code_bits(const ScaleSchedule& sched, std::uint32_t V, int k) {
    if (k < 0 || k > sched.count()) throw ValidationError("scale count outside schedule");
    const std::size_t per = static_cast<std::size_t>(bits_per_token(V));
    std::size_t total = 0;
    for (int i = 0; i < k; ++i)
        total += per * static_cast<std::size_t>(sched.scales[i].first) * sched.scales[i].second;
    return total;
}

int select_prefix_scales(const ScaleSchedule& sched, std::uint32_t V, CapacitySpec cap) {
    int k = 0;
    for (int i = 1; i <= sched.count(); ++i) {
        if (code_bits(sched, V, i) > cap.m_bits) break;
        k = i;
    }
    if (k == 0) throw ValidationError("capacity too small for even one scale");
    return k;
}

HiddenCode pack(const TokenPyramid& pyr, std::uint32_t V, int k) {
    if (k < 0 || k > pyr.count()) throw ValidationError("pack: prefix exceeds pyramid");
    const int per = bits_per_token(V);
    HiddenCode code;
    code.k = k;
    code.V = V;
    for (int i = 0; i < k; ++i)
        for (std::uint32_t idx : pyr.grids[i].idx) {
            if (idx >= V) throw ValidationError("pack: token index out of range");
            for (int b = per - 1; b >= 0; --b)
                code.bits.push_back(static_cast<std::uint8_t>((idx >> b) & 1u));
        }
    return code;
}

TokenPyramid unpack(const HiddenCode& code, const ScaleSchedule& sched, std::uint32_t V, int k) {
    if (code.bits.size() != code_bits(sched, V, k))
        throw ValidationError("unpack: bit length does not match layout");
    const int per = bits_per_token(V);
    TokenPyramid pyr;
    std::size_t pos = 0;
    for (int i = 0; i < k; ++i) {
        auto [h, w] = sched.scales[i];
        TokenGrid tg(h, w);
        for (std::uint32_t& idx : tg.idx) {
            std::uint32_t v = 0;
            for (int b = 0; b < per; ++b) v = (v << 1) | code.bits[pos++];
            idx = v;  // always < V: V is a power of two
        }
        pyr.grids.push_back(std::move(tg));
    }
    return pyr;
}

WatermarkPayload pad_to_capacity(const HiddenCode& code, CapacitySpec cap) {
    if (code.bits.size() > cap.m_bits)
        throw ValidationError("hidden code longer than payload capacity");
    WatermarkPayload payload;
    payload.bits = code.bits;
    payload.bits.resize(cap.m_bits, 0);
    return payload;
}

HiddenCode strip_padding(const WatermarkPayload& payload, const ScaleSchedule& sched,
                         std::uint32_t V, int k) {
    const std::size_t n = code_bits(sched, V, k);
    if (payload.bits.size() < n) throw ValidationError("payload shorter than hidden code");
    HiddenCode code;
    code.k = k;
    code.V = V;
    code.bits.assign(payload.bits.begin(), payload.bits.begin() + static_cast<std::ptrdiff_t>(n));
    return code;
}

void save_bits(const Bits& bits, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    std::uint64_t n = bits.size();
    std::uint8_t head[8];
    for (int i = 0; i < 8; ++i) head[i] = static_cast<std::uint8_t>((n >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(head), 8);
    std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
    if (!out) throw IoError("failed to write " + path);
}

Bits load_bits(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::uint8_t head[8];
    in.read(reinterpret_cast<char*>(head), 8);
    if (!in) throw IoError(path + ": truncated bit file");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(head[i]) << (8 * i);
    std::vector<std::uint8_t> packed((n + 7) / 8);
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!in) throw IoError(path + ": truncated bit file");
    Bits bits(n);
    for (std::uint64_t i = 0; i < n; ++i)
        bits[i] = (packed[i / 8] >> (7 - i % 8)) & 1u;
    return bits;
}

}  // namespace hidcode
