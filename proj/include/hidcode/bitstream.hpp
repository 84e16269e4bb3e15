#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hidcode/codec.hpp"

namespace hidcode {

// Bits are stored one per byte, values 0/1.
using Bits = std::vector<std::uint8_t>;

struct HiddenCode {
    Bits bits;
    int k = 0;            // scales encoded
    std::uint32_t V = 0;  // codebook size the indices came from
};

struct CapacitySpec {
    std::size_t m_bits = 0;
};

// Fixed-length channel payload, exactly m_bits.
struct WatermarkPayload {
    Bits bits;
};

// ceil(log2 V); V must be a power of two so every bit pattern decodes.
int bits_per_token(std::uint32_t V);

// Exact bit length of scales 1..k under the layout rule.
std::size_t code_bits(const ScaleSchedule& sched, std::uint32_t V, int k);

// Largest k whose cumulative bit length fits m_bits; throws if even k=1 does not.
int select_prefix_scales(const ScaleSchedule& sched, std::uint32_t V, CapacitySpec cap);

// Scales in order, grids row-major, each index big-endian in bits_per_token(V) bits.
HiddenCode pack(const TokenPyramid& pyr, std::uint32_t V, int k);
TokenPyramid unpack(const HiddenCode& code, const ScaleSchedule& sched, std::uint32_t V, int k);

WatermarkPayload pad_to_capacity(const HiddenCode& code, CapacitySpec cap);
HiddenCode strip_padding(const WatermarkPayload& payload, const ScaleSchedule& sched,
                         std::uint32_t V, int k);

// Sidecar file: 8-byte little-endian bit count, then bits packed MSB-first.
void save_bits(const Bits& bits, const std::string& path);
Bits load_bits(const std::string& path);

}  // namespace hidcode
