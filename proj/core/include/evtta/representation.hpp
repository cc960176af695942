#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evtta/events.hpp"

namespace evtta {

/// Two-channel dense encodings of an event window. Channel 0 aggregates
/// positive events, channel 1 negative events.
enum class RepKind : std::uint8_t {
    binary = 0,     // 1 where the channel saw any event
    histogram = 1,  // event count per pixel
    timestamp = 2,  // (t_last - t_min) / (t_max - t_min), 0 where no event
    timesurface = 3, // exp(-(t_ref - t_last) / tau), t_ref = window end
    sorted = 4,     // ascending 1-based rank of t_last among the channel's
                    // active pixels, divided by the active count
    dist = 5,       // sorted with isolated pixels (sparse 3x3 cross-channel
                    // neighborhood) zeroed
};

struct RepParams {
    double tau_us = 0.0;       // timesurface decay; 0 selects window/3
    int dist_radius = 1;       // neighborhood Chebyshev radius for dist
    int dist_min_neighbors = 2; // active neighbors required to keep a pixel
};

/// Dense H x W x 2 tensor, row-major with the channel index fastest.
struct RepTensor {
    std::uint16_t height = 0;
    std::uint16_t width = 0;
    RepKind kind = RepKind::binary;
    std::vector<double> data;

    static RepTensor zeros(RepKind kind, std::uint16_t height, std::uint16_t width) {
        RepTensor t;
        t.kind = kind;
        t.height = height;
        t.width = width;
        t.data.assign(static_cast<std::size_t>(height) * width * 2, 0.0);
        return t;
    }

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 2 +
                    static_cast<std::size_t>(c)];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 2 +
                    static_cast<std::size_t>(c)];
    }
};

RepTensor build(const EventStream& stream, RepKind kind, const RepParams& params = {});

/// Count of nonzero pixels per channel: (positive, negative).
std::pair<std::size_t, std::size_t> rep_stats(const RepTensor& rep);

/// [magic "REP0"][u8 kind][u16 H][u16 W][f32 data row-major, channel-minor],
/// little-endian.
std::string serialize_rep(const RepTensor& rep);
RepTensor parse_rep(std::span<const std::byte> bytes);

const char* rep_kind_name(RepKind kind);
RepKind rep_kind_from_name(const std::string& name);
inline constexpr int kRepKindCount = 6;

} // namespace evtta
