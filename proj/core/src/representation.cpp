#include "evtta/representation.hpp"

#include <algorithm>
#include <cmath>

#include "evtta/binio.hpp"

namespace evtta {

namespace {

struct PixelAgg {
    std::uint32_t count[2] = {0, 0};
    std::uint64_t t_last[2] = {0, 0};
};

void fill_sorted(RepTensor& out, const std::vector<PixelAgg>& agg) {
    // Rank t_last per channel over that channel's active pixels, ascending,
    // ties broken by (y, x) order. Values are rank/N, so the maximum is 1.
    const std::size_t n_px = agg.size();
    for (int c = 0; c < 2; ++c) {
        std::vector<std::pair<std::uint64_t, std::size_t>> active; // (t_last, pixel)
        for (std::size_t i = 0; i < n_px; ++i)
            if (agg[i].count[c] > 0) active.push_back({agg[i].t_last[c], i});
        std::sort(active.begin(), active.end());
        const double n = static_cast<double>(active.size());
        for (std::size_t r = 0; r < active.size(); ++r)
            out.data[active[r].second * 2 + static_cast<std::size_t>(c)] =
                static_cast<double>(r + 1) / n;
    }
}

void apply_dist_filter(RepTensor& out, const std::vector<PixelAgg>& agg, int radius,
                       int min_neighbors) {
    if (radius < 0) throw ValidationError("dist radius must be >= 0");
    if (min_neighbors < 0) throw ValidationError("dist min_neighbors must be >= 0");
    const int h = out.height, w = out.width;
    std::vector<std::uint8_t> active(static_cast<std::size_t>(h) * w * 2);
    for (std::size_t i = 0; i < agg.size(); ++i) {
        active[i * 2] = agg[i].count[0] > 0;
        active[i * 2 + 1] = agg[i].count[1] > 0;
    }
    // Neighborhood spans both channels and excludes the center cell itself;
    // the same coordinate in the other channel does count.
    auto neighbor_count = [&](int y, int x, int c) {
        int total = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
            const int ny = y + dy;
            if (ny < 0 || ny >= h) continue;
            for (int dx = -radius; dx <= radius; ++dx) {
                const int nx = x + dx;
                if (nx < 0 || nx >= w) continue;
                const std::size_t base = (static_cast<std::size_t>(ny) * w + nx) * 2;
                total += active[base] + active[base + 1];
            }
        }
        return total - active[(static_cast<std::size_t>(y) * w + x) * 2 + c];
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 2; ++c) {
                const std::size_t idx = (static_cast<std::size_t>(y) * w + x) * 2 + c;
                if (active[idx] && neighbor_count(y, x, c) < min_neighbors) out.data[idx] = 0.0;
            }
}

} // namespace

RepTensor build(const EventStream& stream, RepKind kind, const RepParams& params) {
    RepTensor out = RepTensor::zeros(kind, stream.res.height, stream.res.width);
    if (stream.res.height == 0 || stream.res.width == 0)
        throw ValidationError("representation needs a nonzero resolution");
    if (stream.events.empty()) return out;

    const std::size_t n_px = static_cast<std::size_t>(stream.res.height) * stream.res.width;
    std::vector<PixelAgg> agg(n_px);
    std::uint64_t t_min = stream.events.front().t;
    std::uint64_t t_max = stream.events.front().t;
    for (const Event& e : stream.events) {
        const int c = e.p > 0 ? 0 : 1;
        PixelAgg& a = agg[static_cast<std::size_t>(e.y) * stream.res.width + e.x];
        a.count[c] += 1;
        a.t_last[c] = std::max(a.t_last[c], e.t);
        t_min = std::min(t_min, e.t);
        t_max = std::max(t_max, e.t);
    }

    switch (kind) {
    case RepKind::binary:
        for (std::size_t i = 0; i < n_px; ++i)
            for (int c = 0; c < 2; ++c)
                if (agg[i].count[c] > 0) out.data[i * 2 + static_cast<std::size_t>(c)] = 1.0;
        break;
    case RepKind::histogram:
        for (std::size_t i = 0; i < n_px; ++i)
            for (int c = 0; c < 2; ++c)
                out.data[i * 2 + static_cast<std::size_t>(c)] =
                    static_cast<double>(agg[i].count[c]);
        break;
    case RepKind::timestamp: {
        const double span = static_cast<double>(t_max - t_min);
        for (std::size_t i = 0; i < n_px; ++i)
            for (int c = 0; c < 2; ++c)
                if (agg[i].count[c] > 0) {
                    // Degenerate single-timestamp window: active pixels map to 1.
                    out.data[i * 2 + static_cast<std::size_t>(c)] =
                        span == 0.0
                            ? 1.0
                            : static_cast<double>(agg[i].t_last[c] - t_min) / span;
                }
        break;
    }
    case RepKind::timesurface: {
        if (params.tau_us < 0.0) throw ValidationError("tau must be non-negative");
        const double tau =
            params.tau_us > 0.0 ? params.tau_us
                                : std::max(1.0, static_cast<double>(stream.duration()) / 3.0);
        const double t_ref = static_cast<double>(stream.t_end);
        for (std::size_t i = 0; i < n_px; ++i)
            for (int c = 0; c < 2; ++c)
                if (agg[i].count[c] > 0)
                    out.data[i * 2 + static_cast<std::size_t>(c)] =
                        std::exp(-(t_ref - static_cast<double>(agg[i].t_last[c])) / tau);
        break;
    }
    case RepKind::sorted:
        fill_sorted(out, agg);
        break;
    case RepKind::dist:
        fill_sorted(out, agg);
        apply_dist_filter(out, agg, params.dist_radius, params.dist_min_neighbors);
        break;
    }
    return out;
}

std::pair<std::size_t, std::size_t> rep_stats(const RepTensor& rep) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i + 1 < rep.data.size(); i += 2) {
        if (rep.data[i] != 0.0) ++pos;
        if (rep.data[i + 1] != 0.0) ++neg;
    }
    return {pos, neg};
}

std::string serialize_rep(const RepTensor& rep) {
    std::string out;
    out.reserve(9 + rep.data.size() * 4);
    out += "REP0";
    put_u8(out, static_cast<std::uint8_t>(rep.kind));
    put_u16(out, rep.height);
    put_u16(out, rep.width);
    for (double v : rep.data) put_f32(out, static_cast<float>(v));
    return out;
}

RepTensor parse_rep(std::span<const std::byte> bytes) {
    ByteReader r(bytes);
    r.expect_magic("REP0");
    const std::uint8_t kind_raw = r.get_u8();
    if (kind_raw >= kRepKindCount)
        throw ParseError("unknown representation kind " + std::to_string(kind_raw) +
                         " at byte 4");
    RepTensor t;
    t.kind = static_cast<RepKind>(kind_raw);
    t.height = r.get_u16();
    t.width = r.get_u16();
    const std::size_t n = static_cast<std::size_t>(t.height) * t.width * 2;
    t.data.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.data.push_back(static_cast<double>(r.get_f32()));
    if (r.remaining() != 0)
        throw ParseError("trailing " + std::to_string(r.remaining()) + " byte(s) at byte " +
                         std::to_string(r.offset()));
    return t;
}

const char* rep_kind_name(RepKind kind) {
    switch (kind) {
    case RepKind::binary: return "binary";
    case RepKind::histogram: return "histogram";
    case RepKind::timestamp: return "timestamp";
    case RepKind::timesurface: return "timesurface";
    case RepKind::sorted: return "sorted";
    case RepKind::dist: return "dist";
    }
    return "unknown";
}

RepKind rep_kind_from_name(const std::string& name) {
    for (int k = 0; k < kRepKindCount; ++k)
        if (name == rep_kind_name(static_cast<RepKind>(k))) return static_cast<RepKind>(k);
    throw ValidationError("unknown representation kind \"" + name + "\"");
}

} // namespace evtta
