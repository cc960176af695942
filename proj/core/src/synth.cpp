#include "evtta/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "evtta/rng.hpp"

namespace evtta {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kStepUs = 500; // scene update interval

struct Stroke {
    double x0, y0, x1, y1;
};

struct ShapeDef {
    std::vector<Stroke> strokes;
    double osc_x, osc_y; // oscillation direction, unit length
};

// Ten thin base shapes. Distinct silhouettes at desk resolutions; stroke
// width 1 keeps per-window pixel density low enough for neighborhood
// denoising to have headroom.
// Stroke lengths are roughly equalized across classes so per-window active
// pixel counts cluster tightly; the ratio test's reach scales with mean/std
// of those counts.
const std::vector<ShapeDef>& shape_table() {
    static const std::vector<ShapeDef> table = {
        {{{-4.5, 0, 4.5, 0}}, 0, 1},                                   // horizontal bar
        {{{-3.2, -3.2, 3.2, 3.2}}, -0.7071, 0.7071},                   // 45 deg bar
        {{{0, -4.5, 0, 4.5}}, 1, 0},                                   // vertical bar
        {{{-3.2, 3.2, 3.2, -3.2}}, 0.7071, 0.7071},                    // 135 deg bar
        {{{-2.75, 0, 2.75, 0}, {0, -2.75, 0, 2.75}}, 0.7071, 0.7071},  // plus
        {{{-2.4, -2.4, 2.4, 2.4}, {-2.4, 2.4, 2.4, -2.4}}, 1, 0},      // X
        {{{0, 0, 5, 0}, {0, 0, 0, 5}}, -0.7071, 0.7071},               // L corner
        {{{-3.5, 0, 3.5, 0}, {0, 0, 0, 4}}, 0, 1},                     // T
        {{{-3.5, -3, 0, 0}, {3.5, -3, 0, 0}}, 0, 1},                   // chevron
        {{{-2.75, -2, 2.75, -2}, {-2.75, 2, 2.75, 2}}, 0, 1},          // double bar
    };
    return table;
}

std::vector<std::pair<int, int>> rasterize(const std::vector<Stroke>& strokes, double angle_rad,
                                           double cx, double cy, Resolution res) {
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    std::set<std::pair<int, int>> px;
    for (const Stroke& st : strokes) {
        const double x0 = st.x0 * c - st.y0 * s, y0 = st.x0 * s + st.y0 * c;
        const double x1 = st.x1 * c - st.y1 * s, y1 = st.x1 * s + st.y1 * c;
        const double len = std::hypot(x1 - x0, y1 - y0);
        const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.4)));
        for (int i = 0; i <= steps; ++i) {
            const double u = static_cast<double>(i) / steps;
            const int x = static_cast<int>(std::lround(cx + x0 + (x1 - x0) * u));
            const int y = static_cast<int>(std::lround(cy + y0 + (y1 - y0) * u));
            if (x >= 0 && x < res.width && y >= 0 && y < res.height) px.insert({x, y});
        }
    }
    return {px.begin(), px.end()};
}

std::vector<std::pair<int, int>> translate_clip(const std::vector<std::pair<int, int>>& base,
                                                int dx, int dy, Resolution res) {
    std::vector<std::pair<int, int>> out;
    out.reserve(base.size());
    for (auto [x, y] : base) {
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && nx < res.width && ny >= 0 && ny < res.height) out.push_back({nx, ny});
    }
    return out;
}

struct RawEvent {
    std::uint64_t t;
    int x, y, p;
};

/// Core simulator: a rigid pattern oscillates along its normal; pixels fire
/// +1 when newly covered and -1 when uncovered. Initial coverage is silent so
/// polarities stay balanced.
std::vector<RawEvent> simulate(const ShapeDef& shape, double extra_angle_rad, Resolution res,
                               std::uint64_t duration_us, Rng& rng) {
    const double cx = res.width / 2.0 + static_cast<double>(rng.uniform_u64(0, 6)) - 3.0;
    const double cy = res.height / 2.0 + static_cast<double>(rng.uniform_u64(0, 6)) - 3.0;
    // Slow large swing plus a fast ripple. The ripple alone swings > 1.7 px
    // per half-period (< 5 ms), so every 10 ms slice window sees the rounded
    // offset change at least twice and both polarities stay active. The slow
    // component drifts less than ~1.5 px per window, keeping per-window
    // active-pixel counts tightly clustered.
    const double amp1 = rng.uniform_real(1.30, 1.70);
    const double freq1_hz = rng.uniform_real(14.0, 20.0);
    const double phase1 = rng.uniform_real(0.0, 2.0 * kPi);
    const double amp2 = rng.uniform_real(0.85, 1.05);
    const double freq2_hz = rng.uniform_real(100.0, 140.0);
    const double phase2 = rng.uniform_real(0.0, 2.0 * kPi);
    const double omega1 = 2.0 * kPi * freq1_hz * 1e-6; // per microsecond
    const double omega2 = 2.0 * kPi * freq2_hz * 1e-6;

    const double c = std::cos(extra_angle_rad), s = std::sin(extra_angle_rad);
    const double nx = shape.osc_x * c - shape.osc_y * s;
    const double ny = shape.osc_x * s + shape.osc_y * c;

    const auto base = rasterize(shape.strokes, extra_angle_rad, cx, cy, res);

    auto displacement = [&](std::uint64_t t) {
        const double tt = static_cast<double>(t);
        const double d =
            amp1 * std::sin(omega1 * tt + phase1) + amp2 * std::sin(omega2 * tt + phase2);
        return std::pair<int, int>{static_cast<int>(std::lround(d * nx)),
                                   static_cast<int>(std::lround(d * ny))};
    };

    std::vector<RawEvent> events;
    auto prev_d = displacement(0);
    auto prev = translate_clip(base, prev_d.first, prev_d.second, res);
    const std::uint64_t nsteps = duration_us / kStepUs;
    for (std::uint64_t i = 1; i < nsteps; ++i) {
        const std::uint64_t t0 = i * kStepUs;
        const auto d = displacement(t0);
        if (d == prev_d) continue;
        auto cur = translate_clip(base, d.first, d.second, res);
        std::vector<std::pair<int, int>> added, removed;
        std::set_difference(cur.begin(), cur.end(), prev.begin(), prev.end(),
                            std::back_inserter(added));
        std::set_difference(prev.begin(), prev.end(), cur.begin(), cur.end(),
                            std::back_inserter(removed));
        for (auto [x, y] : added)
            events.push_back({t0 + rng.uniform_u64(0, kStepUs - 1), x, y, +1});
        for (auto [x, y] : removed)
            events.push_back({t0 + rng.uniform_u64(0, kStepUs - 1), x, y, -1});
        prev_d = d;
        prev = std::move(cur);
    }

    // Per-polarity sensor efficiency, drawn per sample. Decorrelates the two
    // channel counts so fitted ratio statistics have usable spread.
    const double q_pos = rng.uniform_real(0.88, 1.0);
    const double q_neg = rng.uniform_real(0.88, 1.0);
    std::stable_sort(events.begin(), events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.t < b.t; });
    std::vector<RawEvent> kept;
    kept.reserve(events.size());
    for (const RawEvent& e : events)
        if (rng.bernoulli(e.p > 0 ? q_pos : q_neg)) kept.push_back(e);
    return kept;
}

EventStream finish_scene(std::vector<RawEvent> raw, Resolution res, std::uint64_t duration_us,
                         const ShiftSpec& shift, std::uint64_t seed, std::optional<int> label) {
    if (shift.speed_factor <= 0.0)
        throw ValidationError("speed_factor must be positive");
    if (shift.drop_rate < 0.0 || shift.drop_rate >= 1.0)
        throw ValidationError("drop_rate must be in [0, 1)");

    std::uint64_t end = duration_us;
    if (shift.speed_factor != 1.0) {
        end = static_cast<std::uint64_t>(
            std::llround(static_cast<double>(duration_us) / shift.speed_factor));
        if (end == 0) throw ValidationError("speed_factor collapses the stream to zero length");
        for (RawEvent& e : raw) {
            e.t = static_cast<std::uint64_t>(
                std::llround(static_cast<double>(e.t) / shift.speed_factor));
            if (e.t > end) e.t = end;
        }
    }

    if (shift.drop_rate > 0.0) {
        Rng drop_rng(derive_seed(seed, {seed_tag::drop}));
        std::vector<RawEvent> kept;
        kept.reserve(raw.size());
        for (const RawEvent& e : raw)
            if (!drop_rng.bernoulli(shift.drop_rate)) kept.push_back(e);
        raw = std::move(kept);
    }

    EventStream stream;
    stream.res = res;
    stream.t_begin = 0;
    stream.t_end = end;
    stream.label = label;
    stream.events.reserve(raw.size());
    for (const RawEvent& e : raw)
        stream.events.push_back({static_cast<std::uint16_t>(e.x), static_cast<std::uint16_t>(e.y),
                                 e.t, static_cast<std::int8_t>(e.p)});
    return stream;
}

} // namespace

MaskedStream inject_noise_burst(const EventStream& stream, BurstPolarity polarity, double rate,
                                std::uint64_t seed) {
    if (rate < 0.0) throw ValidationError("burst rate must be non-negative");
    if (polarity == BurstPolarity::none || rate == 0.0) {
        return {stream, std::vector<std::uint8_t>(stream.events.size(), 0)};
    }
    Rng rng(seed);
    const double lambda =
        rate * static_cast<double>(stream.res.height) * static_cast<double>(stream.res.width);
    const std::uint64_t count = rng.poisson(lambda);
    const std::int8_t p = polarity == BurstPolarity::positive ? 1 : -1;

    std::vector<Event> noise;
    noise.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Event e;
        e.x = static_cast<std::uint16_t>(rng.uniform_u64(0, stream.res.width - 1));
        e.y = static_cast<std::uint16_t>(rng.uniform_u64(0, stream.res.height - 1));
        e.t = rng.uniform_u64(stream.t_begin, stream.t_end);
        e.p = p;
        noise.push_back(e);
    }
    std::sort(noise.begin(), noise.end(), [](const Event& a, const Event& b) { return a.t < b.t; });

    MaskedStream out;
    out.stream.res = stream.res;
    out.stream.t_begin = stream.t_begin;
    out.stream.t_end = stream.t_end;
    out.stream.label = stream.label;
    out.stream.events.reserve(stream.events.size() + noise.size());
    out.noise_mask.reserve(stream.events.size() + noise.size());
    // Two-pointer merge, signal first on timestamp ties.
    std::size_t a = 0, b = 0;
    while (a < stream.events.size() || b < noise.size()) {
        const bool take_signal =
            b == noise.size() ||
            (a < stream.events.size() && stream.events[a].t <= noise[b].t);
        if (take_signal) {
            out.stream.events.push_back(stream.events[a++]);
            out.noise_mask.push_back(0);
        } else {
            out.stream.events.push_back(noise[b++]);
            out.noise_mask.push_back(1);
        }
    }
    return out;
}

MaskedStream synth_scene_masked(int class_id, int num_classes, const ShiftSpec& shift,
                                Resolution res, std::uint64_t duration_us, std::uint64_t seed) {
    if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
    if (class_id < 0 || class_id >= num_classes)
        throw ValidationError("class_id " + std::to_string(class_id) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    if (res.width < 16 || res.height < 16)
        throw ValidationError("resolution must be at least 16x16");
    if (duration_us < 2 * kStepUs) throw ValidationError("duration too short for scene updates");

    const auto& shapes = shape_table();
    const ShapeDef& shape = shapes[static_cast<std::size_t>(class_id) % shapes.size()];
    const double extra_angle =
        (static_cast<double>(class_id) / static_cast<double>(shapes.size())) * (20.0 * kPi / 180.0);

    Rng scene_rng(derive_seed(seed, {seed_tag::scene, static_cast<std::uint64_t>(class_id)}));
    auto raw = simulate(shape, extra_angle, res, duration_us, scene_rng);
    ShiftSpec no_burst = shift;
    no_burst.burst = BurstPolarity::none;
    no_burst.burst_rate = 0.0;
    EventStream clean = finish_scene(std::move(raw), res, duration_us, no_burst, seed, class_id);
    return inject_noise_burst(clean, shift.burst, shift.burst_rate,
                              derive_seed(seed, {seed_tag::burst}));
}

EventStream synth_scene(int class_id, int num_classes, const ShiftSpec& shift, Resolution res,
                        std::uint64_t duration_us, std::uint64_t seed) {
    return synth_scene_masked(class_id, num_classes, shift, res, duration_us, seed).stream;
}

EventStream synth_scene_angle(double angle_deg, const ShiftSpec& shift, Resolution res,
                              std::uint64_t duration_us, std::uint64_t seed) {
    if (res.width < 16 || res.height < 16)
        throw ValidationError("resolution must be at least 16x16");
    if (duration_us < 2 * kStepUs) throw ValidationError("duration too short for scene updates");

    const double a = angle_deg * kPi / 180.0;
    ShapeDef bar;
    bar.strokes = {{-5.0, 0.0, 5.0, 0.0}};
    bar.osc_x = 0.0;
    bar.osc_y = 1.0; // rotated together with the stroke inside simulate()

    Rng scene_rng(derive_seed(seed, {seed_tag::scene}));
    auto raw = simulate(bar, a, res, duration_us, scene_rng);
    ShiftSpec no_burst = shift;
    no_burst.burst = BurstPolarity::none;
    no_burst.burst_rate = 0.0;
    EventStream clean = finish_scene(std::move(raw), res, duration_us, no_burst, seed, std::nullopt);
    return inject_noise_burst(clean, shift.burst, shift.burst_rate,
                              derive_seed(seed, {seed_tag::burst}))
        .stream;
}

} // namespace evtta
