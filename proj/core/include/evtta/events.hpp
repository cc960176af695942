#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtta/errors.hpp"

namespace evtta {

struct Resolution {
    std::uint16_t height = 0;
    std::uint16_t width = 0;

    bool operator==(const Resolution&) const = default;
};

/// One camera event. Timestamps are integer microseconds; polarity is
/// exactly +1 or -1.
struct Event {
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint64_t t = 0;
    std::int8_t p = 1;

    bool operator==(const Event&) const = default;
};

/// Event sequence ordered by non-decreasing t (ties keep insertion order).
/// t_begin/t_end describe the covered time window; for a parsed stream they
/// equal the event span, for a slice they are the slice window, which may
/// extend past the first/last contained event.
struct EventStream {
    Resolution res;
    std::vector<Event> events;
    std::uint64_t t_begin = 0;
    std::uint64_t t_end = 0;
    std::optional<int> label;

    std::uint64_t duration() const { return t_end - t_begin; }

    /// Wraps raw events: validates bounds, polarity and ordering, then sets
    /// the window to the event span (0/0 when empty).
    static EventStream from_events(Resolution res, std::vector<Event> events,
                                   std::optional<int> label = std::nullopt);
};

/// K equal-length windows cut from one stream.
struct SliceSet {
    std::vector<EventStream> slices;
    std::uint64_t window_length = 0;
    std::size_t anchor_index = 0;
};

enum class BurstPolarity { none, positive, negative };

/// Synthetic domain-shift recipe applied on top of a clean scene.
struct ShiftSpec {
    double speed_factor = 1.0;
    BurstPolarity burst = BurstPolarity::none;
    double burst_rate = 0.0; // expected noise events per pixel per stream window
    double drop_rate = 0.0;  // per-event Bernoulli drop probability
};

enum class EventFormat { csv, packed };

/// Parses an event stream.
/// CSV: header "x,y,t,p", one event per line; resolution must be supplied.
/// Packed: [magic "EVT0"][u16 H][u16 W][u64 count] then per event
/// [u16 x][u16 y][u64 t][i8 p], all little-endian; resolution is in the header.
EventStream parse_events(std::span<const std::byte> bytes, EventFormat format,
                         std::optional<Resolution> csv_resolution = std::nullopt);

std::string serialize_events(const EventStream& stream, EventFormat format);

/// Cuts k windows of the given length at uniform random offsets in
/// [t_begin, t_end - window]. Windows are inclusive on both ends and may
/// overlap. Throws ValidationError when the stream is shorter than the window.
SliceSet random_slices(const EventStream& stream, int k, std::uint64_t window_us,
                       std::uint64_t seed);

/// x -> width-1-x. Involution.
EventStream flip_horizontal(const EventStream& stream);

/// p -> -p. Involution.
EventStream flip_polarity(const EventStream& stream);

/// t -> t_end - t + t_begin, events re-ordered to keep t non-decreasing.
EventStream flip_temporal(const EventStream& stream);

} // namespace evtta
