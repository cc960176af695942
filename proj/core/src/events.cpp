#include "evtta/events.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <string_view>

#include "evtta/binio.hpp"
#include "evtta/rng.hpp"

namespace evtta {

namespace {

void validate_event(const Event& e, const Resolution& res, const std::string& where) {
    if (e.x >= res.width)
        throw ValidationError(where + ": x=" + std::to_string(e.x) + " outside width " +
                              std::to_string(res.width));
    if (e.y >= res.height)
        throw ValidationError(where + ": y=" + std::to_string(e.y) + " outside height " +
                              std::to_string(res.height));
    if (e.p != 1 && e.p != -1)
        throw ValidationError(where + ": polarity must be +1 or -1, got " + std::to_string(e.p));
}

template <typename T>
T parse_int_field(std::string_view field, std::size_t line_no, const char* name) {
    T value{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("line " + std::to_string(line_no) + ": bad " + name + " field \"" +
                         std::string(field) + "\"");
    return value;
}

EventStream parse_csv(std::string_view text, std::optional<Resolution> resolution) {
    if (!resolution)
        throw ValidationError("CSV event input requires an explicit resolution");

    std::vector<Event> events;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool saw_header = false;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }
        if (!saw_header) {
            if (line != "x,y,t,p")
                throw ParseError("line 1: expected header \"x,y,t,p\", got \"" +
                                 std::string(line) + "\"");
            saw_header = true;
            continue;
        }
        std::array<std::string_view, 4> fields;
        std::size_t start = 0;
        for (int f = 0; f < 4; ++f) {
            std::size_t comma = line.find(',', start);
            const bool last_field = f == 3;
            if (!last_field && comma == std::string_view::npos)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected 4 comma-separated fields");
            if (last_field && comma != std::string_view::npos)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected 4 comma-separated fields");
            fields[f] = line.substr(start, last_field ? line.size() - start : comma - start);
            start = comma + 1;
        }
        Event e;
        e.x = parse_int_field<std::uint16_t>(fields[0], line_no, "x");
        e.y = parse_int_field<std::uint16_t>(fields[1], line_no, "y");
        e.t = parse_int_field<std::uint64_t>(fields[2], line_no, "t");
        e.p = parse_int_field<std::int8_t>(fields[3], line_no, "p");
        validate_event(e, *resolution, "line " + std::to_string(line_no));
        if (!events.empty() && e.t < events.back().t)
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": timestamps must be non-decreasing");
        events.push_back(e);
        if (eol == text.size()) break;
    }
    if (!saw_header) throw ParseError("line 1: expected header \"x,y,t,p\", got empty input");
    return EventStream::from_events(*resolution, std::move(events));
}

EventStream parse_packed(std::span<const std::byte> bytes) {
    ByteReader r(bytes);
    r.expect_magic("EVT0");
    Resolution res;
    res.height = r.get_u16();
    res.width = r.get_u16();
    const std::uint64_t count = r.get_u64();
    std::vector<Event> events;
    events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t record_at = r.offset();
        Event e;
        e.x = r.get_u16();
        e.y = r.get_u16();
        e.t = r.get_u64();
        e.p = r.get_i8();
        validate_event(e, res, "record " + std::to_string(i) + " at byte " +
                                   std::to_string(record_at));
        if (!events.empty() && e.t < events.back().t)
            throw ValidationError("record " + std::to_string(i) + " at byte " +
                                  std::to_string(record_at) +
                                  ": timestamps must be non-decreasing");
        events.push_back(e);
    }
    if (r.remaining() != 0)
        throw ParseError("trailing " + std::to_string(r.remaining()) + " byte(s) at byte " +
                         std::to_string(r.offset()));
    return EventStream::from_events(res, std::move(events));
}

} // namespace

EventStream EventStream::from_events(Resolution res, std::vector<Event> events,
                                     std::optional<int> label) {
    for (std::size_t i = 0; i < events.size(); ++i) {
        validate_event(events[i], res, "event " + std::to_string(i));
        if (i > 0 && events[i].t < events[i - 1].t)
            throw ValidationError("event " + std::to_string(i) +
                                  ": timestamps must be non-decreasing");
    }
    EventStream s;
    s.res = res;
    s.events = std::move(events);
    s.label = label;
    if (!s.events.empty()) {
        s.t_begin = s.events.front().t;
        s.t_end = s.events.back().t;
    }
    return s;
}

EventStream parse_events(std::span<const std::byte> bytes, EventFormat format,
                         std::optional<Resolution> csv_resolution) {
    switch (format) {
    case EventFormat::csv:
        return parse_csv(
            std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
            csv_resolution);
    case EventFormat::packed:
        return parse_packed(bytes);
    }
    throw ValidationError("unknown event format");
}

std::string serialize_events(const EventStream& stream, EventFormat format) {
    std::string out;
    if (format == EventFormat::csv) {
        out = "x,y,t,p\n";
        for (const Event& e : stream.events) {
            out += std::to_string(e.x);
            out += ',';
            out += std::to_string(e.y);
            out += ',';
            out += std::to_string(e.t);
            out += ',';
            out += std::to_string(e.p);
            out += '\n';
        }
        return out;
    }
    out.reserve(16 + stream.events.size() * 13);
    out += "EVT0";
    put_u16(out, stream.res.height);
    put_u16(out, stream.res.width);
    put_u64(out, stream.events.size());
    for (const Event& e : stream.events) {
        put_u16(out, e.x);
        put_u16(out, e.y);
        put_u64(out, e.t);
        put_i8(out, e.p);
    }
    return out;
}

SliceSet random_slices(const EventStream& stream, int k, std::uint64_t window_us,
                       std::uint64_t seed) {
    if (k < 1) throw ValidationError("slice count must be >= 1, got " + std::to_string(k));
    if (window_us == 0) throw ValidationError("slice window must be positive");
    if (stream.duration() < window_us)
        throw ValidationError("stream duration " + std::to_string(stream.duration()) +
                              "us is shorter than slice window " + std::to_string(window_us) +
                              "us");

    Rng rng(seed);
    SliceSet set;
    set.window_length = window_us;
    set.anchor_index = 0;
    set.slices.reserve(static_cast<std::size_t>(k));
    const std::uint64_t max_start = stream.t_end - window_us;
    for (int i = 0; i < k; ++i) {
        const std::uint64_t start = rng.uniform_u64(stream.t_begin, max_start);
        const std::uint64_t stop = start + window_us;
        auto lo = std::lower_bound(stream.events.begin(), stream.events.end(), start,
                                   [](const Event& e, std::uint64_t t) { return e.t < t; });
        auto hi = std::upper_bound(stream.events.begin(), stream.events.end(), stop,
                                   [](std::uint64_t t, const Event& e) { return t < e.t; });
        EventStream slice;
        slice.res = stream.res;
        slice.events.assign(lo, hi);
        slice.t_begin = start;
        slice.t_end = stop;
        slice.label = stream.label;
        set.slices.push_back(std::move(slice));
    }
    return set;
}

EventStream flip_horizontal(const EventStream& stream) {
    EventStream out = stream;
    for (Event& e : out.events) e.x = static_cast<std::uint16_t>(stream.res.width - 1 - e.x);
    return out;
}

EventStream flip_polarity(const EventStream& stream) {
    EventStream out = stream;
    for (Event& e : out.events) e.p = static_cast<std::int8_t>(-e.p);
    return out;
}

EventStream flip_temporal(const EventStream& stream) {
    EventStream out = stream;
    for (Event& e : out.events) e.t = stream.t_end - e.t + stream.t_begin;
    // The map is strictly decreasing in t, so reversing restores ordering;
    // events sharing a timestamp come out in reversed insertion order.
    std::reverse(out.events.begin(), out.events.end());
    return out;
}

} // namespace evtta
