#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>

#include "evtta/errors.hpp"

namespace evtta {

// All on-disk multi-byte values are little-endian regardless of host order.

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_i8(std::string& out, std::int8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

/// Cursor over a byte buffer. Every accessor reports the absolute byte offset
/// on truncation.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    std::uint8_t get_u8() { return static_cast<std::uint8_t>(take(1)[0]); }

    std::int8_t get_i8() { return static_cast<std::int8_t>(take(1)[0]); }

    std::uint16_t get_u16() {
        auto b = take(2);
        return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[0]) |
                                          (static_cast<std::uint8_t>(b[1]) << 8));
    }

    std::uint64_t get_u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(b[i])) << (8 * i);
        return v;
    }

    float get_f32() {
        auto b = take(4);
        std::uint32_t bits = 0;
        for (int i = 0; i < 4; ++i)
            bits |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[i])) << (8 * i);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double get_f64() {
        const std::uint64_t bits = get_u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    void expect_magic(const char (&magic)[5]) {
        auto b = take(4);
        for (int i = 0; i < 4; ++i) {
            if (static_cast<char>(b[i]) != magic[i])
                throw ParseError(std::string("bad magic at byte 0, expected \"") + magic + "\"");
        }
    }

private:
    std::span<const std::byte> take(std::size_t n) {
        if (remaining() < n)
            throw ParseError("truncated input at byte " + std::to_string(pos_) + ", need " +
                             std::to_string(n) + " more byte(s)");
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

inline std::span<const std::byte> byte_view(std::string_view s) {
    return {reinterpret_cast<const std::byte*>(s.data()), s.size()};
}

} // namespace evtta
