#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "afcn/error.hpp"

namespace afcn {

// ---- CRC32 (IEEE 802.3, reflected) -----------------------------------------

namespace detail {
consteval std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}
inline constexpr auto kCrcTable = make_crc_table();
} // namespace detail

class Crc32 {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ = detail::kCrcTable[(state_ ^ p[i]) & 0xFF] ^ (state_ >> 8);
        }
    }
    std::uint32_t value() const { return state_ ^ 0xFFFFFFFFu; }

private:
    std::uint32_t state_ = 0xFFFFFFFFu;
};

inline std::uint32_t crc32(const void* data, std::size_t n) {
    Crc32 c;
    c.update(data, n);
    return c.value();
}

inline std::uint32_t crc32(const std::vector<std::uint8_t>& bytes) {
    return crc32(bytes.data(), bytes.size());
}

// ---- little-endian byte buffers ---------------------------------------------

// Accumulates bytes; writers append little-endian scalars.
class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) {
        bytes_.push_back(static_cast<std::uint8_t>(v));
        bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t u = std::bit_cast<std::uint32_t>(v);
        u32(u);
    }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    void str(const std::string& s) { raw(s.data(), s.size()); }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::size_t size() const { return bytes_.size(); }

private:
    std::vector<std::uint8_t> bytes_;
};

// Reads little-endian scalars from a byte buffer; errors carry the byte offset.
class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t n, std::string source = "")
        : data_(data), n_(n), source_(std::move(source)) {}
    explicit ByteReader(const std::vector<std::uint8_t>& bytes, std::string source = "")
        : ByteReader(bytes.data(), bytes.size(), std::move(source)) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return n_ - pos_; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    float f32() { return std::bit_cast<float>(u32()); }

    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw FormatError((source_.empty() ? std::string() : source_ + ": ") + msg +
                          " at byte offset " + std::to_string(pos_));
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > n_) fail("truncated: need " + std::to_string(n) + " more bytes");
    }

    const std::uint8_t* data_;
    std::size_t n_;
    std::size_t pos_ = 0;
    std::string source_;
};

// ---- whole-file helpers ------------------------------------------------------

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    in.seekg(0, std::ios::end);
    auto n = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(n);
    if (n > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (!in) throw FormatError("short read: " + path);
    return bytes;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write: " + path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path);
    out << text;
    if (!out) throw Error("short write: " + path);
}

// ---- PGM (P5, 8-bit) ---------------------------------------------------------

inline void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != rows * cols) {
        throw ArgumentError("pgm pixel count " + std::to_string(pixels.size()) +
                            " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    ByteWriter w;
    std::string header = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    w.str(header);
    w.raw(pixels.data(), pixels.size());
    write_file(path, w.bytes());
}

} // namespace afcn
