#pragma once

// Little-endian byte packing shared by the feature and checkpoint formats.

#include "mrtcn/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

namespace mrtcn {

class ByteWriter {
public:
    void bytes(std::string_view data) { buf_.append(data); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u64(s.size());
        bytes(s);
    }

    const std::string& buffer() const { return buf_; }

private:
    std::string buf_;
};

/// Bounds-checked reader; running past the end throws a Format error whose
/// message starts with "truncated".
class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        std::string_view out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
    std::uint32_t u32() {
        const std::string_view b = bytes(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    std::uint64_t u64() {
        const std::string_view b = bytes(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = u64();
        return std::string(bytes(static_cast<std::size_t>(n)));
    }

    std::size_t remaining() const { return data_.size() - pos_; }

    void need(std::size_t n) const {
        if (n > remaining()) {
            fail(ErrorKind::Format, "truncated " + what_ + ": needed " + std::to_string(n) + " more bytes, " +
                                        std::to_string(remaining()) + " left");
        }
    }

private:
    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace mrtcn
