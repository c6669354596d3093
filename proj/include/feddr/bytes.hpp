#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "feddr/common.hpp"

namespace feddr {

// Little-endian byte stream helpers shared by the checkpoint and wire codecs.
// Decode errors carry the byte offset at which parsing failed.

class ByteWriter {
public:
    std::vector<std::uint8_t>& bytes() { return buf_; }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::size_t size() const { return buf_.size(); }

    void raw(const void* data, std::size_t len) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + len);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f32(float v) { put_raw(v); }
    void f64(double v) { put_raw(v); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }

private:
    template <class T>
    void put_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    template <class T>
    void put_raw(T v) {
        std::uint8_t tmp[sizeof(T)];
        std::memcpy(tmp, &v, sizeof(T));
        raw(tmp, sizeof(T));
    }

    std::vector<std::uint8_t> buf_;
};

struct DecodeError : ProtocolError {
    std::size_t offset;
    DecodeError(const std::string& what, std::size_t off)
        : ProtocolError(what + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}
    explicit ByteReader(const std::vector<std::uint8_t>& buf)
        : ByteReader(buf.data(), buf.size()) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return len_ - pos_; }

    void expect_done(const char* what) const {
        if (pos_ != len_) throw DecodeError(std::string(what) + ": trailing bytes", pos_);
    }

    void raw(void* out, std::size_t n, const char* what) {
        if (remaining() < n) throw DecodeError(std::string(what) + ": truncated", pos_);
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        raw(&v, 1, what);
        return v;
    }
    std::uint16_t u16(const char* what) { return get_le<std::uint16_t>(what); }
    std::uint32_t u32(const char* what) { return get_le<std::uint32_t>(what); }
    std::uint64_t u64(const char* what) { return get_le<std::uint64_t>(what); }
    float f32(const char* what) { return get_raw<float>(what); }
    double f64(const char* what) { return get_raw<double>(what); }

    std::string str(const char* what) {
        const std::uint32_t n = u32(what);
        if (remaining() < n) throw DecodeError(std::string(what) + ": truncated string", pos_);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

private:
    template <class T>
    T get_le(const char* what) {
        std::uint8_t tmp[sizeof(T)];
        raw(tmp, sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(tmp[i]) << (8 * i);
        return v;
    }
    template <class T>
    T get_raw(const char* what) {
        std::uint8_t tmp[sizeof(T)];
        raw(tmp, sizeof(T), what);
        T v;
        std::memcpy(&v, tmp, sizeof(T));
        return v;
    }

    const std::uint8_t* data_;
    std::size_t len_;
    std::size_t pos_ = 0;
};

}  // namespace feddr
