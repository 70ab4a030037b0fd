#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "swarmledger/bytes.hpp"

namespace swarmledger {

// Canonical wire form shared by hashing, signing, dumps and gossip:
// integers are big-endian fixed width, variable-length fields carry a
// 4-byte big-endian length, lists carry a 4-byte big-endian count.
// Every consumer of these bytes (txid, tx_root, block digests, dump
// records) depends on this being the only serialization in the tree.

class Encoder {
  public:
    void put_u8(uint8_t x) { out_.push_back(x); }

    void put_u32(uint32_t x) {
        out_.push_back(static_cast<uint8_t>(x >> 24));
        out_.push_back(static_cast<uint8_t>(x >> 16));
        out_.push_back(static_cast<uint8_t>(x >> 8));
        out_.push_back(static_cast<uint8_t>(x));
    }

    void put_u64(uint64_t x) {
        put_u32(static_cast<uint32_t>(x >> 32));
        put_u32(static_cast<uint32_t>(x));
    }

    void put_bytes(const Bytes& b) {
        if (b.size() > 0xffffffffull) throw std::length_error("field too long");
        put_u32(static_cast<uint32_t>(b.size()));
        append(out_, b);
    }

    // no framing; for splicing an already-encoded span
    void put_raw(const Bytes& b) { append(out_, b); }

    void put_string(const std::string& s) { put_bytes(str_bytes(s)); }

    template <size_t N>
    void put_fixed(const FixedBytes<N>& b) {
        append(out_, b);
    }

    void put_count(size_t n) {
        if (n > 0xffffffffull) throw std::length_error("list too long");
        put_u32(static_cast<uint32_t>(n));
    }

    const Bytes& bytes() const { return out_; }
    Bytes take() { return std::move(out_); }

  private:
    Bytes out_;
};

struct DecodeError : std::runtime_error {
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

class Decoder {
  public:
    Decoder(const uint8_t* data, size_t size) : p_(data), end_(data + size) {}
    explicit Decoder(const Bytes& b) : Decoder(b.data(), b.size()) {}
    // holds pointers into the buffer, so a temporary is never enough
    explicit Decoder(Bytes&&) = delete;

    uint8_t get_u8() {
        need(1);
        return *p_++;
    }

    uint32_t get_u32() {
        need(4);
        uint32_t x = static_cast<uint32_t>(p_[0]) << 24 | static_cast<uint32_t>(p_[1]) << 16 |
                     static_cast<uint32_t>(p_[2]) << 8 | static_cast<uint32_t>(p_[3]);
        p_ += 4;
        return x;
    }

    uint64_t get_u64() {
        uint64_t hi = get_u32();
        return hi << 32 | get_u32();
    }

    Bytes get_bytes() {
        uint32_t n = get_u32();
        need(n);
        Bytes out(p_, p_ + n);
        p_ += n;
        return out;
    }

    std::string get_string() {
        Bytes b = get_bytes();
        return std::string(b.begin(), b.end());
    }

    template <size_t N>
    FixedBytes<N> get_fixed() {
        need(N);
        FixedBytes<N> out;
        std::memcpy(out.data(), p_, N);
        p_ += N;
        return out;
    }

    uint32_t get_count() { return get_u32(); }

    size_t remaining() const { return static_cast<size_t>(end_ - p_); }

    void expect_end() const {
        if (p_ != end_) throw DecodeError("trailing bytes");
    }

  private:
    void need(size_t n) const {
        if (static_cast<size_t>(end_ - p_) < n) throw DecodeError("truncated input");
    }

    const uint8_t* p_;
    const uint8_t* end_;
};

}  // namespace swarmledger
