#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmledger {

using Bytes = std::vector<uint8_t>;

template <size_t N>
struct FixedBytes {
    std::array<uint8_t, N> v{};

    auto operator<=>(const FixedBytes&) const = default;

    const uint8_t* data() const { return v.data(); }
    uint8_t* data() { return v.data(); }
    static constexpr size_t size() { return N; }

    bool is_zero() const {
        for (uint8_t b : v)
            if (b != 0) return false;
        return true;
    }
};

using Digest256 = FixedBytes<32>;
using Address = FixedBytes<20>;
using PublicKey = FixedBytes<32>;
using PrivateKey = FixedBytes<32>;

template <size_t N>
Bytes to_bytes(const FixedBytes<N>& f) {
    return Bytes(f.v.begin(), f.v.end());
}

struct Signature {
    FixedBytes<32> bytes;
    PublicKey signer;

    auto operator<=>(const Signature&) const = default;
};

inline std::string to_hex(const uint8_t* p, size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (size_t i = 0; i < n; ++i) {
        out.push_back(digits[p[i] >> 4]);
        out.push_back(digits[p[i] & 0xf]);
    }
    return out;
}

inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

template <size_t N>
std::string to_hex(const FixedBytes<N>& b) {
    return to_hex(b.data(), N);
}

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline std::optional<Bytes> from_hex(const std::string& s) {
    if (s.size() % 2 != 0) return std::nullopt;
    Bytes out;
    out.reserve(s.size() / 2);
    for (size_t i = 0; i < s.size(); i += 2) {
        int hi = hex_nibble(s[i]), lo = hex_nibble(s[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<uint8_t>(hi << 4 | lo));
    }
    return out;
}

template <size_t N>
std::optional<FixedBytes<N>> fixed_from_hex(const std::string& s) {
    auto raw = from_hex(s);
    if (!raw || raw->size() != N) return std::nullopt;
    FixedBytes<N> out;
    std::memcpy(out.data(), raw->data(), N);
    return out;
}

template <size_t N>
struct FixedBytesHash {
    size_t operator()(const FixedBytes<N>& b) const {
        // first 8 bytes of a digest/address are already uniform
        uint64_t x;
        std::memcpy(&x, b.data(), sizeof(x));
        return static_cast<size_t>(x);
    }
};

using DigestHash = FixedBytesHash<32>;
using AddressHash = FixedBytesHash<20>;

inline void append(Bytes& out, const Bytes& more) {
    out.insert(out.end(), more.begin(), more.end());
}

inline void append(Bytes& out, const uint8_t* p, size_t n) {
    out.insert(out.end(), p, p + n);
}

template <size_t N>
void append(Bytes& out, const FixedBytes<N>& b) {
    out.insert(out.end(), b.v.begin(), b.v.end());
}

inline Bytes str_bytes(const std::string& s) {
    return Bytes(s.begin(), s.end());
}

}  // namespace swarmledger
