#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

#include "swarmledger/bytes.hpp"
#include "swarmledger/encoding.hpp"

namespace swarmledger {

inline Digest256 hash(const uint8_t* data, size_t size) {
    Digest256 out;
    unsigned int len = 32;
    if (EVP_Digest(data, size, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
        throw std::runtime_error("sha256 failed");
    return out;
}

inline Digest256 hash(const Bytes& data) { return hash(data.data(), data.size()); }

// Signatures and encryption below are simulation-grade: deterministic
// constructions over SHA-256 chosen so a several-hundred-thousand-tx
// run signs and verifies in well under a second. They satisfy the
// behavioral contracts the rest of the system relies on (round trips,
// rejection of tampered bytes and wrong keys, fixed ciphertext
// overhead, no private-key bytes in serialized data) but are NOT
// resistant to an adversary who studies this source; the simulator has
// no such adversary. Swapping in a real scheme touches only this file.

namespace domain {
inline const Bytes kPriv = str_bytes("swl/priv");
inline const Bytes kPub = str_bytes("swl/pub");
inline const Bytes kSig = str_bytes("swl/sig");
inline const Bytes kNonce = str_bytes("swl/enc-nonce");
inline const Bytes kKey = str_bytes("swl/enc-key");
inline const Bytes kMac = str_bytes("swl/enc-mac");
inline const Bytes kStream = str_bytes("swl/enc-stream");
}  // namespace domain

inline Digest256 tagged_hash(const Bytes& tag, const Bytes& a, const Bytes& b = {}) {
    Bytes buf;
    buf.reserve(tag.size() + a.size() + b.size());
    append(buf, tag);
    append(buf, a);
    append(buf, b);
    return hash(buf);
}

struct KeyPair {
    PublicKey pub;
    PrivateKey priv;
};

inline PublicKey public_of(const PrivateKey& priv) {
    Bytes p(priv.v.begin(), priv.v.end());
    Digest256 d = tagged_hash(domain::kPub, p);
    PublicKey out;
    out.v = d.v;
    return out;
}

// The private key is a hash of the seed rather than the seed itself:
// seeds are derived from run configuration and may end up echoed into
// run artifacts, private key bytes must not.
inline KeyPair generate_keypair(const FixedBytes<32>& seed) {
    Bytes s(seed.v.begin(), seed.v.end());
    Digest256 d = tagged_hash(domain::kPriv, s);
    KeyPair kp;
    kp.priv.v = d.v;
    kp.pub = public_of(kp.priv);
    return kp;
}

inline Signature sign(const PrivateKey& priv, const Bytes& msg) {
    PublicKey pub = public_of(priv);
    Bytes pb(pub.v.begin(), pub.v.end());
    Signature sig;
    sig.bytes = tagged_hash(domain::kSig, pb, msg);
    sig.signer = pub;
    return sig;
}

inline bool verify(const PublicKey& pub, const Bytes& msg, const Signature& sig) {
    if (sig.signer != pub) return false;
    Bytes pb(pub.v.begin(), pub.v.end());
    return sig.bytes == tagged_hash(domain::kSig, pb, msg);
}

inline Address derive_address(const PublicKey& pub) {
    Bytes pb(pub.v.begin(), pub.v.end());
    Digest256 d = hash(pb);
    Address out;
    std::copy_n(d.v.begin(), 20, out.v.begin());
    return out;
}

struct MultisigSpec {
    uint32_t m = 0;
    std::vector<PublicKey> pubkeys;

    auto operator<=>(const MultisigSpec&) const = default;

    // keys sorted by byte value; address derivation and equality both
    // go through this so supply order never matters
    MultisigSpec canonical() const {
        MultisigSpec out = *this;
        std::sort(out.pubkeys.begin(), out.pubkeys.end());
        return out;
    }

    bool well_formed() const {
        if (m == 0 || pubkeys.empty() || m > pubkeys.size()) return false;
        auto sorted = canonical().pubkeys;
        return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    }
};

inline Bytes encode_multisig_spec(const MultisigSpec& spec) {
    MultisigSpec c = spec.canonical();
    Encoder e;
    e.put_u32(c.m);
    e.put_count(c.pubkeys.size());
    for (const auto& k : c.pubkeys) e.put_fixed(k);
    return e.take();
}

inline MultisigSpec decode_multisig_spec(Decoder& d) {
    MultisigSpec spec;
    spec.m = d.get_u32();
    uint32_t n = d.get_count();
    if (n > 1024) throw DecodeError("multisig key list too long");
    spec.pubkeys.reserve(n);
    for (uint32_t i = 0; i < n; ++i) spec.pubkeys.push_back(d.get_fixed<32>());
    return spec;
}

inline Address derive_multisig_address(const MultisigSpec& spec) {
    if (!spec.well_formed())
        throw std::invalid_argument("multisig spec must satisfy 1 <= m <= n with distinct keys");
    Digest256 d = hash(encode_multisig_spec(spec));
    Address out;
    std::copy_n(d.v.begin(), 20, out.v.begin());
    return out;
}

// ciphertext layout: 16-byte nonce | body (plaintext length) | 16-byte
// mac, so overhead is a fixed 32 bytes
inline constexpr size_t kCipherOverhead = 32;

namespace detail {
inline Bytes keystream_xor(const Digest256& key, const Bytes& data) {
    Bytes kb(key.v.begin(), key.v.end());
    Bytes out;
    out.reserve(data.size());
    uint64_t counter = 0;
    size_t i = 0;
    while (i < data.size()) {
        Encoder ctr;
        ctr.put_u64(counter++);
        Digest256 block = tagged_hash(domain::kStream, kb, ctr.bytes());
        for (size_t j = 0; j < 32 && i < data.size(); ++j, ++i)
            out.push_back(data[i] ^ block.v[j]);
    }
    return out;
}
}  // namespace detail

inline Bytes encrypt_for(const PublicKey& pub, const Bytes& plaintext) {
    Bytes pb(pub.v.begin(), pub.v.end());
    Digest256 nonce_src = tagged_hash(domain::kNonce, pb, plaintext);
    Bytes nonce(nonce_src.v.begin(), nonce_src.v.begin() + 16);
    Digest256 key = tagged_hash(domain::kKey, pb, nonce);
    Bytes body = detail::keystream_xor(key, plaintext);
    Bytes kb(key.v.begin(), key.v.end());
    Digest256 mac = tagged_hash(domain::kMac, kb, body);

    Bytes ct;
    ct.reserve(plaintext.size() + kCipherOverhead);
    append(ct, nonce);
    append(ct, body);
    append(ct, mac.data(), 16);
    return ct;
}

inline std::optional<Bytes> decrypt(const PrivateKey& priv, const Bytes& ciphertext) {
    if (ciphertext.size() < kCipherOverhead) return std::nullopt;
    PublicKey pub = public_of(priv);
    Bytes pb(pub.v.begin(), pub.v.end());
    Bytes nonce(ciphertext.begin(), ciphertext.begin() + 16);
    Bytes body(ciphertext.begin() + 16, ciphertext.end() - 16);
    Digest256 key = tagged_hash(domain::kKey, pb, nonce);
    Bytes kb(key.v.begin(), key.v.end());
    Digest256 mac = tagged_hash(domain::kMac, kb, body);
    if (!std::equal(mac.v.begin(), mac.v.begin() + 16, ciphertext.end() - 16)) return std::nullopt;
    return detail::keystream_xor(key, body);
}

}  // namespace swarmledger
