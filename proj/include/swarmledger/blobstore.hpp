#pragma once

#include <map>

#include "swarmledger/crypto.hpp"

namespace swarmledger {

// Content-addressed off-chain storage. Robots park bulk data (sensor
// readings, ciphertexts) here and put only the 32-byte digest on
// chain, so anyone can check what changed hands without the ledger
// carrying the bytes.
class BlobStore {
  public:
    Digest256 put(Bytes data) {
        Digest256 key = hash(data);
        blobs_.emplace(key, std::move(data));
        return key;
    }

    const Bytes* get(const Digest256& key) const {
        auto it = blobs_.find(key);
        return it == blobs_.end() ? nullptr : &it->second;
    }

    bool contains(const Digest256& key) const { return blobs_.count(key) != 0; }
    size_t size() const { return blobs_.size(); }
    const std::map<Digest256, Bytes>& all() const { return blobs_; }

  private:
    std::map<Digest256, Bytes> blobs_;
};

}  // namespace swarmledger
