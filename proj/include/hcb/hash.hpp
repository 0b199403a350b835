#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>

namespace hcb {

using Hash32 = std::array<std::uint8_t, 32>;

/// SHA-256 over an arbitrary byte span.
Hash32 sha256(std::span<const std::uint8_t> data);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Strict inverse of to_hex; throws std::invalid_argument on bad input.
std::array<std::uint8_t, 32> hash_from_hex(const std::string& hex);

/// First 8 bytes of a hash as a big-endian integer, for use as a map key.
inline std::uint64_t hash_key(const Hash32& h) {
    std::uint64_t k = 0;
    for (int i = 0; i < 8; ++i) k = (k << 8) | h[i];
    return k;
}

/// Incremental SHA-256 for digesting a stream of records (e.g. trace
/// hashing). update() after finish() restarts a fresh digest.
class Sha256Stream {
  public:
    Sha256Stream();
    ~Sha256Stream();
    Sha256Stream(const Sha256Stream&) = delete;
    Sha256Stream& operator=(const Sha256Stream&) = delete;

    void update(std::span<const std::uint8_t> data);
    Hash32 finish();

  private:
    void* ctx_ = nullptr;  // EVP_MD_CTX, kept opaque here
    bool live_ = false;
};

struct Hash32Hasher {
    std::size_t operator()(const Hash32& h) const noexcept {
        std::uint64_t k;
        std::memcpy(&k, h.data(), 8);
        return static_cast<std::size_t>(k);
    }
};

}  // namespace hcb
