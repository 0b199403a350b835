#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "hcb/hash.hpp"

namespace hcb {

using AccountId = std::uint64_t;
using Nonce = std::uint64_t;
using Gwei = std::uint64_t;
using SimMs = double;

// Every transaction serializes to at least this many bytes (fixed fields,
// signature and envelope overhead); the payload seed adds to it.
inline constexpr std::uint32_t kMinTxBytes = 110;

/// 6-byte transaction identifier used inside compact and hybrid blocks.
struct ShortId {
    std::array<std::uint8_t, 6> bytes{};

    bool operator==(const ShortId&) const = default;
    auto operator<=>(const ShortId&) const = default;

    /// Packed value, usable as a map key (48 bits, big-endian order).
    std::uint64_t key() const {
        std::uint64_t k = 0;
        for (auto b : bytes) k = (k << 8) | b;
        return k;
    }
    std::string hex() const { return to_hex(bytes); }
};

struct ShortIdHasher {
    std::size_t operator()(const ShortId& s) const noexcept {
        std::uint64_t k = s.key();
        k *= 0x9e3779b97f4a7c15ull;
        return static_cast<std::size_t>(k ^ (k >> 29));
    }
};

struct Transaction {
    Hash32 tx_hash{};           // sha256 of the canonical fields below
    AccountId sender = 0;
    Nonce nonce = 0;
    Gwei max_fee = 0;
    Gwei max_priority_fee = 0;
    Gwei effective_fee = 0;     // min(max_fee, base_fee + max_priority_fee); refreshed per block
    std::uint32_t size_bytes = kMinTxBytes;
    std::vector<std::uint8_t> payload_seed;

    bool operator==(const Transaction& o) const { return tx_hash == o.tx_hash; }
};

/// Builds a transaction, deriving tx_hash and size_bytes from the fields.
/// effective_fee starts at min(max_fee, base_fee + max_priority_fee).
Transaction make_transaction(AccountId sender, Nonce nonce, Gwei max_fee, Gwei max_priority_fee,
                             std::vector<std::uint8_t> payload_seed, Gwei base_fee);

/// Preimage hashed to produce tx_hash (big-endian fixed fields + payload).
std::vector<std::uint8_t> tx_hash_preimage(AccountId sender, Nonce nonce, Gwei max_fee,
                                           Gwei max_priority_fee,
                                           std::span<const std::uint8_t> payload_seed);

ShortId derive_short_id(const Hash32& tx_hash);

struct BlockHeader {
    std::uint64_t height = 0;
    Hash32 parent_hash{};
    Hash32 body_hash{};
    Gwei base_fee = 0;
    std::uint64_t gas_used = 0;
    std::uint64_t timestamp_ms = 0;
};

struct Block {
    BlockHeader header;
    std::vector<Transaction> body;
};

/// Digest over the in-order concatenation of the body's tx hashes.
Hash32 compute_body_hash(const std::vector<Transaction>& body);

/// Identity of a block for chain linkage: hash of its encoded header.
Hash32 block_hash(const BlockHeader& header);

struct CompactBlock {
    BlockHeader header;
    std::vector<ShortId> entries;
};

/// One hybrid-block entry: either the full transaction (predicted missing
/// at receivers) or just its short id.
using HcbEntry = std::variant<Transaction, ShortId>;

struct HcbBlock {
    BlockHeader header;
    std::vector<HcbEntry> entries;

    std::size_t full_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += std::holds_alternative<Transaction>(e);
        return n;
    }
};

CompactBlock to_compact(const Block& block);

/// miss_flags[i] selects a full entry for body[i]; throws std::invalid_argument
/// on length mismatch.
HcbBlock to_hcb(const Block& block, const std::vector<bool>& miss_flags);

}  // namespace hcb
