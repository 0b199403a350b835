#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hcb/tx.hpp"

// Canonical byte serialization. All integers are big-endian; variable-length
// fields are length-prefixed. Sizes are part of the contract: the simulator's
// bandwidth accounting uses encoded_size() values, and tests check that
// encode() output lengths match them exactly.
//
//   Transaction   sender u64 | nonce u64 | max_fee u64 | max_priority_fee u64
//                 | payload_len u32 | payload | zero padding to 110+payload_len
//                 (the padding stands in for signature/envelope bytes, so the
//                  encoded length equals Transaction::size_bytes; tx_hash and
//                  effective_fee are derived and never serialized)
//   BlockHeader   height u64 | parent_hash 32 | body_hash 32 | base_fee u64
//                 | gas_used u64 | timestamp_ms u64 | 24 reserved zero bytes
//                 (120 bytes flat)
//   Block         header | count u32 | transactions
//   CompactBlock  header | count u32 | 6-byte short ids
//   HcbBlock      header | count u32 | entries, each tag u8 (0 = short id,
//                 1 = full transaction) followed by the entry bytes
//   Announcement  block_hash 32 | height u64   (40 bytes)

namespace hcb {

inline constexpr std::size_t kHeaderBytes = 120;
inline constexpr std::size_t kShortIdBytes = 6;
inline constexpr std::size_t kAnnounceBytes = 40;
inline constexpr std::size_t kCountBytes = 4;
inline constexpr std::size_t kEntryTagBytes = 1;

using Bytes = std::vector<std::uint8_t>;

void encode_transaction(Bytes& out, const Transaction& tx);
void encode_header(Bytes& out, const BlockHeader& h);
Bytes encode_block(const Block& b);
Bytes encode_compact(const CompactBlock& cb);
Bytes encode_hcb(const HcbBlock& hb);

// Decoders recompute derived fields (tx_hash, size_bytes); effective_fee is
// initialized to max_fee and re-derived by the receiving pool.
struct ByteReader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
};

// Primitive accessors shared by the block and message codecs. Readers throw
// std::runtime_error on truncation.
void put_u64(Bytes& out, std::uint64_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_hash(Bytes& out, const Hash32& h);
std::uint64_t get_u64(ByteReader& r);
std::uint32_t get_u32(ByteReader& r);
Hash32 get_hash(ByteReader& r);
ShortId get_short_id(ByteReader& r);
Transaction decode_transaction(ByteReader& r);
BlockHeader decode_header(ByteReader& r);
Block decode_block(std::span<const std::uint8_t> data);
CompactBlock decode_compact(std::span<const std::uint8_t> data);
HcbBlock decode_hcb(std::span<const std::uint8_t> data);

std::size_t encoded_size(const Transaction& tx);
std::size_t encoded_size(const Block& b);
std::size_t encoded_size(const CompactBlock& cb);
std::size_t encoded_size(const HcbBlock& hb);

}  // namespace hcb
