#include "hcb/codec.hpp"

#include <stdexcept>

namespace hcb {

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_hash(Bytes& out, const Hash32& h) { out.insert(out.end(), h.begin(), h.end()); }

std::uint64_t get_u64(ByteReader& r) {
    if (r.pos + 8 > r.data.size()) throw std::runtime_error("decode: truncated u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | r.data[r.pos++];
    return v;
}

std::uint32_t get_u32(ByteReader& r) {
    if (r.pos + 4 > r.data.size()) throw std::runtime_error("decode: truncated u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | r.data[r.pos++];
    return v;
}

Hash32 get_hash(ByteReader& r) {
    if (r.pos + 32 > r.data.size()) throw std::runtime_error("decode: truncated hash");
    Hash32 h;
    std::copy_n(r.data.begin() + static_cast<std::ptrdiff_t>(r.pos), 32, h.begin());
    r.pos += 32;
    return h;
}

ShortId get_short_id(ByteReader& r) {
    if (r.pos + kShortIdBytes > r.data.size()) throw std::runtime_error("decode: truncated short id");
    ShortId sid;
    std::copy_n(r.data.begin() + static_cast<std::ptrdiff_t>(r.pos), kShortIdBytes,
                sid.bytes.begin());
    r.pos += kShortIdBytes;
    return sid;
}

namespace {

// Fixed fields of a transaction before the payload: 4 u64 + payload_len u32.
constexpr std::size_t kTxFixedBytes = 36;
static_assert(kTxFixedBytes < kMinTxBytes);

}  // namespace

void encode_transaction(Bytes& out, const Transaction& tx) {
    put_u64(out, tx.sender);
    put_u64(out, tx.nonce);
    put_u64(out, tx.max_fee);
    put_u64(out, tx.max_priority_fee);
    put_u32(out, static_cast<std::uint32_t>(tx.payload_seed.size()));
    out.insert(out.end(), tx.payload_seed.begin(), tx.payload_seed.end());
    out.insert(out.end(), kMinTxBytes - kTxFixedBytes, 0);
}

Transaction decode_transaction(ByteReader& r) {
    AccountId sender = get_u64(r);
    Nonce nonce = get_u64(r);
    Gwei max_fee = get_u64(r);
    Gwei prio = get_u64(r);
    std::uint32_t plen = get_u32(r);
    if (r.pos + plen > r.data.size()) throw std::runtime_error("decode: truncated payload");
    std::vector<std::uint8_t> payload(r.data.begin() + static_cast<std::ptrdiff_t>(r.pos),
                                      r.data.begin() + static_cast<std::ptrdiff_t>(r.pos + plen));
    r.pos += plen;
    if (r.pos + (kMinTxBytes - kTxFixedBytes) > r.data.size())
        throw std::runtime_error("decode: truncated tx padding");
    r.pos += kMinTxBytes - kTxFixedBytes;
    // effective_fee starts at max_fee; the receiving pool re-derives it.
    Transaction tx = make_transaction(sender, nonce, max_fee, prio, std::move(payload), 0);
    return tx;
}

void encode_header(Bytes& out, const BlockHeader& h) {
    put_u64(out, h.height);
    out.insert(out.end(), h.parent_hash.begin(), h.parent_hash.end());
    out.insert(out.end(), h.body_hash.begin(), h.body_hash.end());
    put_u64(out, h.base_fee);
    put_u64(out, h.gas_used);
    put_u64(out, h.timestamp_ms);
    out.insert(out.end(), kHeaderBytes - 96, 0);
}

BlockHeader decode_header(ByteReader& r) {
    BlockHeader h;
    h.height = get_u64(r);
    h.parent_hash = get_hash(r);
    h.body_hash = get_hash(r);
    h.base_fee = get_u64(r);
    h.gas_used = get_u64(r);
    h.timestamp_ms = get_u64(r);
    if (r.pos + (kHeaderBytes - 96) > r.data.size())
        throw std::runtime_error("decode: truncated header");
    r.pos += kHeaderBytes - 96;
    return h;
}

Bytes encode_block(const Block& b) {
    Bytes out;
    out.reserve(encoded_size(b));
    encode_header(out, b.header);
    put_u32(out, static_cast<std::uint32_t>(b.body.size()));
    for (const auto& tx : b.body) encode_transaction(out, tx);
    return out;
}

Block decode_block(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    Block b;
    b.header = decode_header(r);
    std::uint32_t n = get_u32(r);
    b.body.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) b.body.push_back(decode_transaction(r));
    return b;
}

Bytes encode_compact(const CompactBlock& cb) {
    Bytes out;
    out.reserve(encoded_size(cb));
    encode_header(out, cb.header);
    put_u32(out, static_cast<std::uint32_t>(cb.entries.size()));
    for (const auto& sid : cb.entries) out.insert(out.end(), sid.bytes.begin(), sid.bytes.end());
    return out;
}

CompactBlock decode_compact(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    CompactBlock cb;
    cb.header = decode_header(r);
    std::uint32_t n = get_u32(r);
    cb.entries.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (r.pos + kShortIdBytes > r.data.size()) throw std::runtime_error("decode: truncated sid");
        std::copy_n(r.data.begin() + static_cast<std::ptrdiff_t>(r.pos), kShortIdBytes,
                    cb.entries[i].bytes.begin());
        r.pos += kShortIdBytes;
    }
    return cb;
}

Bytes encode_hcb(const HcbBlock& hb) {
    Bytes out;
    out.reserve(encoded_size(hb));
    encode_header(out, hb.header);
    put_u32(out, static_cast<std::uint32_t>(hb.entries.size()));
    for (const auto& e : hb.entries) {
        if (const auto* tx = std::get_if<Transaction>(&e)) {
            out.push_back(1);
            encode_transaction(out, *tx);
        } else {
            out.push_back(0);
            const auto& sid = std::get<ShortId>(e);
            out.insert(out.end(), sid.bytes.begin(), sid.bytes.end());
        }
    }
    return out;
}

HcbBlock decode_hcb(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    HcbBlock hb;
    hb.header = decode_header(r);
    std::uint32_t n = get_u32(r);
    hb.entries.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (r.pos >= r.data.size()) throw std::runtime_error("decode: truncated entry tag");
        std::uint8_t tag = r.data[r.pos++];
        if (tag == 1) {
            hb.entries.emplace_back(decode_transaction(r));
        } else if (tag == 0) {
            ShortId sid;
            if (r.pos + kShortIdBytes > r.data.size())
                throw std::runtime_error("decode: truncated sid");
            std::copy_n(r.data.begin() + static_cast<std::ptrdiff_t>(r.pos), kShortIdBytes,
                        sid.bytes.begin());
            r.pos += kShortIdBytes;
            hb.entries.emplace_back(sid);
        } else {
            throw std::runtime_error("decode: bad hcb entry tag");
        }
    }
    return hb;
}

std::size_t encoded_size(const Transaction& tx) { return tx.size_bytes; }

std::size_t encoded_size(const Block& b) {
    std::size_t n = kHeaderBytes + kCountBytes;
    for (const auto& tx : b.body) n += tx.size_bytes;
    return n;
}

std::size_t encoded_size(const CompactBlock& cb) {
    return kHeaderBytes + kCountBytes + cb.entries.size() * kShortIdBytes;
}

std::size_t encoded_size(const HcbBlock& hb) {
    std::size_t n = kHeaderBytes + kCountBytes;
    for (const auto& e : hb.entries) {
        n += kEntryTagBytes;
        if (const auto* tx = std::get_if<Transaction>(&e))
            n += tx->size_bytes;
        else
            n += kShortIdBytes;
    }
    return n;
}

}  // namespace hcb
