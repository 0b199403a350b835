#include "hcb/tx.hpp"

#include <algorithm>
#include <stdexcept>

namespace hcb {

static void put_u64_be(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> tx_hash_preimage(AccountId sender, Nonce nonce, Gwei max_fee,
                                           Gwei max_priority_fee,
                                           std::span<const std::uint8_t> payload_seed) {
    std::vector<std::uint8_t> buf;
    buf.reserve(32 + payload_seed.size());
    put_u64_be(buf, sender);
    put_u64_be(buf, nonce);
    put_u64_be(buf, max_fee);
    put_u64_be(buf, max_priority_fee);
    buf.insert(buf.end(), payload_seed.begin(), payload_seed.end());
    return buf;
}

Transaction make_transaction(AccountId sender, Nonce nonce, Gwei max_fee, Gwei max_priority_fee,
                             std::vector<std::uint8_t> payload_seed, Gwei base_fee) {
    Transaction tx;
    tx.sender = sender;
    tx.nonce = nonce;
    tx.max_fee = max_fee;
    tx.max_priority_fee = max_priority_fee;
    tx.tx_hash = sha256(tx_hash_preimage(sender, nonce, max_fee, max_priority_fee, payload_seed));
    tx.size_bytes = kMinTxBytes + static_cast<std::uint32_t>(payload_seed.size());
    tx.payload_seed = std::move(payload_seed);
    tx.effective_fee = std::min(max_fee, base_fee + max_priority_fee);
    return tx;
}

ShortId derive_short_id(const Hash32& tx_hash) {
    ShortId sid;
    std::copy_n(tx_hash.begin(), sid.bytes.size(), sid.bytes.begin());
    return sid;
}

Hash32 compute_body_hash(const std::vector<Transaction>& body) {
    std::vector<std::uint8_t> buf;
    buf.reserve(body.size() * 32);
    for (const auto& tx : body) buf.insert(buf.end(), tx.tx_hash.begin(), tx.tx_hash.end());
    return sha256(buf);
}

Hash32 block_hash(const BlockHeader& header) {
    std::vector<std::uint8_t> buf;
    put_u64_be(buf, header.height);
    buf.insert(buf.end(), header.parent_hash.begin(), header.parent_hash.end());
    buf.insert(buf.end(), header.body_hash.begin(), header.body_hash.end());
    put_u64_be(buf, header.base_fee);
    put_u64_be(buf, header.gas_used);
    put_u64_be(buf, header.timestamp_ms);
    return sha256(buf);
}

CompactBlock to_compact(const Block& block) {
    CompactBlock cb;
    cb.header = block.header;
    cb.entries.reserve(block.body.size());
    for (const auto& tx : block.body) cb.entries.push_back(derive_short_id(tx.tx_hash));
    return cb;
}

HcbBlock to_hcb(const Block& block, const std::vector<bool>& miss_flags) {
    if (miss_flags.size() != block.body.size())
        throw std::invalid_argument("to_hcb: miss_flags length mismatch");
    HcbBlock hb;
    hb.header = block.header;
    hb.entries.reserve(block.body.size());
    for (std::size_t i = 0; i < block.body.size(); ++i) {
        if (miss_flags[i])
            hb.entries.emplace_back(block.body[i]);
        else
            hb.entries.emplace_back(derive_short_id(block.body[i].tx_hash));
    }
    return hb;
}

}  // namespace hcb
