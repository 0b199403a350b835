#include "doctest.h"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcb/codec.hpp"
#include "hcb/hash.hpp"
#include "hcb/tx.hpp"

using namespace hcb;

namespace {

// Reference digest straight through OpenSSL, bypassing the library wrapper.
Hash32 ref_sha256(const std::vector<std::uint8_t>& data) {
    Hash32 out{};
    unsigned int n = 0;
    EVP_Digest(data.data(), data.size(), out.data(), &n, EVP_sha256(), nullptr);
    return out;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) {
    return {s.begin(), s.end()};
}

Transaction tx_of(AccountId sender, Nonce nonce = 0, Gwei fee = 100, Gwei prio = 2) {
    return make_transaction(sender, nonce, fee, prio, {}, 50);
}

}  // namespace

TEST_CASE("sha256 known answers") {
    CHECK(to_hex(sha256({})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    auto abc = bytes_of("abc");
    CHECK(to_hex(sha256(abc)) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("hex round trip and strictness") {
    Hash32 h = sha256(bytes_of("round trip"));
    CHECK(hash_from_hex(to_hex(h)) == h);
    CHECK_THROWS_AS(hash_from_hex("zz"), std::invalid_argument);
    CHECK_THROWS_AS(hash_from_hex(std::string(63, 'a')), std::invalid_argument);
    CHECK_THROWS_AS(hash_from_hex(std::string(64, 'g')), std::invalid_argument);
}

TEST_CASE("tx hash matches hand-assembled preimage") {
    std::vector<std::uint8_t> payload = {0xde, 0xad, 0xbe, 0xef};
    Transaction tx = make_transaction(7, 3, 250, 9, payload, 100);

    // Big-endian u64 fields, then the payload, hashed with sha256.
    std::vector<std::uint8_t> pre;
    for (std::uint64_t v : {std::uint64_t{7}, std::uint64_t{3}, std::uint64_t{250},
                            std::uint64_t{9}})
        for (int i = 7; i >= 0; --i) pre.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    pre.insert(pre.end(), payload.begin(), payload.end());
    CHECK(tx.tx_hash == ref_sha256(pre));

    // Short id is the hash's first six bytes, nothing else.
    ShortId sid = derive_short_id(tx.tx_hash);
    CHECK(std::memcmp(sid.bytes.data(), tx.tx_hash.data(), 6) == 0);
    CHECK(sid.key() == (hash_key(tx.tx_hash) >> 16));
}

TEST_CASE("transaction derived fields") {
    Transaction a = make_transaction(1, 0, 100, 10, {}, 50);
    CHECK(a.size_bytes == kMinTxBytes);
    CHECK(a.effective_fee == 60);  // base_fee + prio below the cap

    Transaction b = make_transaction(1, 0, 100, 10, std::vector<std::uint8_t>(40, 1), 95);
    CHECK(b.size_bytes == kMinTxBytes + 40);
    CHECK(b.effective_fee == 100);  // capped at max_fee

    // Identity is the hash: same fields, same hash; any field change flips it.
    CHECK(make_transaction(1, 0, 100, 10, {}, 99).tx_hash == a.tx_hash);
    CHECK(make_transaction(2, 0, 100, 10, {}, 50).tx_hash != a.tx_hash);
    CHECK(make_transaction(1, 1, 100, 10, {}, 50).tx_hash != a.tx_hash);
    CHECK(make_transaction(1, 0, 101, 10, {}, 50).tx_hash != a.tx_hash);
    CHECK(make_transaction(1, 0, 100, 11, {}, 50).tx_hash != a.tx_hash);
    CHECK(make_transaction(1, 0, 100, 10, {1}, 50).tx_hash != a.tx_hash);
}

TEST_CASE("body hash is order sensitive and matches concatenated digests") {
    Transaction t1 = tx_of(1), t2 = tx_of(2), t3 = tx_of(3);

    CHECK(compute_body_hash({}) == ref_sha256({}));

    std::vector<std::uint8_t> cat;
    for (const auto& t : {t1, t2, t3}) cat.insert(cat.end(), t.tx_hash.begin(), t.tx_hash.end());
    CHECK(compute_body_hash({t1, t2, t3}) == ref_sha256(cat));
    CHECK(compute_body_hash({t1, t2, t3}) != compute_body_hash({t3, t2, t1}));
    CHECK(compute_body_hash({t1}) != compute_body_hash({t2}));
}

TEST_CASE("block hash depends on every header field") {
    BlockHeader h;
    h.height = 5;
    h.parent_hash = sha256(bytes_of("parent"));
    h.body_hash = sha256(bytes_of("body"));
    h.base_fee = 77;
    h.gas_used = 140;
    h.timestamp_ms = 123456;
    Hash32 base = block_hash(h);

    auto changed = [&](auto mut) {
        BlockHeader c = h;
        mut(c);
        return block_hash(c) != base;
    };
    CHECK(changed([](BlockHeader& c) { c.height++; }));
    CHECK(changed([](BlockHeader& c) { c.parent_hash[0] ^= 1; }));
    CHECK(changed([](BlockHeader& c) { c.body_hash[31] ^= 1; }));
    CHECK(changed([](BlockHeader& c) { c.base_fee++; }));
    CHECK(changed([](BlockHeader& c) { c.gas_used++; }));
    CHECK(changed([](BlockHeader& c) { c.timestamp_ms++; }));
}

TEST_CASE("compact and hybrid projections of a block") {
    Block blk;
    blk.header.height = 9;
    blk.body = {tx_of(10), tx_of(11), tx_of(12)};
    blk.header.body_hash = compute_body_hash(blk.body);

    CompactBlock cb = to_compact(blk);
    REQUIRE(cb.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(cb.entries[i] == derive_short_id(blk.body[i].tx_hash));

    HcbBlock hb = to_hcb(blk, {true, false, false});
    REQUIRE(hb.entries.size() == 3);
    CHECK(hb.full_count() == 1);
    CHECK(std::get<Transaction>(hb.entries[0]) == blk.body[0]);
    CHECK(std::get<ShortId>(hb.entries[1]) == derive_short_id(blk.body[1].tx_hash));
    CHECK(std::get<ShortId>(hb.entries[2]) == derive_short_id(blk.body[2].tx_hash));

    CHECK(to_hcb(blk, {false, false, false}).full_count() == 0);
    CHECK(to_hcb(blk, {true, true, true}).full_count() == 3);
    CHECK_THROWS_AS(to_hcb(blk, {true}), std::invalid_argument);
}

TEST_CASE("codec round trips and exact sizes") {
    Block blk;
    blk.header.height = 42;
    blk.header.parent_hash = sha256(bytes_of("p"));
    blk.header.base_fee = 63;
    blk.header.timestamp_ms = 99000;
    blk.body = {make_transaction(5, 1, 90, 4, {1, 2, 3}, 63), tx_of(6), tx_of(7)};
    blk.header.body_hash = compute_body_hash(blk.body);
    blk.header.gas_used = blk.body.size();

    SUBCASE("transaction") {
        Bytes buf;
        encode_transaction(buf, blk.body[0]);
        CHECK(buf.size() == encoded_size(blk.body[0]));
        CHECK(buf.size() == blk.body[0].size_bytes);
        ByteReader r{buf};
        Transaction back = decode_transaction(r);
        CHECK(r.pos == buf.size());
        CHECK(back.tx_hash == blk.body[0].tx_hash);
        CHECK(back.sender == 5);
        CHECK(back.nonce == 1);
        CHECK(back.max_fee == 90);
        CHECK(back.max_priority_fee == 4);
        CHECK(back.payload_seed == std::vector<std::uint8_t>{1, 2, 3});
        CHECK(back.size_bytes == blk.body[0].size_bytes);
    }

    SUBCASE("header is flat 120 bytes") {
        Bytes buf;
        encode_header(buf, blk.header);
        CHECK(buf.size() == kHeaderBytes);
        ByteReader r{buf};
        BlockHeader back = decode_header(r);
        CHECK(block_hash(back) == block_hash(blk.header));
    }

    SUBCASE("block") {
        Bytes buf = encode_block(blk);
        CHECK(buf.size() == encoded_size(blk));
        Block back = decode_block(buf);
        CHECK(back.body.size() == 3);
        CHECK(compute_body_hash(back.body) == blk.header.body_hash);
        CHECK(encode_block(back) == buf);
    }

    SUBCASE("compact block") {
        CompactBlock cb = to_compact(blk);
        Bytes buf = encode_compact(cb);
        CHECK(buf.size() == encoded_size(cb));
        CHECK(buf.size() == kHeaderBytes + kCountBytes + 3 * kShortIdBytes);
        CompactBlock back = decode_compact(buf);
        CHECK(back.entries == cb.entries);
        CHECK(encode_compact(back) == buf);
    }

    SUBCASE("hybrid block, mixed entries") {
        HcbBlock hb = to_hcb(blk, {false, true, false});
        Bytes buf = encode_hcb(hb);
        CHECK(buf.size() == encoded_size(hb));
        CHECK(buf.size() == kHeaderBytes + kCountBytes + 3 * kEntryTagBytes +
                                2 * kShortIdBytes + blk.body[1].size_bytes);
        HcbBlock back = decode_hcb(buf);
        REQUIRE(back.entries.size() == 3);
        CHECK(back.full_count() == 1);
        CHECK(std::get<Transaction>(back.entries[1]).tx_hash == blk.body[1].tx_hash);
        CHECK(encode_hcb(back) == buf);
    }

    SUBCASE("size ordering across representations") {
        CompactBlock cb = to_compact(blk);
        HcbBlock all_short = to_hcb(blk, {false, false, false});
        HcbBlock all_full = to_hcb(blk, {true, true, true});
        CHECK(encoded_size(cb) < encoded_size(all_short));
        CHECK(encoded_size(all_short) < encoded_size(all_full));
        CHECK(encoded_size(all_full) == encoded_size(blk) + 3 * kEntryTagBytes);
    }
}

TEST_CASE("decoders reject malformed input") {
    Block blk;
    blk.body = {tx_of(1)};
    blk.header.body_hash = compute_body_hash(blk.body);
    Bytes buf = encode_block(blk);

    for (std::size_t cut : {buf.size() - 1, kHeaderBytes + 2, std::size_t{5}, std::size_t{0}}) {
        Bytes shortbuf(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK_THROWS_AS(decode_block(shortbuf), std::runtime_error);
    }

    HcbBlock hb = to_hcb(blk, {false});
    Bytes hbuf = encode_hcb(hb);
    hbuf[kHeaderBytes + kCountBytes] = 7;  // invalid entry tag
    CHECK_THROWS_AS(decode_hcb(hbuf), std::runtime_error);
}
