// Offline search for short-id collisions, used once to produce the frozen
// sender pairs in tests/sid_fixture.hpp. Scans transactions that differ only
// in the sender field (nonce=0, max_fee=120, priority=3, empty payload) and
// reports sender pairs whose 6-byte short ids coincide.
//
// Build:  cmake --build build --target sid_collide
// Run:    ./build/sid_collide [count]        (default 120e6, ~2 GiB RAM)

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <vector>

#include <openssl/evp.h>

#include "hcb/tx.hpp"

namespace {

// One reusable digest context; EVP_Digest's per-call setup dominates at this
// message size.
struct FastSha {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    ~FastSha() { EVP_MD_CTX_free(ctx); }
    hcb::Hash32 operator()(const std::uint8_t* data, std::size_t len) {
        hcb::Hash32 out;
        unsigned int n = 0;
        EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
        EVP_DigestUpdate(ctx, data, len);
        EVP_DigestFinal_ex(ctx, out.data(), &n);
        return out;
    }
};

void put_u64_be(std::uint8_t* p, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) *p++ = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

int main(int argc, char** argv) {
    const std::uint64_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 120'000'000ull;
    const hcb::Gwei max_fee = 120, prio = 3;

    FastSha sha;
    std::uint8_t pre[32];
    put_u64_be(pre + 8, 0);        // nonce
    put_u64_be(pre + 16, max_fee);
    put_u64_be(pre + 24, prio);

    // The fast path must agree with the library's canonical preimage.
    for (std::uint64_t c = 0; c < 1000; ++c) {
        put_u64_be(pre, c);
        auto ref = hcb::make_transaction(c, 0, max_fee, prio, {}, 0);
        if (sha(pre, sizeof pre) != ref.tx_hash) {
            std::fprintf(stderr, "preimage mismatch at %llu\n", (unsigned long long)c);
            return 1;
        }
    }

    std::vector<std::uint64_t> keys(n);
    for (std::uint64_t c = 0; c < n; ++c) {
        put_u64_be(pre, c);
        keys[c] = hcb::derive_short_id(sha(pre, sizeof pre)).key();
        if (c % 10'000'000 == 0) { std::fprintf(stderr, "hash %llu\n", (unsigned long long)c); }
    }

    std::vector<std::uint64_t> sorted(keys);
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::uint64_t> dup_keys;
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i] == sorted[i - 1] && (dup_keys.empty() || dup_keys.back() != sorted[i]))
            dup_keys.push_back(sorted[i]);
    std::fprintf(stderr, "duplicate short ids: %zu\n", dup_keys.size());

    std::map<std::uint64_t, std::vector<std::uint64_t>> groups;
    for (std::uint64_t c = 0; c < n; ++c)
        if (std::binary_search(dup_keys.begin(), dup_keys.end(), keys[c]))
            groups[keys[c]].push_back(c);

    for (const auto& [key, senders] : groups) {
        std::printf("SID %012llx SENDERS", (unsigned long long)key);
        for (auto s : senders) std::printf(" %llu", (unsigned long long)s);
        std::printf("\n");
    }
    return 0;
}
