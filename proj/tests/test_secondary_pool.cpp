#include "doctest.h"

#include <random>
#include <set>
#include <string>

#include "hcb/secondary_pool.hpp"
#include "restore_oracle.hpp"
#include "sid_fixture.hpp"

using namespace hcb;

namespace {

Transaction mk(AccountId sender, Nonce nonce, Gwei fee) {
    return make_transaction(sender, nonce, fee, fee, {}, 0);
}

std::set<Hash32> store_hashes(const SecondaryPool& sp) {
    std::set<Hash32> out;
    for (const auto& e : sp.store()) out.insert(e.tx.tx_hash);
    return out;
}

}  // namespace

TEST_CASE("accept_evicted keeps the pool fee-ordered and capped") {
    SecondaryPool sp(2);
    CHECK(sp.accept_evicted({mk(1, 0, 50), 1}).result == SecondaryPool::AcceptResult::Stored);
    CHECK(sp.accept_evicted({mk(2, 0, 70), 2}).result == SecondaryPool::AcceptResult::Stored);
    CHECK(sp.store().front().tx.effective_fee == 70);  // descending order

    SUBCASE("full pool discards the lower-fee side") {
        auto out = sp.accept_evicted({mk(3, 0, 40), 3});
        CHECK(out.result == SecondaryPool::AcceptResult::DroppedSelf);
        CHECK(sp.size() == 2);

        out = sp.accept_evicted({mk(4, 0, 50), 4});  // ties keep the incumbent
        CHECK(out.result == SecondaryPool::AcceptResult::DroppedSelf);

        out = sp.accept_evicted({mk(5, 0, 60), 5});
        CHECK(out.result == SecondaryPool::AcceptResult::DroppedLowestFee);
        REQUIRE(out.dropped.has_value());
        CHECK(out.dropped->tx.effective_fee == 50);
        CHECK(store_hashes(sp) == std::set<Hash32>{mk(2, 0, 70).tx_hash, mk(5, 0, 60).tx_hash});
    }

    SUBCASE("drop victim is the oldest among the lowest fee") {
        SecondaryPool tied(2);
        tied.accept_evicted({mk(1, 0, 50), 10});
        tied.accept_evicted({mk(2, 0, 50), 5});
        auto out = tied.accept_evicted({mk(3, 0, 55), 20});
        REQUIRE(out.result == SecondaryPool::AcceptResult::DroppedLowestFee);
        CHECK(out.dropped->t_r == 5);
    }

    SUBCASE("re-offering a held transaction changes nothing") {
        auto out = sp.accept_evicted({mk(1, 0, 50), 9});
        CHECK(out.result == SecondaryPool::AcceptResult::DroppedSelf);
        CHECK(sp.size() == 2);
    }

    SUBCASE("zero cap stores nothing") {
        SecondaryPool none(0);
        CHECK(none.accept_evicted({mk(1, 0, 99), 1}).result ==
              SecondaryPool::AcceptResult::DroppedSelf);
        CHECK(none.size() == 0);
    }
}

TEST_CASE("set_dynamic_cap trims from the low-fee end") {
    SecondaryPool sp(10);
    for (Gwei f : {30, 10, 50, 20, 40})
        sp.accept_evicted({mk(f, 0, f), static_cast<SimMs>(f)});
    CHECK(sp.set_dynamic_cap(200000) == 200000);
    CHECK(sp.size() == 5);
    CHECK(sp.set_dynamic_cap(3) == 3);
    CHECK(store_hashes(sp) ==
          std::set<Hash32>{mk(30, 0, 30).tx_hash, mk(40, 0, 40).tx_hash, mk(50, 0, 50).tx_hash});
    CHECK(sp.set_dynamic_cap(3) == 3);  // no-op
    CHECK(sp.size() == 3);
}

TEST_CASE("lookup spans both pools and reports collisions") {
    SecondaryPool sp;
    TxPool pool(TxPool::Config{}, &sp);

    CHECK(sp.lookup(derive_short_id(mk(1, 0, 10).tx_hash)).empty());

    Transaction pooled = mk(1, 0, 60);
    REQUIRE(pool.admit(pooled, 1).result == AdmitResult::ToPending);
    auto got = sp.lookup(derive_short_id(pooled.tx_hash));
    REQUIRE(got.size() == 1);
    CHECK(got[0].tx_hash == pooled.tx_hash);

    auto [a, b] = sidfix::pair(0);
    REQUIRE(pool.admit(a, 2).result == AdmitResult::ToPending);
    sp.accept_evicted({b, 3});
    got = sp.lookup(derive_short_id(a.tx_hash));
    REQUIRE(got.size() == 2);
    std::set<Hash32> hashes{got[0].tx_hash, got[1].tx_hash};
    CHECK(hashes == std::set<Hash32>{a.tx_hash, b.tx_hash});

    std::string why;
    CHECK_MESSAGE(sp.check_map_exact(pool, &why), why);
}

TEST_CASE("restore: trivial guards") {
    SecondaryPool sp;
    TxPool pool(TxPool::Config{.pending_cap = 4, .queue_cap = 4}, &sp);
    REQUIRE(pool.admit(mk(1, 0, 50), 1).result == AdmitResult::ToPending);

    SUBCASE("empty secondary does nothing") {
        auto st = sp.restore(pool);
        CHECK(st.to_pending == 0);
        CHECK(st.to_queue == 0);
    }

    SUBCASE("top fee at or below both minima does nothing") {
        sp.accept_evicted({mk(2, 0, 50), 2});  // β == γ_p, empty queue ⇒ γ_q = 0 < β
        // γ = min(50, 0) = 0 < 50, and the entry is continuous with γ_p = 50
        // not < 50 and discontinuity false ⇒ γ_q branch needs !continuous.
        auto st = sp.restore(pool);
        CHECK(st.to_pending == 0);
        CHECK(st.to_queue == 0);
        CHECK(sp.size() == 1);
    }
}

TEST_CASE("restore: worked example with displacement on both sides") {
    SecondaryPool sp;
    TxPool pool(TxPool::Config{.pending_cap = 1, .queue_cap = 1}, &sp);
    pool.set_account(1, {0, AccountState::kDefaultBalance});  // A
    pool.set_account(2, {0, AccountState::kDefaultBalance});  // B
    pool.set_account(3, {0, AccountState::kDefaultBalance});  // C
    pool.set_account(4, {0, AccountState::kDefaultBalance});  // D

    REQUIRE(pool.admit(mk(1, 0, 10), 1).result == AdmitResult::ToPending);  // γ_p = 10
    REQUIRE(pool.admit(mk(4, 3, 8), 2).result == AdmitResult::ToQueue);     // γ_q = 8
    sp.accept_evicted({mk(2, 0, 20), 3});  // continuous for B
    sp.accept_evicted({mk(3, 5, 15), 4});  // discontinuous for C

    auto st = sp.restore(pool);
    CHECK(st.to_pending == 1);
    CHECK(st.to_queue == 1);
    CHECK(st.demoted == 2);

    REQUIRE(pool.pending().size() == 1);
    CHECK(pool.pending()[0].tx.effective_fee == 20);  // fee-20 displaced fee-10
    REQUIRE(pool.queue().size() == 1);
    CHECK(pool.queue()[0].tx.effective_fee == 15);  // fee-15 displaced fee-8
    CHECK(store_hashes(sp) == std::set<Hash32>{mk(1, 0, 10).tx_hash, mk(4, 3, 8).tx_hash});

    std::string why;
    CHECK_MESSAGE(sp.check_map_exact(pool, &why), why);
    CHECK_MESSAGE(pool.check_invariants(&why), why);
}

TEST_CASE("restore matches the verbatim interpreter on random triples") {
    std::mt19937_64 rng(0x5eed);
    for (int round = 0; round < 400; ++round) {
        auto su = restore_oracle::random_setup(rng);

        SecondaryPool sp(1 << 20);
        TxPool pool(su.cfg, &sp);
        restore_oracle::build(su, pool, sp);

        // Starting states must agree before comparing outcomes.
        REQUIRE(restore_oracle::hash_set(su.oracle.pending) ==
                restore_oracle::hash_set(pool.pending()));
        REQUIRE(restore_oracle::hash_set(su.oracle.queue) ==
                restore_oracle::hash_set(pool.queue()));
        REQUIRE(restore_oracle::hash_set(su.oracle.secondary) ==
                restore_oracle::hash_set(sp.store()));

        auto st = sp.restore(pool);
        restore_oracle::run(su.oracle);

        REQUIRE(restore_oracle::hash_set(su.oracle.pending) ==
                restore_oracle::hash_set(pool.pending()));
        REQUIRE(restore_oracle::hash_set(su.oracle.queue) ==
                restore_oracle::hash_set(pool.queue()));
        REQUIRE(restore_oracle::hash_set(su.oracle.secondary) ==
                restore_oracle::hash_set(sp.store()));
        REQUIRE(st.to_pending == su.oracle.moved_pending);
        REQUIRE(st.to_queue == su.oracle.moved_queue);
        REQUIRE(restore_oracle::no_profitable_move(su.oracle));

        std::string why;
        REQUIRE_MESSAGE(pool.check_invariants(&why), why);
        REQUIRE_MESSAGE(sp.check_map_exact(pool, &why), why);
    }
}

TEST_CASE("block_update composes invalidation, refresh and restore") {
    SecondaryPool sp;
    TxPool pool(TxPool::Config{.pending_cap = 2, .queue_cap = 4}, &sp);

    SUBCASE("disjoint block, same base fee, empty secondary: all zeros") {
        Transaction t = make_transaction(1, 0, 100, 10, {}, 40);  // effective 50
        REQUIRE(pool.admit(t, 1).result == AdmitResult::ToPending);
        Block blk;
        blk.header.base_fee = 40;
        blk.body = {make_transaction(9, 0, 80, 5, {}, 40)};
        auto rep = sp.block_update(pool, blk, FeeContext{40});
        CHECK(rep.invalidated == 0);
        CHECK(rep.refeed == 0);
        CHECK(rep.restored_pending == 0);
        CHECK(rep.restored_queue == 0);
    }

    SUBCASE("base fee drop restores a secondary transaction to pending") {
        // Pending pair admitted at base 100; the secondary tx is fee-capped.
        Transaction p1 = make_transaction(1, 0, 115, 20, {}, 100);  // effective 115
        Transaction p2 = make_transaction(2, 0, 130, 20, {}, 100);  // effective 120
        REQUIRE(pool.admit(p1, 1).result == AdmitResult::ToPending);
        REQUIRE(pool.admit(p2, 2).result == AdmitResult::ToPending);
        Transaction s1 = make_transaction(3, 0, 200, 80, {}, 100);  // effective 180
        s1.effective_fee = 110;  // as it stood when it was evicted
        sp.accept_evicted({s1, 3});

        // Next block's base fee collapses to 30: p1 → 50, p2 → 50, s1 → 110.
        Block blk;
        blk.header.base_fee = 30;
        blk.header.gas_used = 0;
        auto rep = sp.block_update(pool, blk, FeeContext{30});
        CHECK(rep.refeed == 2);  // p1 and p2 move; s1 sits at 110 either way
        CHECK(rep.restored_pending == 1);
        CHECK(rep.restored_queue == 0);
        CHECK(pool.pending().size() == 2);  // s1 displaced the new minimum (p1)
        CHECK(sp.size() == 1);
        CHECK(sp.store()[0].tx.tx_hash == p1.tx_hash);

        // Same context again: nothing left to do.
        auto again = sp.block_update(pool, blk, FeeContext{30});
        CHECK(again.invalidated == 0);
        CHECK(again.refeed == 0);
        CHECK(again.restored_pending == 0);
        CHECK(again.restored_queue == 0);
    }

    SUBCASE("confirmed and unpayable entries leave both pools") {
        Transaction a = mk(1, 0, 60), b = mk(1, 1, 70), c = mk(2, 0, 40);
        REQUIRE(pool.admit(a, 1).result == AdmitResult::ToPending);
        REQUIRE(pool.admit(b, 2).result == AdmitResult::ToPending);
        sp.accept_evicted({c, 3});

        pool.set_balance(2, 10);  // c now unpayable
        Block blk;
        blk.header.base_fee = 0;
        blk.body = {a};
        auto rep = sp.block_update(pool, blk, FeeContext{1});
        CHECK(rep.invalidated == 2);  // a confirmed, c unpayable
        CHECK(pool.pending().size() == 1);
        CHECK(sp.size() == 0);
        std::string why;
        CHECK_MESSAGE(sp.check_map_exact(pool, &why), why);
    }
}

TEST_CASE("short-id map stays exact through random operation sequences") {
    std::mt19937_64 rng(0x11ab);
    SecondaryPool sp(6);
    TxPool pool(TxPool::Config{.pending_cap = 4, .queue_cap = 3}, &sp);
    SimMs now = 0;

    for (int step = 0; step < 1000; ++step) {
        now += 1;
        switch (rng() % 6) {
            case 0:
            case 1:
            case 2: {  // admit, handing evictions to the secondary
                Transaction tx = mk(1 + rng() % 4, rng() % 6, 1 + rng() % 60);
                auto out = pool.admit(tx, now);
                for (auto& e : out.evicted) sp.accept_evicted(std::move(e));
                if (out.result == AdmitResult::RejectedLowFee) sp.accept_evicted({tx, now});
                break;
            }
            case 3: {  // confirm a couple of nonces
                AccountId s = 1 + rng() % 4;
                Block blk;
                blk.header.base_fee = rng() % 40;
                Nonce from = pool.account(s).next_nonce;
                for (Nonce n = from; n < from + 1 + rng() % 2; ++n)
                    blk.body.push_back(mk(s, n, 1 + rng() % 60));
                sp.block_update(pool, blk, FeeContext{1 + rng() % 40});
                break;
            }
            case 4: {  // pure restore
                sp.restore(pool);
                break;
            }
            case 5: {  // cap churn
                sp.set_dynamic_cap(2 + rng() % 8);
                break;
            }
        }
        std::string why;
        REQUIRE_MESSAGE(sp.check_map_exact(pool, &why), why);
        REQUIRE_MESSAGE(pool.check_invariants(&why), why);
        REQUIRE(sp.size() <= sp.cap());
    }
}
