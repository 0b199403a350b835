#include "hcb/secondary_pool.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace hcb {

void SecondaryPool::map_add(const Transaction& tx) {
    auto& bucket = sid_map_[derive_short_id(tx.tx_hash).key()];
    for (const auto& t : bucket)
        if (t.tx_hash == tx.tx_hash) return;  // already covered
    bucket.push_back(tx);
}

void SecondaryPool::map_remove(const Transaction& tx) {
    auto it = sid_map_.find(derive_short_id(tx.tx_hash).key());
    if (it == sid_map_.end()) return;
    auto& bucket = it->second;
    for (std::size_t i = 0; i < bucket.size(); ++i) {
        if (bucket[i].tx_hash == tx.tx_hash) {
            bucket.erase(bucket.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (bucket.empty()) sid_map_.erase(it);
}

void SecondaryPool::on_add(const Transaction& tx) { map_add(tx); }
void SecondaryPool::on_remove(const Transaction& tx) { map_remove(tx); }

void SecondaryPool::store_insert(PoolEntry e) {
    map_add(e.tx);
    auto it = std::upper_bound(store_.begin(), store_.end(), e, fee_greater);
    store_.insert(it, std::move(e));
}

PoolEntry SecondaryPool::store_take(std::size_t idx) {
    assert(idx < store_.size());
    PoolEntry e = std::move(store_[idx]);
    store_.erase(store_.begin() + static_cast<std::ptrdiff_t>(idx));
    map_remove(e.tx);
    return e;
}

std::size_t SecondaryPool::min_fee_index() const {
    assert(!store_.empty());
    std::size_t best = 0;
    for (std::size_t i = 1; i < store_.size(); ++i)
        if (fee_less(store_[i], store_[best])) best = i;
    return best;
}

bool SecondaryPool::in_store(const Hash32& tx_hash) const {
    for (const auto& e : store_)
        if (e.tx.tx_hash == tx_hash) return true;
    return false;
}

SecondaryPool::Accept SecondaryPool::accept_evicted(PoolEntry e) {
    Accept out;
    if (in_store(e.tx.tx_hash)) {
        out.result = AcceptResult::DroppedSelf;  // already held
        return out;
    }
    if (store_.size() >= cap_) {
        if (cap_ == 0 || e.tx.effective_fee <= store_[min_fee_index()].tx.effective_fee) {
            out.result = AcceptResult::DroppedSelf;
            return out;
        }
        out.dropped = store_take(min_fee_index());
        out.result = AcceptResult::DroppedLowestFee;
    }
    store_insert(std::move(e));
    return out;
}

std::size_t SecondaryPool::set_dynamic_cap(std::size_t unconfirmed_estimate) {
    cap_ = unconfirmed_estimate;
    while (store_.size() > cap_) store_take(min_fee_index());
    return cap_;
}

std::vector<Transaction> SecondaryPool::lookup(const ShortId& sid) const {
    auto it = sid_map_.find(sid.key());
    return it == sid_map_.end() ? std::vector<Transaction>{} : it->second;
}

UpdateReport SecondaryPool::block_update(TxPool& pool, const Block& block,
                                         const FeeContext& fee_ctx) {
    UpdateReport rep;

    // 1) Invalidation. Confirmed nonces advance accounts first, then both
    //    pools shed confirmed, stale and unpayable entries.
    RemoveReport rc = pool.remove_confirmed(block);
    rep.invalidated += rc.removed;
    for (auto& e : rc.evicted) accept_evicted(std::move(e));

    SweepReport sw = pool.sweep_invalid();
    rep.invalidated += sw.removed;
    for (auto& e : sw.demoted) accept_evicted(std::move(e));

    for (std::size_t i = store_.size(); i-- > 0;) {
        AccountState acct = pool.account(store_[i].tx.sender);
        if (store_[i].tx.nonce < acct.next_nonce || acct.balance < store_[i].tx.max_fee) {
            store_take(i);
            ++rep.invalidated;
        }
    }

    // 2) EIP-1559 fee refresh for everything that remains.
    rep.refeed += pool.refresh_fees(fee_ctx.base_fee);
    for (auto& e : store_) {
        Gwei nf = std::min(e.tx.max_fee, fee_ctx.base_fee + e.tx.max_priority_fee);
        rep.refeed += nf != e.tx.effective_fee;
        e.tx.effective_fee = nf;
    }
    std::sort(store_.begin(), store_.end(), fee_greater);

    // 3) Restore.
    RestoreStats rs = restore(pool);
    rep.restored_pending = rs.to_pending;
    rep.restored_queue = rs.to_queue;
    return rep;
}

RestoreStats SecondaryPool::restore(TxPool& pool) {
    RestoreStats st;
    // Termination is structural (each transaction enters Pending at most once
    // and Queue at most once; γ_p and γ_q never decrease); the cap is a
    // safety net only and is sized to never bind.
    const std::size_t total = pool.size() + store_.size() + 2;
    const std::size_t iter_cap = 16 * total * total;
    std::size_t cursor = 0;  // position of Tx_s in the fee-descending store

    while (st.iterations++ < iter_cap) {
        if (cursor >= store_.size()) break;  // G_s exhausted: no movable entry
        const PoolEntry* tp = pool.peek_min_pending();
        const PoolEntry* tq = pool.peek_min_queue();
        const Gwei gp = tp ? tp->tx.effective_fee : 0;  // empty pool poses no bar
        const Gwei gq = tq ? tq->tx.effective_fee : 0;
        const Gwei beta = store_[cursor].tx.effective_fee;
        if (std::min(gp, gq) >= beta) break;  // loop guard γ < β

        const bool continuous =
            pool.is_continuous(store_[cursor].tx.sender, store_[cursor].tx.nonce);
        if (continuous && gp < beta) {
            PoolEntry moving = store_take(cursor);
            const bool was_full = pool.pending_full();
            if (was_full) {
                PoolEntry victim = pool.pop_min_pending();
                accept_evicted(std::move(victim));
                ++st.demoted;
                for (auto& d : pool.demote_discontinuous()) {
                    accept_evicted(std::move(d));
                    ++st.demoted;
                }
            }
            pool.restore_insert_pending(std::move(moving));
            ++st.to_pending;
            if (was_full) {
                // The demotions above may have consumed the moving entry's
                // own predecessors; the discontinuity sweep runs once more so
                // Pending stays gap-free (the entry then bounces back here
                // and is reconsidered as discontinuous).
                for (auto& d : pool.demote_discontinuous()) {
                    accept_evicted(std::move(d));
                    ++st.demoted;
                }
            }
            cursor = 0;  // re-read all extrema
        } else if (!continuous && gq < beta) {
            PoolEntry moving = store_take(cursor);
            if (pool.queue_full()) {
                PoolEntry victim = pool.pop_min_queue();
                accept_evicted(std::move(victim));
                ++st.demoted;
            }
            pool.restore_insert_queue(std::move(moving));
            ++st.to_queue;
            cursor = 0;
        } else {
            ++cursor;  // skip: consider the next-highest secondary fee
        }
    }
    return st;
}

bool SecondaryPool::check_map_exact(const TxPool& pool, std::string* why) const {
    std::unordered_map<std::uint64_t, std::vector<Hash32>> expect;
    auto collect = [&](const std::vector<PoolEntry>& v) {
        for (const auto& e : v)
            expect[derive_short_id(e.tx.tx_hash).key()].push_back(e.tx.tx_hash);
    };
    collect(pool.pending());
    collect(pool.queue());
    collect(store_);

    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (expect.size() != sid_map_.size()) return fail("bucket count differs");
    for (const auto& [key, hashes] : expect) {
        auto it = sid_map_.find(key);
        if (it == sid_map_.end()) return fail("bucket missing");
        if (it->second.size() != hashes.size()) return fail("bucket size differs");
        for (const auto& h : hashes) {
            bool found = false;
            for (const auto& t : it->second) found |= t.tx_hash == h;
            if (!found) {
                std::ostringstream os;
                os << "bucket lacks " << to_hex(h);
                return fail(os.str());
            }
        }
    }
    return true;
}

}  // namespace hcb
