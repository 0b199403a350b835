#include "hcb/txpool.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>

namespace hcb {

bool fee_less(const PoolEntry& a, const PoolEntry& b) {
    if (a.tx.effective_fee != b.tx.effective_fee) return a.tx.effective_fee < b.tx.effective_fee;
    if (a.t_r != b.t_r) return a.t_r < b.t_r;
    return a.tx.tx_hash < b.tx.tx_hash;
}

bool fee_greater(const PoolEntry& a, const PoolEntry& b) {
    if (a.tx.effective_fee != b.tx.effective_fee) return a.tx.effective_fee > b.tx.effective_fee;
    if (a.t_r != b.t_r) return a.t_r < b.t_r;
    return a.tx.tx_hash < b.tx.tx_hash;
}

Gwei next_base_fee(Gwei base_fee, std::uint64_t gas_used, std::uint64_t gas_target) {
    if (gas_target == 0) return base_fee;
    if (gas_used > gas_target) {
        Gwei delta = base_fee * (gas_used - gas_target) / gas_target / 8;
        return base_fee + std::max<Gwei>(delta, 1);
    }
    if (gas_used < gas_target) {
        Gwei delta = base_fee * (gas_target - gas_used) / gas_target / 8;
        Gwei floor = 1;
        return base_fee > delta + floor ? base_fee - delta : floor;
    }
    return base_fee;
}

struct TxPool::Placement {
    enum Kind { Pending, Queue, Stale, Unpayable, Conflict } kind;
};

TxPool::Placement TxPool::classify(const Transaction& tx) const {
    AccountState acct = account(tx.sender);
    if (tx.nonce < acct.next_nonce) return {Placement::Stale};
    if (acct.balance < tx.max_fee) return {Placement::Unpayable};
    Nonce run_end = pending_run_end(tx.sender);
    if (tx.nonce < run_end) return {Placement::Conflict};  // slot already pending
    if (tx.nonce == run_end) return {Placement::Pending};
    for (const auto& e : queue_)
        if (e.tx.sender == tx.sender && e.tx.nonce == tx.nonce) return {Placement::Conflict};
    return {Placement::Queue};
}

Nonce TxPool::pending_run_end(AccountId sender) const {
    // Contiguity invariant: the run is next_nonce .. next_nonce + count - 1.
    Nonce count = 0;
    for (const auto& e : pending_) count += e.tx.sender == sender;
    return account(sender).next_nonce + count;
}

bool TxPool::is_continuous(AccountId sender, Nonce nonce) const {
    return nonce == pending_run_end(sender);
}

void TxPool::insert_sorted(std::vector<PoolEntry>& pool, PoolEntry e) {
    auto it = std::upper_bound(pool.begin(), pool.end(), e, fee_less);
    pool.insert(it, std::move(e));
}

void TxPool::erase_at(std::vector<PoolEntry>& pool, std::size_t idx) {
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
}

void TxPool::notify_add(const Transaction& tx) {
    if (listener_) listener_->on_add(tx);
}

void TxPool::notify_remove(const Transaction& tx) {
    if (listener_) listener_->on_remove(tx);
}

AdmitOutcome TxPool::admit(const Transaction& tx, SimMs now) {
    AdmitOutcome out;
    if (known_.count(tx.tx_hash)) {
        out.result = AdmitResult::Duplicate;
        return out;
    }
    switch (classify(tx).kind) {
        case Placement::Stale:
        case Placement::Unpayable:
        case Placement::Conflict:
            out.result = AdmitResult::RejectedInvalid;
            return out;
        default:
            break;
    }

    PoolEntry entry{tx, now};
    bool placed_pending = false;
    // Eviction of a mid-run transaction can shrink the sender's own run, so
    // the target sub-pool is re-derived after making room.
    for (;;) {
        Placement p = classify(tx);
        if (p.kind == Placement::Conflict) {  // surfaced by a same-sender eviction
            out.result = AdmitResult::RejectedInvalid;
            return out;
        }
        std::vector<PoolEntry>& pool = p.kind == Placement::Pending ? pending_ : queue_;
        std::size_t cap = p.kind == Placement::Pending ? cfg_.pending_cap : cfg_.queue_cap;
        if (pool.size() < cap) {
            placed_pending = p.kind == Placement::Pending;
            insert_sorted(pool, std::move(entry));
            known_.insert(tx.tx_hash);
            notify_add(tx);
            break;
        }
        if (tx.effective_fee <= pool.front().tx.effective_fee) {
            out.result = AdmitResult::RejectedLowFee;
            return out;
        }
        PoolEntry victim = std::move(pool.front());
        erase_at(pool, 0);
        known_.erase(victim.tx.tx_hash);
        notify_remove(victim.tx);
        out.evicted.push_back(std::move(victim));
        if (p.kind == Placement::Pending)
            for (auto& d : demote_discontinuous()) out.evicted.push_back(std::move(d));
    }

    if (placed_pending)
        for (auto& e : promote_continuous()) out.evicted.push_back(std::move(e));

    out.to_pending = placed_pending;
    out.result = !out.evicted.empty() ? AdmitResult::EvictedOther
                 : placed_pending     ? AdmitResult::ToPending
                                      : AdmitResult::ToQueue;
    return out;
}

std::vector<PoolEntry> TxPool::promote_continuous() {
    std::vector<PoolEntry> evicted;
    std::unordered_set<Hash32, Hash32Hasher> barred;  // failed the fee gate at current state
    bool moved = true;
    while (moved) {
        moved = false;
        // Lowest (sender, nonce) first keeps promotion order deterministic.
        std::size_t best = queue_.size();
        for (std::size_t i = 0; i < queue_.size(); ++i) {
            const auto& e = queue_[i];
            if (barred.count(e.tx.tx_hash) || !is_continuous(e.tx.sender, e.tx.nonce)) continue;
            if (best == queue_.size() ||
                std::pair(e.tx.sender, e.tx.nonce) <
                    std::pair(queue_[best].tx.sender, queue_[best].tx.nonce))
                best = i;
        }
        if (best == queue_.size()) break;
        PoolEntry cand = queue_[best];
        if (pending_.size() >= cfg_.pending_cap) {
            const PoolEntry& victim_ref = pending_.front();
            // Evicting the candidate's own predecessor would undo the very
            // continuity being promoted; such a candidate stays queued.
            bool self_defeating = victim_ref.tx.sender == cand.tx.sender &&
                                  victim_ref.tx.nonce < cand.tx.nonce;
            if (self_defeating || cand.tx.effective_fee <= victim_ref.tx.effective_fee) {
                barred.insert(cand.tx.tx_hash);
                moved = true;  // keep scanning other candidates
                continue;
            }
            PoolEntry victim = std::move(pending_.front());
            erase_at(pending_, 0);
            known_.erase(victim.tx.tx_hash);
            notify_remove(victim.tx);
            evicted.push_back(std::move(victim));
            for (auto& d : demote_discontinuous()) evicted.push_back(std::move(d));
        }
        erase_at(queue_, best);
        insert_sorted(pending_, std::move(cand));  // stays in the pool: no notify
        barred.clear();                            // state changed; retry everything
        moved = true;
    }
    return evicted;
}

Block TxPool::assemble_block(std::size_t gas_budget, const BlockHeader& parent) const {
    Block blk;
    blk.header.height = parent.height + 1;
    blk.header.parent_hash = block_hash(parent);
    blk.header.base_fee = next_base_fee(parent.base_fee, parent.gas_used, gas_budget / 2);

    // Per-sender nonce-ascending lanes; each step takes the best lane head by
    // (fee desc, older first, hash).
    std::map<AccountId, std::vector<const PoolEntry*>> lanes;
    for (const auto& e : pending_) lanes[e.tx.sender].push_back(&e);
    for (auto& [sender, lane] : lanes)
        std::sort(lane.begin(), lane.end(),
                  [](const PoolEntry* a, const PoolEntry* b) { return a->tx.nonce < b->tx.nonce; });
    std::map<AccountId, std::size_t> cursor;

    while (blk.body.size() < gas_budget) {
        const PoolEntry* best = nullptr;
        for (const auto& [sender, lane] : lanes) {
            std::size_t c = cursor[sender];
            if (c >= lane.size()) continue;
            if (!best || fee_greater(*lane[c], *best)) best = lane[c];
        }
        if (!best) break;
        blk.body.push_back(best->tx);
        ++cursor[best->tx.sender];
    }

    blk.header.gas_used = blk.body.size();
    blk.header.body_hash = compute_body_hash(blk.body);
    return blk;
}

RemoveReport TxPool::remove_confirmed(const Block& block) {
    RemoveReport rep;
    for (const auto& tx : block.body) {
        AccountState& acct = accounts_[tx.sender];
        acct.next_nonce = std::max(acct.next_nonce, tx.nonce + 1);
        Gwei fee = std::min(tx.max_fee, block.header.base_fee + tx.max_priority_fee);
        acct.balance -= std::min(acct.balance, fee);
    }
    for (auto* pool : {&pending_, &queue_}) {
        for (std::size_t i = pool->size(); i-- > 0;) {
            const auto& e = (*pool)[i];
            if (e.tx.nonce < account(e.tx.sender).next_nonce) {
                notify_remove(e.tx);
                known_.erase(e.tx.tx_hash);
                erase_at(*pool, i);
                ++rep.removed;
            }
        }
    }
    // A block from elsewhere may consume nonces we never pooled; anything the
    // removal orphaned is demoted rather than left discontinuous.
    for (auto& d : demote_discontinuous()) rep.evicted.push_back(std::move(d));
    for (auto& e : promote_continuous()) rep.evicted.push_back(std::move(e));
    return rep;
}

SweepReport TxPool::sweep_invalid() {
    SweepReport rep;
    for (auto* pool : {&pending_, &queue_}) {
        for (std::size_t i = pool->size(); i-- > 0;) {
            const auto& e = (*pool)[i];
            AccountState acct = account(e.tx.sender);
            if (e.tx.nonce < acct.next_nonce || acct.balance < e.tx.max_fee) {
                notify_remove(e.tx);
                known_.erase(e.tx.tx_hash);
                erase_at(*pool, i);
                ++rep.removed;
            }
        }
    }
    rep.demoted = demote_discontinuous();
    return rep;
}

std::size_t TxPool::refresh_fees(Gwei base_fee) {
    std::size_t changed = 0;
    for (auto* pool : {&pending_, &queue_}) {
        for (auto& e : *pool) {
            Gwei nf = std::min(e.tx.max_fee, base_fee + e.tx.max_priority_fee);
            changed += nf != e.tx.effective_fee;
            e.tx.effective_fee = nf;
        }
        std::sort(pool->begin(), pool->end(), fee_less);
    }
    return changed;
}

const PoolEntry* TxPool::peek_min_pending() const {
    return pending_.empty() ? nullptr : &pending_.front();
}

const PoolEntry* TxPool::peek_min_queue() const {
    return queue_.empty() ? nullptr : &queue_.front();
}

PoolEntry TxPool::pop_min_pending() {
    assert(!pending_.empty());
    PoolEntry e = std::move(pending_.front());
    erase_at(pending_, 0);
    known_.erase(e.tx.tx_hash);
    notify_remove(e.tx);
    return e;
}

PoolEntry TxPool::pop_min_queue() {
    assert(!queue_.empty());
    PoolEntry e = std::move(queue_.front());
    erase_at(queue_, 0);
    known_.erase(e.tx.tx_hash);
    notify_remove(e.tx);
    return e;
}

std::vector<PoolEntry> TxPool::demote_discontinuous() {
    // Per sender, keep the contiguous prefix from the account's next nonce;
    // everything after a gap comes out.
    std::map<AccountId, std::vector<std::size_t>> by_sender;
    for (std::size_t i = 0; i < pending_.size(); ++i)
        by_sender[pending_[i].tx.sender].push_back(i);
    std::vector<std::size_t> drop;
    for (auto& [sender, idxs] : by_sender) {
        std::sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
            return pending_[a].tx.nonce < pending_[b].tx.nonce;
        });
        Nonce expect = account(sender).next_nonce;
        for (std::size_t idx : idxs) {
            if (pending_[idx].tx.nonce == expect)
                ++expect;
            else
                drop.push_back(idx);
        }
    }
    std::sort(drop.begin(), drop.end());
    std::vector<PoolEntry> out;
    for (std::size_t k = drop.size(); k-- > 0;) {
        std::size_t idx = drop[k];
        notify_remove(pending_[idx].tx);
        known_.erase(pending_[idx].tx.tx_hash);
        out.push_back(std::move(pending_[idx]));
        erase_at(pending_, idx);
    }
    std::reverse(out.begin(), out.end());  // ascending original order
    return out;
}

void TxPool::restore_insert_pending(PoolEntry e) {
    assert(pending_.size() < cfg_.pending_cap);
    known_.insert(e.tx.tx_hash);
    notify_add(e.tx);
    insert_sorted(pending_, std::move(e));
}

void TxPool::restore_insert_queue(PoolEntry e) {
    assert(queue_.size() < cfg_.queue_cap);
    known_.insert(e.tx.tx_hash);
    notify_add(e.tx);
    insert_sorted(queue_, std::move(e));
}

AccountState TxPool::account(AccountId sender) const {
    auto it = accounts_.find(sender);
    return it == accounts_.end() ? AccountState{} : it->second;
}

void TxPool::set_balance(AccountId sender, Gwei balance) {
    accounts_[sender].balance = balance;
}

bool TxPool::check_invariants(std::string* why) const {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (pending_.size() > cfg_.pending_cap) return fail("pending over cap");
    if (queue_.size() > cfg_.queue_cap) return fail("queue over cap");
    std::unordered_set<Hash32, Hash32Hasher> seen;
    std::map<AccountId, std::vector<Nonce>> runs;
    for (const auto* pool : {&pending_, &queue_}) {
        if (!std::is_sorted(pool->begin(), pool->end(), fee_less)) return fail("pool unsorted");
        for (const auto& e : *pool) {
            if (!seen.insert(e.tx.tx_hash).second) return fail("duplicate hash");
            if (!known_.count(e.tx.tx_hash)) return fail("known set missing entry");
            if (e.tx.nonce < account(e.tx.sender).next_nonce) return fail("stale nonce pooled");
            if (pool == &pending_) runs[e.tx.sender].push_back(e.tx.nonce);
        }
    }
    if (seen.size() != known_.size()) return fail("known set has stragglers");
    for (auto& [sender, nonces] : runs) {
        std::sort(nonces.begin(), nonces.end());
        Nonce expect = account(sender).next_nonce;
        for (Nonce n : nonces) {
            if (n != expect) {
                std::ostringstream os;
                os << "sender " << sender << " gap: nonce " << n << " expected " << expect;
                return fail(os.str());
            }
            ++expect;
        }
    }
    return true;
}

}  // namespace hcb
