#pragma once

// Line-by-line interpreter for the transaction restore algorithm, kept
// deliberately naive (flat vectors, full re-sorts, explicit predecessor
// scans) so it can arbitrate the production implementation, plus a generator
// for random coherent pool triples.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "hcb/secondary_pool.hpp"
#include "hcb/txpool.hpp"

namespace restore_oracle {

struct Tx {
    hcb::Hash32 hash{};
    hcb::AccountId sender = 0;
    hcb::Nonce nonce = 0;
    hcb::Gwei fee = 0;
    hcb::SimMs t_r = 0;
};

struct State {
    std::vector<Tx> pending, queue, secondary;  // unordered
    std::map<hcb::AccountId, hcb::Nonce> next_nonce;
    std::size_t pending_cap = 0, queue_cap = 0;
    std::size_t moved_pending = 0, moved_queue = 0;
};

inline bool asc(const Tx& a, const Tx& b) {
    if (a.fee != b.fee) return a.fee < b.fee;
    if (a.t_r != b.t_r) return a.t_r < b.t_r;
    return a.hash < b.hash;
}

inline bool desc(const Tx& a, const Tx& b) {
    if (a.fee != b.fee) return a.fee > b.fee;
    if (a.t_r != b.t_r) return a.t_r < b.t_r;
    return a.hash < b.hash;
}

/// Extends the pending run: every nonce from the account's next nonce up to
/// tx.nonce - 1 is pending, and tx.nonce itself is not.
inline bool continuous(const State& s, const Tx& tx) {
    auto it = s.next_nonce.find(tx.sender);
    hcb::Nonce next = it == s.next_nonce.end() ? 0 : it->second;
    if (tx.nonce < next) return false;
    for (hcb::Nonce n = next; n < tx.nonce; ++n) {
        bool found = false;
        for (const auto& p : s.pending) found |= p.sender == tx.sender && p.nonce == n;
        if (!found) return false;
    }
    for (const auto& p : s.pending)
        if (p.sender == tx.sender && p.nonce == tx.nonce) return false;
    return true;
}

inline void take_min(std::vector<Tx>& from, std::vector<Tx>& to) {
    auto it = std::min_element(from.begin(), from.end(), asc);
    to.push_back(*it);
    from.erase(it);
}

/// Algorithm 1 as written: γ = min(γ_p, γ_q) with 0 standing in for an empty
/// pool, strict γ < β, demote-then-insert on full pools, extrema re-read
/// after every move, and a skip that walks down the fee-descending secondary.
inline void run(State& s) {
    std::size_t cursor = 0;
    for (;;) {
        std::vector<Tx> gs = s.secondary;
        std::sort(gs.begin(), gs.end(), desc);
        if (cursor >= gs.size()) break;
        hcb::Gwei gp = 0, gq = 0;
        if (!s.pending.empty()) gp = std::min_element(s.pending.begin(), s.pending.end(), asc)->fee;
        if (!s.queue.empty()) gq = std::min_element(s.queue.begin(), s.queue.end(), asc)->fee;
        const Tx cand = gs[cursor];
        if (std::min(gp, gq) >= cand.fee) break;

        auto erase_cand = [&] {
            s.secondary.erase(std::find_if(s.secondary.begin(), s.secondary.end(),
                                           [&](const Tx& t) { return t.hash == cand.hash; }));
        };
        // sweep out anything whose predecessors are now incomplete
        auto sweep_gapped = [&] {
            for (bool again = true; again;) {
                again = false;
                for (const auto& p : s.pending) {
                    auto it = s.next_nonce.find(p.sender);
                    hcb::Nonce next = it == s.next_nonce.end() ? 0 : it->second;
                    bool ok = true;
                    for (hcb::Nonce n = next; n < p.nonce; ++n) {
                        bool found = false;
                        for (const auto& q : s.pending)
                            found |= q.sender == p.sender && q.nonce == n;
                        ok &= found;
                    }
                    if (!ok) {
                        s.secondary.push_back(p);
                        s.pending.erase(std::find_if(
                            s.pending.begin(), s.pending.end(),
                            [&](const Tx& t) { return t.hash == p.hash; }));
                        again = true;
                        break;
                    }
                }
            }
        };
        if (continuous(s, cand) && gp < cand.fee) {
            erase_cand();
            const bool full = s.pending.size() >= s.pending_cap;
            if (full) {
                take_min(s.pending, s.secondary);
                sweep_gapped();
            }
            s.pending.push_back(cand);
            ++s.moved_pending;
            // The demotions may have taken the candidate's own predecessors;
            // one more sweep keeps Pending gap-free (the candidate then lands
            // back in the secondary and gets reconsidered as discontinuous).
            if (full) sweep_gapped();
            cursor = 0;
        } else if (!continuous(s, cand) && gq < cand.fee) {
            erase_cand();
            if (s.queue.size() >= s.queue_cap) take_min(s.queue, s.secondary);
            s.queue.push_back(cand);
            ++s.moved_queue;
            cursor = 0;
        } else {
            ++cursor;
        }
    }
}

/// Post-restore check: no secondary transaction could still move under the
/// loop's own guards.
inline bool no_profitable_move(const State& s) {
    hcb::Gwei gp = 0, gq = 0;
    if (!s.pending.empty()) gp = std::min_element(s.pending.begin(), s.pending.end(), asc)->fee;
    if (!s.queue.empty()) gq = std::min_element(s.queue.begin(), s.queue.end(), asc)->fee;
    for (const auto& t : s.secondary) {
        if (continuous(s, t) && gp < t.fee) return false;
        if (!continuous(s, t) && gq < t.fee) return false;
    }
    return true;
}

// ---- random coherent triples ----

struct Setup {
    State oracle;
    hcb::TxPool::Config cfg;
    std::map<hcb::AccountId, hcb::Nonce> next_nonce;
    std::vector<std::pair<hcb::Transaction, hcb::SimMs>> pending, queue, secondary;
};

/// Builds a triple with ≤ 12 transactions total: contiguous pending runs,
/// gapped queue entries, secondary nonces scattered around the run ends so
/// both restore branches and the skip path all fire.
inline Setup random_setup(std::mt19937_64& rng) {
    Setup su;
    auto fee_of = [&] { return 1 + rng() % 25; };
    auto t_of = [&] { return static_cast<hcb::SimMs>(rng() % 6); };

    std::set<std::pair<hcb::AccountId, hcb::Nonce>> used;
    std::size_t budget = 12;
    std::map<hcb::AccountId, hcb::Nonce> run_end;

    for (hcb::AccountId s = 1; s <= 3; ++s) {
        hcb::Nonce next = rng() % 3;
        su.next_nonce[s] = next;
        su.oracle.next_nonce[s] = next;
        run_end[s] = next;
        std::size_t run = rng() % 4;
        for (std::size_t i = 0; i < run && budget > 0; ++i, --budget) {
            hcb::Nonce n = run_end[s]++;
            hcb::Transaction tx = hcb::make_transaction(s, n, fee_of(), 0, {}, 0);
            tx.effective_fee = tx.max_fee;
            su.pending.push_back({tx, t_of()});
            used.insert({s, n});
        }
    }
    for (hcb::AccountId s = 1; s <= 3 && budget > 0; ++s) {
        std::size_t k = rng() % 3;
        for (std::size_t i = 0; i < k && budget > 0; --budget, ++i) {
            hcb::Nonce n = run_end[s] + 2 + rng() % 4;
            if (used.count({s, n})) continue;
            hcb::Transaction tx = hcb::make_transaction(s, n, fee_of(), 0, {}, 0);
            tx.effective_fee = tx.max_fee;
            su.queue.push_back({tx, t_of()});
            used.insert({s, n});
        }
    }
    while (budget > 0) {
        if (rng() % 5 == 0) break;
        hcb::AccountId s = 1 + rng() % 3;
        hcb::Nonce n = su.next_nonce[s] + rng() % 7;
        if (used.count({s, n})) {
            --budget;
            continue;
        }
        hcb::Transaction tx = hcb::make_transaction(s, n, fee_of(), 0, {}, 0);
        tx.effective_fee = tx.max_fee;
        su.secondary.push_back({tx, t_of()});
        used.insert({s, n});
        --budget;
    }

    su.cfg.pending_cap = su.pending.size() + rng() % 3;  // sometimes exactly full
    su.cfg.queue_cap = su.queue.size() + rng() % 2;
    if (su.cfg.pending_cap == 0) su.cfg.pending_cap = 1;
    if (su.cfg.queue_cap == 0) su.cfg.queue_cap = 1;
    su.oracle.pending_cap = su.cfg.pending_cap;
    su.oracle.queue_cap = su.cfg.queue_cap;

    for (const auto& [tx, t] : su.pending)
        su.oracle.pending.push_back({tx.tx_hash, tx.sender, tx.nonce, tx.effective_fee, t});
    for (const auto& [tx, t] : su.queue)
        su.oracle.queue.push_back({tx.tx_hash, tx.sender, tx.nonce, tx.effective_fee, t});
    for (const auto& [tx, t] : su.secondary)
        su.oracle.secondary.push_back({tx.tx_hash, tx.sender, tx.nonce, tx.effective_fee, t});
    return su;
}

/// Materializes the setup into live pool objects (sp must be the pool's
/// listener and have a cap large enough to never drop).
inline void build(const Setup& su, hcb::TxPool& pool, hcb::SecondaryPool& sp) {
    for (const auto& [sender, next] : su.next_nonce)
        pool.set_account(sender, {next, hcb::AccountState::kDefaultBalance});
    // queue first so pending admissions cannot promote anything
    for (const auto& [tx, t] : su.queue) {
        auto out = pool.admit(tx, t);
        (void)out;
    }
    std::vector<std::pair<hcb::Transaction, hcb::SimMs>> pend = su.pending;
    std::sort(pend.begin(), pend.end(),
              [](const auto& a, const auto& b) {  // per-sender nonce order
                  return std::pair(a.first.sender, a.first.nonce) <
                         std::pair(b.first.sender, b.first.nonce);
              });
    for (const auto& [tx, t] : pend) pool.admit(tx, t);
    for (const auto& [tx, t] : su.secondary) sp.accept_evicted({tx, t});
}

inline std::set<hcb::Hash32> hash_set(const std::vector<Tx>& v) {
    std::set<hcb::Hash32> out;
    for (const auto& t : v) out.insert(t.hash);
    return out;
}

inline std::set<hcb::Hash32> hash_set(const std::vector<hcb::PoolEntry>& v) {
    std::set<hcb::Hash32> out;
    for (const auto& e : v) out.insert(e.tx.tx_hash);
    return out;
}

}  // namespace restore_oracle
