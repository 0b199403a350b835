#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hcb/tx.hpp"

namespace hcb {

// Accounts are modeled just far enough to produce the two invalidation causes
// a pool cares about: stale nonces and insufficient balance. A confirmed tx
// advances next_nonce and debits effective_fee once.
struct AccountState {
    Nonce next_nonce = 0;
    Gwei balance = kDefaultBalance;

    static constexpr Gwei kDefaultBalance = 1'000'000'000'000'000ull;
};

/// A transaction as held by a pool, together with its local receive time
/// (used for tie-breaking and age-based bookkeeping; never serialized).
struct PoolEntry {
    Transaction tx;
    SimMs t_r = 0;
};

/// Ascending pool order: fee, then receive time (older first), then hash.
/// The front of a pool sorted this way is the eviction victim.
bool fee_less(const PoolEntry& a, const PoolEntry& b);

/// Descending order used by the secondary store: highest fee first, ties by
/// older receive time, then hash.
bool fee_greater(const PoolEntry& a, const PoolEntry& b);

/// EIP-1559 base fee for the child of a block with the given usage, with the
/// canonical 1/8 adjustment quotient and a 1 gWei floor.
Gwei next_base_fee(Gwei base_fee, std::uint64_t gas_used, std::uint64_t gas_target);

enum class AdmitResult {
    ToPending,
    ToQueue,
    EvictedOther,   // placed, displacing lower-fee residents (see evicted)
    RejectedLowFee,
    RejectedInvalid,
    Duplicate,
};

struct AdmitOutcome {
    AdmitResult result = AdmitResult::RejectedInvalid;
    bool to_pending = false;              // placement when result == EvictedOther
    std::vector<PoolEntry> evicted;       // displaced residents, for secondary hand-off
};

struct RemoveReport {
    std::size_t removed = 0;              // confirmed transactions dropped
    std::vector<PoolEntry> evicted;       // displaced by promotions, for secondary hand-off
};

struct SweepReport {
    std::size_t removed = 0;              // invalid (stale nonce / balance) dropped
    std::vector<PoolEntry> demoted;       // followers orphaned by a removal
};

/// Observer for membership changes, used to keep the short-id map covering
/// Tx-Pool and Secondary Pool exact without rebuild scans.
struct PoolListener {
    virtual ~PoolListener() = default;
    virtual void on_add(const Transaction& tx) = 0;
    virtual void on_remove(const Transaction& tx) = 0;
};

// The primary transaction pool. Pending holds per-sender contiguous nonce
// runs starting at the account's next nonce and feeds block assembly; Queue
// holds transactions whose nonce leaves a gap. Both are fee-ordered with
// lowest-fee eviction when full.
class TxPool {
public:
    struct Config {
        std::size_t pending_cap = 5120;
        std::size_t queue_cap = 1024;
    };

    TxPool() : TxPool(Config{}) {}
    explicit TxPool(Config cfg, PoolListener* listener = nullptr)
        : cfg_(cfg), listener_(listener) {}

    /// Validity, placement by nonce continuity, lowest-fee eviction when the
    /// target sub-pool is full (strictly lower fee only), then queue→pending
    /// promotion of any transactions the admission made continuous.
    AdmitOutcome admit(const Transaction& tx, SimMs now);

    /// Picks up to gas_budget transactions from Pending, highest effective
    /// fee first under per-sender nonce order, and derives the child header
    /// (height, parent linkage, EIP-1559 base fee, body hash). timestamp_ms
    /// is left 0 for the caller.
    Block assemble_block(std::size_t gas_budget, const BlockHeader& parent) const;

    /// Advances account state for every confirmed transaction, drops pooled
    /// transactions whose nonce the block consumed, then promotes newly
    /// continuous queue transactions.
    RemoveReport remove_confirmed(const Block& block);

    /// Drops transactions no longer payable (balance < max_fee) or with stale
    /// nonces; pending followers orphaned by a drop are demoted and returned.
    SweepReport sweep_invalid();

    /// Recomputes every effective fee against the given base fee and restores
    /// fee order. Returns how many fees changed.
    std::size_t refresh_fees(Gwei base_fee);

    // --- restore-algorithm surface (used by SecondaryPool::restore) ---
    const PoolEntry* peek_min_pending() const;
    const PoolEntry* peek_min_queue() const;
    bool pending_full() const { return pending_.size() >= cfg_.pending_cap; }
    bool queue_full() const { return queue_.size() >= cfg_.queue_cap; }
    /// True when the nonce would extend the sender's pending run (or start it
    /// at the account's next nonce).
    bool is_continuous(AccountId sender, Nonce nonce) const;
    PoolEntry pop_min_pending();
    PoolEntry pop_min_queue();
    /// Removes every pending transaction whose nonce no longer chains from
    /// the account's next nonce (after a mid-run removal).
    std::vector<PoolEntry> demote_discontinuous();
    /// Direct inserts for restore; capacity must already be available.
    void restore_insert_pending(PoolEntry e);
    void restore_insert_queue(PoolEntry e);

    // --- views ---
    const std::vector<PoolEntry>& pending() const { return pending_; }  // fee-ascending
    const std::vector<PoolEntry>& queue() const { return queue_; }      // fee-ascending
    const Config& config() const { return cfg_; }
    bool contains(const Hash32& tx_hash) const { return known_.count(tx_hash) != 0; }
    std::size_t size() const { return pending_.size() + queue_.size(); }

    AccountState account(AccountId sender) const;
    void set_balance(AccountId sender, Gwei balance);
    void set_account(AccountId sender, AccountState state) { accounts_[sender] = state; }

    /// Full invariant scan (nonce contiguity, caps, sorted order, no
    /// duplicate hashes); returns false and fills `why` on violation.
    bool check_invariants(std::string* why = nullptr) const;

private:
    struct Placement;
    Placement classify(const Transaction& tx) const;
    void insert_sorted(std::vector<PoolEntry>& pool, PoolEntry e);
    void erase_at(std::vector<PoolEntry>& pool, std::size_t idx);
    Nonce pending_run_end(AccountId sender) const;  // next nonce after the run
    std::vector<PoolEntry> promote_continuous();
    void notify_add(const Transaction& tx);
    void notify_remove(const Transaction& tx);

    Config cfg_;
    PoolListener* listener_ = nullptr;
    std::vector<PoolEntry> pending_;  // sorted by fee_less
    std::vector<PoolEntry> queue_;    // sorted by fee_less
    std::unordered_map<AccountId, AccountState> accounts_;
    std::unordered_set<Hash32, Hash32Hasher> known_;
};

}  // namespace hcb
