#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcb/txpool.hpp"

namespace hcb {

/// Fee environment for a block-wise update: the base fee the *next* block
/// will charge (already evolved from the adopted header), so refreshed pool
/// fees line up with what assembly at this height would pay.
struct FeeContext {
    Gwei base_fee = 1;
    double elasticity = 0.125;  // per-block base fee adjustment quotient
};

struct UpdateReport {
    std::size_t invalidated = 0;       // confirmed / stale-nonce / unpayable, both pools
    std::size_t refeed = 0;            // effective fees that changed
    std::size_t restored_pending = 0;  // secondary → pending moves
    std::size_t restored_queue = 0;    // secondary → queue moves
};

struct RestoreStats {
    std::size_t to_pending = 0;
    std::size_t to_queue = 0;
    std::size_t demoted = 0;     // pool → secondary demotions made while restoring
    std::size_t iterations = 0;
};

// Holds transactions the primary pool gave up on (fee evictions, demotions),
// keeps the short-id map over Tx-Pool ∪ Secondary Pool exact, and moves
// entries back when a block-wise fee refresh makes them competitive again.
class SecondaryPool final : public PoolListener {
public:
    static constexpr std::size_t kDefaultCap = 200'000;

    enum class AcceptResult { Stored, DroppedLowestFee, DroppedSelf };
    struct Accept {
        AcceptResult result = AcceptResult::Stored;
        std::optional<PoolEntry> dropped;  // displaced lowest-fee entry, if any
    };

    explicit SecondaryPool(std::size_t cap = kDefaultCap) : cap_(cap) {}

    /// Fee-ordered insert; when full, whichever of {entry, current minimum}
    /// has the strictly lower fee is discarded (ties keep the incumbent).
    Accept accept_evicted(PoolEntry e);

    /// Re-targets the cap to the unconfirmed-transaction estimate, trimming
    /// lowest-fee entries if the pool now overflows. Returns the new cap.
    std::size_t set_dynamic_cap(std::size_t unconfirmed_estimate);

    /// All transactions across Tx-Pool and Secondary Pool whose short id
    /// matches; empty means missing.
    std::vector<Transaction> lookup(const ShortId& sid) const;

    /// Block-wise update: drop confirmed and invalid entries from both pools,
    /// refresh every effective fee against fee_ctx, then run the restore
    /// algorithm.
    UpdateReport block_update(TxPool& pool, const Block& block, const FeeContext& fee_ctx);

    /// Transaction restore over G_p/G_q (pool, fee-ascending) and G_s (this
    /// store, fee-descending): while min(γ_p, γ_q) < β, the top secondary
    /// transaction moves into Pending (nonce-continuous, γ_p < β; demoting
    /// the Pending minimum and newly gapped followers when full) or into
    /// Queue (discontinuous, γ_q < β; demoting the Queue minimum when full),
    /// otherwise the next-highest secondary transaction is considered.
    /// Extrema are re-read after every move.
    RestoreStats restore(TxPool& pool);

    // PoolListener: keeps the short-id map covering the primary pool.
    void on_add(const Transaction& tx) override;
    void on_remove(const Transaction& tx) override;

    const std::vector<PoolEntry>& store() const { return store_; }  // fee-descending
    std::size_t cap() const { return cap_; }
    std::size_t size() const { return store_.size(); }
    bool in_store(const Hash32& tx_hash) const;

    /// Verifies the incrementally maintained short-id map against a rebuild
    /// from the two pools' current contents.
    bool check_map_exact(const TxPool& pool, std::string* why = nullptr) const;

private:
    void store_insert(PoolEntry e);
    PoolEntry store_take(std::size_t idx);
    std::size_t min_fee_index() const;  // drop victim: oldest among lowest fee
    void map_add(const Transaction& tx);
    void map_remove(const Transaction& tx);

    std::size_t cap_;
    std::vector<PoolEntry> store_;  // sorted by fee_greater
    std::unordered_map<std::uint64_t, std::vector<Transaction>> sid_map_;  // ShortId::key()
};

}  // namespace hcb
