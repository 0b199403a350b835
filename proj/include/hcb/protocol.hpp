#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "hcb/codec.hpp"
#include "hcb/events.hpp"
#include "hcb/prediction.hpp"
#include "hcb/secondary_pool.hpp"
#include "hcb/txpool.hpp"

namespace hcb {

enum class ProtocolKind : std::uint8_t { BHP, BCB, SCB, PCB, HCB };

constexpr bool uses_compact(ProtocolKind k) { return k != ProtocolKind::BHP; }
constexpr bool uses_secondary(ProtocolKind k) {
    return k == ProtocolKind::SCB || k == ProtocolKind::HCB;
}
constexpr bool uses_prediction(ProtocolKind k) {
    return k == ProtocolKind::PCB || k == ProtocolKind::HCB;
}
const char* to_string(ProtocolKind k);
std::optional<ProtocolKind> protocol_from_string(std::string_view s);

// --- wire messages ---

struct SendHcbHello {};  // capability notice: sender accepts short-id blocks
struct FullBlockMsg {
    Block block;
};
struct HcbBlockMsg {
    HcbBlock block;
};
struct CompactBlockMsg {
    CompactBlock block;
};
struct BlockHashAnnounce {
    std::uint64_t height = 0;
    Hash32 hash{};
};
struct GetHeader {
    Hash32 hash{};
};
struct HeaderMsg {
    BlockHeader header;
};
struct GetBody {
    Hash32 hash{};
};
struct BodyMsg {
    Hash32 hash{};
    std::vector<Transaction> body;
};
struct GetMissingTxs {
    Hash32 block{};
    std::vector<ShortId> sids;  // duplicate-free
};
struct MissingTxs {
    Hash32 block{};
    std::vector<Transaction> txs;  // in request order
};
struct NewTxMsg {
    Transaction tx;
};

using Message = std::variant<SendHcbHello, FullBlockMsg, HcbBlockMsg, CompactBlockMsg,
                             BlockHashAnnounce, GetHeader, HeaderMsg, GetBody, BodyMsg,
                             GetMissingTxs, MissingTxs, NewTxMsg>;

const char* message_kind(const Message& m);
Bytes encode_message(const Message& m);
Message decode_message(std::span<const std::uint8_t> data);  // throws std::runtime_error
std::size_t encoded_size(const Message& m);

struct Outgoing {
    NodeId to = 0;
    Message msg;
};

// --- reconstruction ---

enum class IdClass : std::uint8_t { Full, Missing, Unique, Collided };

/// Identification snapshot for one received short-id block. Candidate lists
/// are copies taken at receipt time, so later pool churn cannot change the
/// outcome.
struct ReconstructionState {
    BlockHeader header;
    std::vector<HcbEntry> entries;
    std::vector<IdClass> id_class;                     // per entry
    std::vector<std::vector<Transaction>> candidates;  // per entry
    NodeId from = 0;
    bool was_compact = false;
    SimMs t_first = 0;

    std::vector<ShortId> u_m() const;  // sorted, duplicate-free
    std::vector<ShortId> u_p() const;
    std::vector<ShortId> u_c() const;
    std::size_t short_entries() const;
};

struct Reconstructed {
    Block block;
};
struct NeedTxs {
    std::vector<ShortId> sids;  // U_c ∪ U_m, sorted, duplicate-free
};
struct Corrupt {
    std::string reason;
};
using ResolveResult = std::variant<Reconstructed, NeedTxs, Corrupt>;

/// Most candidate combinations resolve() will try against the body hash
/// before falling back to a missing-tx request.
inline constexpr std::uint64_t kMaxCombinations = 1024;

/// Pure resolution over an identification snapshot: request when anything is
/// missing, otherwise assemble (searching collision combinations capped at
/// kMaxCombinations) and verify the body hash.
ResolveResult resolve(const ReconstructionState& st);

/// true = predicted missing at the receiver (send the full transaction).
using Predictor = std::function<bool(const FeatureVector&)>;
Predictor constant_present_predictor();
Predictor model_predictor(std::shared_ptr<const BayesModel> model);

/// Simulator-side observer for node outcomes that are not wire messages.
class NodeListener {
  public:
    virtual ~NodeListener() = default;
    virtual void on_event(const LogEvent&) {}
    /// Features the forwarding node computed per body entry, in body order.
    virtual void on_block_features(NodeId /*sender*/, const Hash32& /*block_hash*/,
                                   const std::vector<FeatureVector>& /*feats*/) {}
    /// Receiver-side ground truth per body entry: was the tx locally held.
    virtual void on_block_labels(NodeId /*node*/, NodeId /*sender*/, const Hash32& /*block_hash*/,
                                 const std::vector<bool>& /*present*/) {}
};

Block make_genesis(Gwei base_fee);

/// One protocol participant: pools, canonical-chain suffix, reconstruction
/// in-flight state, and the forwarding rules for its protocol kind.
class Node {
  public:
    struct Config {
        NodeId id = 0;
        ProtocolKind kind = ProtocolKind::HCB;
        bool hcb_capable = true;  // accepts short-id blocks (always true for non-BHP kinds)
        bool miner = false;
        bool selfish = false;
        TxPool::Config pool{};
        std::size_t secondary_cap = SecondaryPool::kDefaultCap;  // forced 0 unless kind uses it
        std::uint64_t block_tx_cap = 200;                        // M; gas target is M/2
        std::uint64_t rng_seed = 0;                              // neighbor-selection stream
    };

    Node(const Config& cfg, std::vector<NodeId> neighbors, Predictor predictor,
         NodeListener* listener, const Block& genesis);

    /// Capability hellos for connection setup (empty for non-capable nodes).
    std::vector<Outgoing> connect();

    std::vector<Outgoing> deliver(NodeId from, const Message& msg, SimMs now);

    /// Local workload injection; selfish submissions are held (not gossiped).
    std::vector<Outgoing> submit_tx(const Transaction& tx, SimMs now, bool selfish);

    /// Assemble a child of `parent` from Pending (or an empty block when the
    /// propagation + assembly window has not elapsed). Withheld transactions
    /// are packed at the front.
    Block mine(const BlockHeader& parent, bool force_empty, SimMs now);

    /// Block-bearing sends to ceil(sqrt(neighbors)) random peers, hash
    /// announcements to the rest. No-op if this block was already forwarded.
    std::vector<Outgoing> forward_block(const Block& block, SimMs now);

    /// Validate + adopt (or buffer up to 2 heights ahead), run pool
    /// maintenance, forward, and drain the buffer. Used for locally mined
    /// blocks and internally on completed receptions.
    std::vector<Outgoing> accept_block(const Block& block, SimMs now);

    /// Identification of received entries against the local short-id map.
    ReconstructionState identify(const BlockHeader& header, std::vector<HcbEntry> entries,
                                 NodeId from, bool was_compact, SimMs now) const;

    const Config& config() const { return cfg_; }
    const std::vector<Block>& chain() const { return chain_; }
    const Block& tip() const { return chain_.back(); }
    std::uint64_t height() const { return tip().header.height; }
    std::optional<SimMs> adopted_at(const Hash32& block_hash) const;
    std::optional<SimMs> first_seen(const Hash32& tx_hash) const;
    TxPool& pool() { return pool_; }
    const TxPool& pool() const { return pool_; }
    SecondaryPool& secondary() { return secondary_; }
    const SecondaryPool& secondary() const { return secondary_; }
    Gwei current_base_fee() const { return fees_.base_fee; }

  private:
    struct BlockFlight {
        SimMs t_first = 0;
        NodeId from = 0;
        std::int64_t height = -1;
        std::optional<BlockHeader> header;
        std::optional<ReconstructionState> recon;
        bool header_requested = false;
        bool body_requested = false;
        bool missing_requested = false;
        std::uint64_t request_bytes = 0;
        bool done = false;
    };

    BlockFlight& touch_flight(const Hash32& block_hash, NodeId from, SimMs now);
    const Block* find_block(const Hash32& block_hash) const;  // adopted or buffered
    std::vector<Outgoing> on_block_entries(NodeId from, const BlockHeader& header,
                                           std::vector<HcbEntry> entries, bool was_compact,
                                           SimMs now);
    std::vector<Outgoing> complete_block(BlockFlight& fl, const Block& block, SimMs now,
                                         bool via_full);
    std::vector<Outgoing> adopt_or_buffer(const Block& block, SimMs now);
    void adopt(const Block& block, SimMs now);
    void record_tx(const Transaction& tx, SimMs now);
    Message block_message_for(NodeId peer, const Block& block,
                              const std::vector<bool>& miss_flags) const;
    void error(SimMs now, std::string what);

    Config cfg_;
    std::vector<NodeId> neighbors_;  // sorted
    Predictor predict_;
    NodeListener* listener_;
    std::mt19937_64 rng_;

    TxPool pool_;
    SecondaryPool secondary_;
    FeeContext fees_;

    std::vector<Block> chain_;
    std::unordered_map<Hash32, std::size_t, Hash32Hasher> height_by_hash_;
    std::unordered_map<Hash32, SimMs, Hash32Hasher> adopted_at_;
    std::unordered_map<Hash32, SimMs, Hash32Hasher> first_seen_;  // gossip arrivals only
    std::unordered_set<Hash32, Hash32Hasher> withheld_;           // selfish submissions
    std::unordered_set<Hash32, Hash32Hasher> forwarded_;
    std::unordered_set<NodeId> capable_peers_;
    std::unordered_map<Hash32, BlockFlight, Hash32Hasher> flights_;
    std::unordered_map<std::uint64_t, Block> buffered_;  // by height, ≤ tip+2
};

}  // namespace hcb
