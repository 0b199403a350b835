#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "hcb/tx.hpp"

// Run log entries. The simulator collects these in order; analytics consumes
// them directly, and they serialize one-object-per-line (JSON) for offline
// tooling. MissEvent.t_r is filled in at the end of a run, once it is known
// whether the missed transaction ever arrived by gossip.

namespace hcb {

using NodeId = std::uint32_t;

struct SendEvent {
    SimMs at = 0;
    NodeId from = 0;
    NodeId to = 0;
    std::string kind;  // message kind name
    std::uint64_t bytes = 0;
    std::int64_t height = -1;  // for block-bearing messages, else -1
};

struct MinedEvent {
    SimMs at = 0;
    NodeId miner = 0;
    std::uint64_t height = 0;
    std::uint64_t txs = 0;
    bool empty = false;
};

struct BlockDoneEvent {
    SimMs at = 0;       // completion (adoptable body in hand)
    SimMs t_first = 0;  // first message about this block arrived
    NodeId node = 0;
    std::uint64_t height = 0;
    Hash32 hash{};
    bool via_full = false;  // full-body path; excluded from matched metrics
    bool matched = false;   // no missing-tx request round was needed
    std::uint64_t entries = 0;
    std::uint64_t full_entries = 0;
    std::uint64_t present_entries = 0;  // full + locally resolved
    std::uint64_t request_bytes = 0;    // extra request/response traffic, 0 if matched by push
};

struct MissEvent {
    NodeId node = 0;
    Hash32 tx{};
    std::uint64_t height = 0;
    SimMs t_c = 0;                // when the block referencing the tx arrived
    std::optional<SimMs> t_r;     // first gossip arrival, absent if never seen
};

struct TxInjectEvent {
    SimMs at = 0;
    Hash32 tx{};
    NodeId origin = 0;
    bool selfish = false;
};

struct ProtocolErrorEvent {
    SimMs at = 0;
    NodeId node = 0;
    std::string what;
};

using LogEvent = std::variant<SendEvent, MinedEvent, BlockDoneEvent, MissEvent, TxInjectEvent,
                              ProtocolErrorEvent>;

}  // namespace hcb
