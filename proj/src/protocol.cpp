#include "hcb/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace hcb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<ShortId> sorted_unique(std::vector<ShortId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

const char* to_string(ProtocolKind k) {
    switch (k) {
        case ProtocolKind::BHP: return "bhp";
        case ProtocolKind::BCB: return "bcb";
        case ProtocolKind::SCB: return "scb";
        case ProtocolKind::PCB: return "pcb";
        case ProtocolKind::HCB: return "hcb";
    }
    return "?";
}

std::optional<ProtocolKind> protocol_from_string(std::string_view s) {
    std::string lower(s);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "bhp") return ProtocolKind::BHP;
    if (lower == "bcb") return ProtocolKind::BCB;
    if (lower == "scb") return ProtocolKind::SCB;
    if (lower == "pcb") return ProtocolKind::PCB;
    if (lower == "hcb") return ProtocolKind::HCB;
    return std::nullopt;
}

// --- message codec ---

const char* message_kind(const Message& m) {
    static constexpr const char* kNames[] = {
        "hello",    "full_block", "hcb_block", "compact_block",   "announce",    "get_header",
        "header",   "get_body",   "body",      "get_missing_txs", "missing_txs", "new_tx"};
    return kNames[m.index()];
}

Bytes encode_message(const Message& m) {
    Bytes out;
    out.reserve(encoded_size(m));
    out.push_back(static_cast<std::uint8_t>(m.index()));
    std::visit(overloaded{
                   [&](const SendHcbHello&) {},
                   [&](const FullBlockMsg& x) {
                       Bytes b = encode_block(x.block);
                       out.insert(out.end(), b.begin(), b.end());
                   },
                   [&](const HcbBlockMsg& x) {
                       Bytes b = encode_hcb(x.block);
                       out.insert(out.end(), b.begin(), b.end());
                   },
                   [&](const CompactBlockMsg& x) {
                       Bytes b = encode_compact(x.block);
                       out.insert(out.end(), b.begin(), b.end());
                   },
                   [&](const BlockHashAnnounce& x) {
                       put_hash(out, x.hash);
                       put_u64(out, x.height);
                   },
                   [&](const GetHeader& x) { put_hash(out, x.hash); },
                   [&](const HeaderMsg& x) { encode_header(out, x.header); },
                   [&](const GetBody& x) { put_hash(out, x.hash); },
                   [&](const BodyMsg& x) {
                       put_hash(out, x.hash);
                       put_u32(out, static_cast<std::uint32_t>(x.body.size()));
                       for (const auto& tx : x.body) encode_transaction(out, tx);
                   },
                   [&](const GetMissingTxs& x) {
                       put_hash(out, x.block);
                       put_u32(out, static_cast<std::uint32_t>(x.sids.size()));
                       for (const auto& sid : x.sids)
                           out.insert(out.end(), sid.bytes.begin(), sid.bytes.end());
                   },
                   [&](const MissingTxs& x) {
                       put_hash(out, x.block);
                       put_u32(out, static_cast<std::uint32_t>(x.txs.size()));
                       for (const auto& tx : x.txs) encode_transaction(out, tx);
                   },
                   [&](const NewTxMsg& x) { encode_transaction(out, x.tx); },
               },
               m);
    return out;
}

Message decode_message(std::span<const std::uint8_t> data) {
    if (data.empty()) throw std::runtime_error("decode: empty message");
    const std::uint8_t tag = data[0];
    const auto rest = data.subspan(1);
    ByteReader r{rest};
    Message m;
    switch (tag) {
        case 0: m = SendHcbHello{}; break;
        case 1: m = FullBlockMsg{decode_block(rest)}; break;
        case 2: m = HcbBlockMsg{decode_hcb(rest)}; break;
        case 3: m = CompactBlockMsg{decode_compact(rest)}; break;
        case 4: {
            BlockHashAnnounce a;
            a.hash = get_hash(r);
            a.height = get_u64(r);
            m = a;
            break;
        }
        case 5: m = GetHeader{get_hash(r)}; break;
        case 6: m = HeaderMsg{decode_header(r)}; break;
        case 7: m = GetBody{get_hash(r)}; break;
        case 8: {
            BodyMsg b;
            b.hash = get_hash(r);
            const std::uint32_t n = get_u32(r);
            b.body.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i) b.body.push_back(decode_transaction(r));
            m = std::move(b);
            break;
        }
        case 9: {
            GetMissingTxs g;
            g.block = get_hash(r);
            const std::uint32_t n = get_u32(r);
            g.sids.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i) g.sids.push_back(get_short_id(r));
            m = std::move(g);
            break;
        }
        case 10: {
            MissingTxs t;
            t.block = get_hash(r);
            const std::uint32_t n = get_u32(r);
            t.txs.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i) t.txs.push_back(decode_transaction(r));
            m = std::move(t);
            break;
        }
        case 11: m = NewTxMsg{decode_transaction(r)}; break;
        default: throw std::runtime_error("decode: unknown message tag");
    }
    // Canonical encoding: a clean decode must account for every input byte.
    if (encoded_size(m) != data.size()) throw std::runtime_error("decode: trailing bytes");
    return m;
}

std::size_t encoded_size(const Message& m) {
    const std::size_t payload = std::visit(
        overloaded{
            [](const SendHcbHello&) -> std::size_t { return 0; },
            [](const FullBlockMsg& x) -> std::size_t { return encoded_size(x.block); },
            [](const HcbBlockMsg& x) -> std::size_t { return encoded_size(x.block); },
            [](const CompactBlockMsg& x) -> std::size_t { return encoded_size(x.block); },
            [](const BlockHashAnnounce&) -> std::size_t { return kAnnounceBytes; },
            [](const GetHeader&) -> std::size_t { return 32; },
            [](const HeaderMsg&) -> std::size_t { return kHeaderBytes; },
            [](const GetBody&) -> std::size_t { return 32; },
            [](const BodyMsg& x) -> std::size_t {
                std::size_t n = 32 + kCountBytes;
                for (const auto& tx : x.body) n += encoded_size(tx);
                return n;
            },
            [](const GetMissingTxs& x) -> std::size_t {
                return 32 + kCountBytes + x.sids.size() * kShortIdBytes;
            },
            [](const MissingTxs& x) -> std::size_t {
                std::size_t n = 32 + kCountBytes;
                for (const auto& tx : x.txs) n += encoded_size(tx);
                return n;
            },
            [](const NewTxMsg& x) -> std::size_t { return encoded_size(x.tx); },
        },
        m);
    return 1 + payload;
}

// --- reconstruction ---

std::vector<ShortId> ReconstructionState::u_m() const {
    std::vector<ShortId> v;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (id_class[i] == IdClass::Missing) v.push_back(std::get<ShortId>(entries[i]));
    return sorted_unique(std::move(v));
}

std::vector<ShortId> ReconstructionState::u_p() const {
    std::vector<ShortId> v;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (id_class[i] == IdClass::Unique) v.push_back(std::get<ShortId>(entries[i]));
    return sorted_unique(std::move(v));
}

std::vector<ShortId> ReconstructionState::u_c() const {
    std::vector<ShortId> v;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (id_class[i] == IdClass::Collided) v.push_back(std::get<ShortId>(entries[i]));
    return sorted_unique(std::move(v));
}

std::size_t ReconstructionState::short_entries() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += std::holds_alternative<ShortId>(e);
    return n;
}

ResolveResult resolve(const ReconstructionState& st) {
    auto um = st.u_m();
    auto uc = st.u_c();
    if (!um.empty()) {
        um.insert(um.end(), uc.begin(), uc.end());
        return NeedTxs{sorted_unique(std::move(um))};
    }

    std::vector<std::size_t> collided;
    std::uint64_t combos = 1;
    for (std::size_t i = 0; i < st.entries.size(); ++i) {
        if (st.id_class[i] != IdClass::Collided) continue;
        collided.push_back(i);
        const auto c = static_cast<std::uint64_t>(st.candidates[i].size());
        if (combos > kMaxCombinations / c) {
            return NeedTxs{std::move(uc)};  // candidate space too large to search
        }
        combos *= c;
    }
    if (combos > kMaxCombinations) return NeedTxs{std::move(uc)};

    std::vector<Transaction> body(st.entries.size());
    for (std::size_t i = 0; i < st.entries.size(); ++i) {
        if (st.id_class[i] == IdClass::Full)
            body[i] = std::get<Transaction>(st.entries[i]);
        else if (st.id_class[i] == IdClass::Unique)
            body[i] = st.candidates[i][0];
    }

    std::vector<std::size_t> pick(collided.size(), 0);
    for (bool more = true; more;) {
        for (std::size_t k = 0; k < collided.size(); ++k) body[collided[k]] = st.candidates[collided[k]][pick[k]];
        if (compute_body_hash(body) == st.header.body_hash)
            return Reconstructed{Block{st.header, std::move(body)}};
        more = false;
        for (std::size_t k = pick.size(); k-- > 0;) {
            if (++pick[k] < st.candidates[collided[k]].size()) {
                more = true;
                break;
            }
            pick[k] = 0;
        }
    }
    if (uc.empty()) return Corrupt{"body hash mismatch with all entries resolved"};
    return NeedTxs{std::move(uc)};  // every candidate combination failed the body hash
}

Predictor constant_present_predictor() {
    return [](const FeatureVector&) { return false; };
}

Predictor model_predictor(std::shared_ptr<const BayesModel> model) {
    return [model = std::move(model)](const FeatureVector& f) {
        return classify(*model, f).label == TxClass::Missing;
    };
}

Block make_genesis(Gwei base_fee) {
    Block g;
    g.header.base_fee = base_fee;
    g.header.body_hash = compute_body_hash(g.body);
    return g;
}

// --- Node ---

Node::Node(const Config& cfg, std::vector<NodeId> neighbors, Predictor predictor,
           NodeListener* listener, const Block& genesis)
    : cfg_(cfg),
      neighbors_(std::move(neighbors)),
      predict_(std::move(predictor)),
      listener_(listener),
      rng_(cfg.rng_seed),
      pool_(cfg.pool, &secondary_),
      secondary_(uses_secondary(cfg.kind) ? cfg.secondary_cap : 0) {
    if (uses_compact(cfg_.kind)) cfg_.hcb_capable = true;
    if (!uses_secondary(cfg_.kind)) cfg_.secondary_cap = 0;
    std::sort(neighbors_.begin(), neighbors_.end());
    neighbors_.erase(std::unique(neighbors_.begin(), neighbors_.end()), neighbors_.end());

    chain_.push_back(genesis);
    const Hash32 gh = block_hash(genesis.header);
    height_by_hash_[gh] = 0;
    adopted_at_[gh] = 0;
    fees_.base_fee =
        next_base_fee(genesis.header.base_fee, genesis.header.gas_used, cfg_.block_tx_cap / 2);
}

std::vector<Outgoing> Node::connect() {
    std::vector<Outgoing> out;
    if (!cfg_.hcb_capable) return out;
    out.reserve(neighbors_.size());
    for (NodeId p : neighbors_) out.push_back({p, SendHcbHello{}});
    return out;
}

std::optional<SimMs> Node::adopted_at(const Hash32& bh) const {
    auto it = adopted_at_.find(bh);
    if (it == adopted_at_.end()) return std::nullopt;
    return it->second;
}

std::optional<SimMs> Node::first_seen(const Hash32& tx_hash) const {
    auto it = first_seen_.find(tx_hash);
    if (it == first_seen_.end()) return std::nullopt;
    return it->second;
}

Node::BlockFlight& Node::touch_flight(const Hash32& bh, NodeId from, SimMs now) {
    auto [it, inserted] = flights_.try_emplace(bh);
    if (inserted) {
        it->second.t_first = now;
        it->second.from = from;
    }
    return it->second;
}

const Block* Node::find_block(const Hash32& bh) const {
    if (auto it = height_by_hash_.find(bh); it != height_by_hash_.end()) return &chain_[it->second];
    for (const auto& [h, b] : buffered_)
        if (block_hash(b.header) == bh) return &b;
    return nullptr;
}

void Node::error(SimMs now, std::string what) {
    if (listener_) listener_->on_event(ProtocolErrorEvent{now, cfg_.id, std::move(what)});
}

void Node::record_tx(const Transaction& tx, SimMs now) {
    first_seen_.emplace(tx.tx_hash, now);
    Transaction t = tx;
    t.effective_fee = std::min(t.max_fee, fees_.base_fee + t.max_priority_fee);
    auto outcome = pool_.admit(t, now);
    for (auto& e : outcome.evicted) secondary_.accept_evicted(std::move(e));
}

std::vector<Outgoing> Node::submit_tx(const Transaction& tx, SimMs now, bool selfish) {
    if (first_seen_.count(tx.tx_hash)) return {};
    if (selfish) withheld_.insert(tx.tx_hash);
    record_tx(tx, now);
    std::vector<Outgoing> out;
    if (!selfish) {
        out.reserve(neighbors_.size());
        for (NodeId p : neighbors_) out.push_back({p, NewTxMsg{tx}});
    }
    return out;
}

Block Node::mine(const BlockHeader& parent, bool force_empty, SimMs now) {
    Block b;
    if (force_empty) {
        b.header.height = parent.height + 1;
        b.header.parent_hash = block_hash(parent);
        b.header.base_fee = next_base_fee(parent.base_fee, parent.gas_used, cfg_.block_tx_cap / 2);
        b.header.body_hash = compute_body_hash(b.body);
    } else {
        b = pool_.assemble_block(cfg_.block_tx_cap, parent);
        if (!withheld_.empty()) {
            std::stable_partition(b.body.begin(), b.body.end(), [&](const Transaction& t) {
                return withheld_.count(t.tx_hash) != 0;
            });
            b.header.body_hash = compute_body_hash(b.body);
        }
    }
    b.header.timestamp_ms = static_cast<std::uint64_t>(now);
    if (listener_)
        listener_->on_event(MinedEvent{now, cfg_.id, b.header.height,
                                       static_cast<std::uint64_t>(b.body.size()), b.body.empty()});
    return b;
}

ReconstructionState Node::identify(const BlockHeader& header, std::vector<HcbEntry> entries,
                                   NodeId from, bool was_compact, SimMs now) const {
    ReconstructionState st;
    st.header = header;
    st.entries = std::move(entries);
    st.from = from;
    st.was_compact = was_compact;
    st.t_first = now;
    const std::size_t n = st.entries.size();
    st.id_class.resize(n);
    st.candidates.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (const auto* tx = std::get_if<Transaction>(&st.entries[i])) {
            // Full entries need no resolution; the lookup records whether the
            // tx was locally held, which becomes the training label.
            st.id_class[i] = IdClass::Full;
            st.candidates[i] = secondary_.lookup(derive_short_id(tx->tx_hash));
        } else {
            const auto& sid = std::get<ShortId>(st.entries[i]);
            st.candidates[i] = secondary_.lookup(sid);
            st.id_class[i] = st.candidates[i].empty()      ? IdClass::Missing
                             : st.candidates[i].size() == 1 ? IdClass::Unique
                                                            : IdClass::Collided;
        }
    }
    return st;
}

Message Node::block_message_for(NodeId peer, const Block& block,
                                const std::vector<bool>& miss_flags) const {
    if (!uses_compact(cfg_.kind) || !capable_peers_.count(peer)) return FullBlockMsg{block};
    if (uses_prediction(cfg_.kind) &&
        std::find(miss_flags.begin(), miss_flags.end(), true) != miss_flags.end())
        return HcbBlockMsg{to_hcb(block, miss_flags)};
    return CompactBlockMsg{to_compact(block)};
}

std::vector<Outgoing> Node::forward_block(const Block& block, SimMs now) {
    const Hash32 bh = block_hash(block.header);
    if (!forwarded_.insert(bh).second) return {};

    // Per-entry features against the pre-update pools; prediction flags for
    // kinds that send hybrid blocks.
    std::vector<bool> flags(block.body.size(), false);
    if (uses_compact(cfg_.kind) && !block.body.empty()) {
        std::vector<FeatureVector> feats;
        feats.reserve(block.body.size());
        const std::size_t m = block.body.size();
        for (std::size_t i = 0; i < m; ++i) {
            const Transaction& tx = block.body[i];
            std::optional<SimMs> seen;
            if (auto it = first_seen_.find(tx.tx_hash); it != first_seen_.end()) seen = it->second;
            const bool held = pool_.contains(tx.tx_hash) || secondary_.in_store(tx.tx_hash);
            feats.push_back(extract_features(tx, i + 1, m, seen, held, now));
        }
        if (uses_prediction(cfg_.kind))
            for (std::size_t i = 0; i < m; ++i) flags[i] = predict_(feats[i]);
        if (listener_) listener_->on_block_features(cfg_.id, bh, feats);
    }

    std::vector<Outgoing> out;
    const std::size_t n = neighbors_.size();
    if (n == 0) return out;
    const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    std::vector<NodeId> pick = neighbors_;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, n - 1);
        std::swap(pick[i], pick[d(rng_)]);
    }
    std::sort(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k));
    out.reserve(n);
    for (std::size_t i = 0; i < k; ++i) out.push_back({pick[i], block_message_for(pick[i], block, flags)});
    const std::unordered_set<NodeId> selected(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k));
    for (NodeId p : neighbors_)
        if (!selected.count(p)) out.push_back({p, BlockHashAnnounce{block.header.height, bh}});
    return out;
}

void Node::adopt(const Block& block, SimMs now) {
    const Hash32 bh = block_hash(block.header);
    chain_.push_back(block);
    height_by_hash_[bh] = chain_.size() - 1;
    adopted_at_[bh] = now;
    // Pool maintenance against the fee environment of the next height.
    fees_.base_fee = next_base_fee(block.header.base_fee, block.header.gas_used, cfg_.block_tx_cap / 2);
    secondary_.block_update(pool_, block, fees_);
}

std::vector<Outgoing> Node::adopt_or_buffer(const Block& block, SimMs now) {
    const Hash32 bh = block_hash(block.header);
    if (adopted_at_.count(bh)) return {};
    const std::uint64_t h = block.header.height;
    if (h == height() + 1 && block.header.parent_hash == block_hash(tip().header)) {
        adopt(block, now);
        for (;;) {
            auto it = buffered_.find(height() + 1);
            if (it == buffered_.end()) break;
            Block next = std::move(it->second);
            buffered_.erase(it);
            if (next.header.parent_hash != block_hash(tip().header)) break;
            adopt(next, now);
        }
    } else if (h > height() + 1 && h <= height() + 2) {
        buffered_.insert_or_assign(h, block);
    }
    // Anything else (old, fork, too far ahead) is dropped.
    return {};
}

std::vector<Outgoing> Node::accept_block(const Block& block, SimMs now) {
    auto out = forward_block(block, now);
    auto rest = adopt_or_buffer(block, now);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

std::vector<Outgoing> Node::complete_block(BlockFlight& fl, const Block& block, SimMs now,
                                           bool via_full) {
    if (fl.done) return {};
    fl.done = true;
    const Hash32 bh = block_hash(block.header);

    std::uint64_t entries = block.body.size();
    std::uint64_t full_entries = entries;
    std::uint64_t present_entries = entries;
    const bool matched = !fl.missing_requested;

    if (!via_full && fl.recon) {
        const auto& st = *fl.recon;
        entries = st.entries.size();
        full_entries = entries - st.short_entries();
        if (listener_) {
            std::vector<bool> labels(st.entries.size(), false);
            for (std::size_t i = 0; i < st.entries.size(); ++i)
                for (const auto& c : st.candidates[i])
                    if (c.tx_hash == block.body[i].tx_hash) {
                        labels[i] = true;
                        break;
                    }
            listener_->on_block_labels(cfg_.id, st.from, bh, labels);
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (!labels[i])
                    listener_->on_event(MissEvent{cfg_.id, block.body[i].tx_hash,
                                                  block.header.height, fl.t_first, std::nullopt});
        }
        if (fl.missing_requested) {
            auto requested = st.u_m();
            auto uc = st.u_c();
            requested.insert(requested.end(), uc.begin(), uc.end());
            requested = sorted_unique(std::move(requested));
            std::uint64_t fetched = 0;
            for (std::size_t i = 0; i < st.entries.size(); ++i)
                if (const auto* sid = std::get_if<ShortId>(&st.entries[i]))
                    if (std::binary_search(requested.begin(), requested.end(), *sid)) ++fetched;
            present_entries = entries - fetched;
        }
    }

    if (listener_)
        listener_->on_event(BlockDoneEvent{now, fl.t_first, cfg_.id, block.header.height, bh,
                                           via_full, matched, entries, full_entries,
                                           present_entries, fl.request_bytes});
    return accept_block(block, now);
}

std::vector<Outgoing> Node::on_block_entries(NodeId from, const BlockHeader& header,
                                             std::vector<HcbEntry> entries, bool was_compact,
                                             SimMs now) {
    const Hash32 bh = block_hash(header);
    if (adopted_at_.count(bh)) return {};
    auto& fl = touch_flight(bh, from, now);
    if (fl.done || fl.recon) return {};
    fl.height = static_cast<std::int64_t>(header.height);
    fl.header = header;
    fl.recon = identify(header, std::move(entries), from, was_compact, now);

    auto rr = resolve(*fl.recon);
    if (auto* rec = std::get_if<Reconstructed>(&rr)) return complete_block(fl, rec->block, now, false);
    if (auto* need = std::get_if<NeedTxs>(&rr)) {
        fl.missing_requested = true;
        Message req = GetMissingTxs{bh, std::move(need->sids)};
        fl.request_bytes += encoded_size(req);
        std::vector<Outgoing> out;
        out.push_back({from, std::move(req)});
        return out;
    }
    error(now, "block " + to_hex(bh) + " discarded: " + std::get<Corrupt>(rr).reason);
    flights_.erase(bh);
    return {};
}

std::vector<Outgoing> Node::deliver(NodeId from, const Message& msg, SimMs now) {
    const std::size_t in_bytes = encoded_size(msg);
    std::vector<Outgoing> out;
    std::visit(
        overloaded{
            [&](const SendHcbHello&) { capable_peers_.insert(from); },
            [&](const FullBlockMsg& x) {
                const Hash32 bh = block_hash(x.block.header);
                if (adopted_at_.count(bh)) return;
                auto& fl = touch_flight(bh, from, now);
                if (fl.done) return;
                if (compute_body_hash(x.block.body) != x.block.header.body_hash) {
                    error(now, "full block " + to_hex(bh) + " body hash mismatch");
                    return;
                }
                fl.height = static_cast<std::int64_t>(x.block.header.height);
                out = complete_block(fl, x.block, now, true);
            },
            [&](const HcbBlockMsg& x) {
                out = on_block_entries(from, x.block.header, x.block.entries, false, now);
            },
            [&](const CompactBlockMsg& x) {
                std::vector<HcbEntry> entries(x.block.entries.begin(), x.block.entries.end());
                out = on_block_entries(from, x.block.header, std::move(entries), true, now);
            },
            [&](const BlockHashAnnounce& x) {
                if (adopted_at_.count(x.hash) || flights_.count(x.hash)) return;
                auto& fl = touch_flight(x.hash, from, now);
                fl.height = static_cast<std::int64_t>(x.height);
                fl.header_requested = true;
                Message req = GetHeader{x.hash};
                fl.request_bytes += encoded_size(req);
                out.push_back({from, std::move(req)});
            },
            [&](const GetHeader& x) {
                const Block* b = find_block(x.hash);
                if (!b) {
                    error(now, "get_header for unknown block " + to_hex(x.hash));
                    return;
                }
                out.push_back({from, HeaderMsg{b->header}});
            },
            [&](const HeaderMsg& x) {
                const Hash32 bh = block_hash(x.header);
                auto it = flights_.find(bh);
                if (it == flights_.end()) return;
                auto& fl = it->second;
                if (fl.done || fl.recon || fl.body_requested) return;
                fl.header = x.header;
                fl.height = static_cast<std::int64_t>(x.header.height);
                fl.request_bytes += in_bytes;
                fl.body_requested = true;
                Message req = GetBody{bh};
                fl.request_bytes += encoded_size(req);
                out.push_back({from, std::move(req)});
            },
            [&](const GetBody& x) {
                const Block* b = find_block(x.hash);
                if (!b) {
                    error(now, "get_body for unknown block " + to_hex(x.hash));
                    return;
                }
                out.push_back({from, BodyMsg{x.hash, b->body}});
            },
            [&](const BodyMsg& x) {
                auto it = flights_.find(x.hash);
                if (it == flights_.end()) return;
                auto& fl = it->second;
                if (fl.done || !fl.header) return;
                fl.request_bytes += in_bytes;
                if (compute_body_hash(x.body) != fl.header->body_hash) {
                    error(now, "body for " + to_hex(x.hash) + " fails the header body hash");
                    flights_.erase(it);
                    return;
                }
                Block b{*fl.header, x.body};
                out = complete_block(fl, b, now, true);
            },
            [&](const GetMissingTxs& x) {
                const Block* b = find_block(x.block);
                if (!b) {
                    error(now, "get_missing_txs for unknown block " + to_hex(x.block));
                    return;
                }
                MissingTxs resp{x.block, {}};
                for (const auto& sid : x.sids) {
                    bool found = false;
                    for (const auto& tx : b->body)
                        if (derive_short_id(tx.tx_hash) == sid) {
                            resp.txs.push_back(tx);
                            found = true;
                        }
                    if (!found) error(now, "get_missing_txs: no body tx with short id " + sid.hex());
                }
                out.push_back({from, std::move(resp)});
            },
            [&](const MissingTxs& x) {
                auto it = flights_.find(x.block);
                if (it == flights_.end()) return;
                auto& fl = it->second;
                if (fl.done || !fl.recon) return;
                fl.request_bytes += in_bytes;

                // The responder read these txs out of the actual body, so for
                // any requested short id they replace the local candidates.
                std::unordered_map<std::uint64_t, std::vector<Transaction>> got;
                for (const auto& tx : x.txs) got[derive_short_id(tx.tx_hash).key()].push_back(tx);
                ReconstructionState st = *fl.recon;
                for (std::size_t i = 0; i < st.entries.size(); ++i) {
                    const auto* sid = std::get_if<ShortId>(&st.entries[i]);
                    if (!sid) continue;
                    auto g = got.find(sid->key());
                    if (g == got.end()) continue;
                    st.candidates[i] = g->second;
                    st.id_class[i] = g->second.size() == 1 ? IdClass::Unique : IdClass::Collided;
                }
                auto rr = resolve(st);
                if (auto* rec = std::get_if<Reconstructed>(&rr)) {
                    out = complete_block(fl, rec->block, now, false);
                    return;
                }
                error(now, "block " + to_hex(x.block) + " unresolved after a missing-tx round");
                flights_.erase(it);
            },
            [&](const NewTxMsg& x) {
                if (first_seen_.count(x.tx.tx_hash)) return;
                record_tx(x.tx, now);
                out.reserve(neighbors_.size());
                for (NodeId p : neighbors_)
                    if (p != from) out.push_back({p, msg});
            },
        },
        msg);
    return out;
}

}  // namespace hcb
