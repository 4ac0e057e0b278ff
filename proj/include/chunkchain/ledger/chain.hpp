#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "chunkchain/ledger/block.hpp"

namespace chunkchain {

/// Clock-skew allowance between a block and its parent.
constexpr std::int64_t kMaxBackwardSkewMs = 120'000;

enum class Rule {
  bad_genesis,
  genesis_mismatch,
  unknown_parent,
  index_mismatch,
  prev_hash_mismatch,
  difficulty_mismatch,
  tx_root_mismatch,
  insufficient_work,
  invalid_transaction,
  duplicate_transaction,
  timestamp_too_old,
  too_many_transactions,
};

inline std::string_view rule_name(Rule r) {
  switch (r) {
    case Rule::bad_genesis: return "bad-genesis";
    case Rule::genesis_mismatch: return "genesis-mismatch";
    case Rule::unknown_parent: return "unknown-parent";
    case Rule::index_mismatch: return "index-mismatch";
    case Rule::prev_hash_mismatch: return "prev-hash-mismatch";
    case Rule::difficulty_mismatch: return "difficulty-mismatch";
    case Rule::tx_root_mismatch: return "tx-root-mismatch";
    case Rule::insufficient_work: return "insufficient-work";
    case Rule::invalid_transaction: return "invalid-transaction";
    case Rule::duplicate_transaction: return "duplicate-transaction";
    case Rule::timestamp_too_old: return "timestamp-too-old";
    case Rule::too_many_transactions: return "too-many-transactions";
  }
  return "unknown";
}

struct Violation {
  Rule rule;
  std::uint64_t block_index = 0;
  std::string detail;

  std::string name() const { return std::string(rule_name(rule)); }
};

/// Checks `block` against its parent; `prev == nullptr` selects the genesis
/// rules. Returns the first failed rule.
inline std::optional<Violation> validate_block(const Block &block, const Block *prev) {
  const auto &h = block.header;
  auto fail = [&](Rule r, std::string detail = {}) {
    return std::optional<Violation>(Violation{r, h.index, std::move(detail)});
  };

  if (prev == nullptr) {
    if (h.index != 0) return fail(Rule::index_mismatch, "only genesis may lack a parent");
    if (!h.prev_hash.is_zero()) return fail(Rule::bad_genesis, "genesis prev_hash must be zero");
    if (!block.transactions.empty()) return fail(Rule::bad_genesis, "genesis carries no transactions");
    if (h.tx_root != compute_tx_root({})) return fail(Rule::tx_root_mismatch);
    if (h.timestamp != 0 || h.nonce != 0) return fail(Rule::bad_genesis, "genesis timestamp and nonce are 0");
    if (h.difficulty > kMaxDifficulty) return fail(Rule::bad_genesis, "difficulty out of range");
    return std::nullopt;
  }

  if (h.index != prev->header.index + 1) return fail(Rule::index_mismatch);
  if (h.prev_hash != hash_header(prev->header)) return fail(Rule::prev_hash_mismatch);
  if (h.difficulty != prev->header.difficulty) return fail(Rule::difficulty_mismatch);
  if (h.tx_root != compute_tx_root(block.transactions)) return fail(Rule::tx_root_mismatch);
  if (leading_zero_bits(hash_header(h)) < h.difficulty) return fail(Rule::insufficient_work);

  std::set<Digest> ids;
  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    const auto &tx = block.transactions[i];
    if (!verify_transaction(tx)) return fail(Rule::invalid_transaction, "transaction " + std::to_string(i));
    if (!ids.insert(tx.id).second) return fail(Rule::duplicate_transaction, tx.id.hex());
  }
  if (h.timestamp < prev->header.timestamp - kMaxBackwardSkewMs) return fail(Rule::timestamp_too_old);
  if (block.transactions.size() > kMaxBlockTransactions) return fail(Rule::too_many_transactions);
  return std::nullopt;
}

/// Full-chain check starting from genesis, including cross-block transaction
/// uniqueness.
inline std::optional<Violation> validate_chain(std::span<const Block> blocks) {
  if (blocks.empty()) return Violation{Rule::bad_genesis, 0, "empty chain"};
  std::set<Digest> ids;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (auto v = validate_block(blocks[i], i == 0 ? nullptr : &blocks[i - 1])) return v;
    for (const auto &tx : blocks[i].transactions)
      if (!ids.insert(tx.id).second)
        return Violation{Rule::duplicate_transaction, blocks[i].header.index, tx.id.hex()};
  }
  return std::nullopt;
}

struct ChainState {
  std::vector<Block> blocks;
  std::map<Digest, Transaction> mempool;
  unsigned difficulty = 0;
  /// Index of confirmed transaction ids to their block index.
  std::map<Digest, std::uint64_t> confirmed;

  const Block &tip() const { return blocks.back(); }
  std::uint64_t tip_index() const { return blocks.back().header.index; }
  Digest tip_hash() const { return block_hash(blocks.back()); }
  Digest genesis_hash() const { return block_hash(blocks.front()); }

  bool knows(const Digest &tx_id) const { return mempool.contains(tx_id) || confirmed.contains(tx_id); }

  friend bool operator==(const ChainState &, const ChainState &) = default;
};

inline ChainState make_chain(std::string classroom_name, unsigned difficulty) {
  ChainState s;
  s.blocks.push_back(make_genesis(std::move(classroom_name), difficulty));
  s.difficulty = difficulty;
  return s;
}

/// Adds a verified transaction. Ids already pending or confirmed are ignored.
[[nodiscard]] inline ChainState mempool_add(ChainState state, const Transaction &tx) {
  if (state.knows(tx.id)) return state;
  if (!verify_transaction(tx)) throw Error("transaction failed verification: " + tx.id.hex());
  state.mempool.emplace(tx.id, tx);
  return state;
}

struct DrainResult {
  ChainState state;
  std::vector<Transaction> transactions;
};

/// Removes up to `max_tx` pending transactions ordered by (timestamp, id).
[[nodiscard]] inline DrainResult drain_for_block(ChainState state, std::size_t max_tx = kMaxBlockTransactions) {
  std::vector<const Transaction *> order;
  order.reserve(state.mempool.size());
  for (const auto &[id, tx] : state.mempool) order.push_back(&tx);
  std::sort(order.begin(), order.end(), [](const Transaction *a, const Transaction *b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    return a->id < b->id;
  });
  if (order.size() > max_tx) order.resize(max_tx);

  DrainResult out;
  out.transactions.reserve(order.size());
  for (const auto *tx : order) out.transactions.push_back(*tx);
  for (const auto &tx : out.transactions) state.mempool.erase(tx.id);
  out.state = std::move(state);
  return out;
}

/// A template for the next block on top of `state`'s tip; nonce left at 0.
inline Block next_block_template(const ChainState &state, std::vector<Transaction> txs, std::int64_t now_ms,
                                 std::string miner_nick) {
  Block b;
  b.header.index = state.tip_index() + 1;
  b.header.prev_hash = state.tip_hash();
  b.header.tx_root = compute_tx_root(txs);
  b.header.timestamp = std::max(now_ms, state.tip().header.timestamp);
  b.header.difficulty = state.difficulty;
  b.header.miner_nick = std::move(miner_nick);
  b.transactions = std::move(txs);
  return b;
}

struct SelectOutcome {
  ChainState state;
  bool adopted = false;
  std::optional<Violation> violation;
  std::vector<Block> abandoned;
};

/// Fork choice: adopts `candidate` (a contiguous run whose first block's
/// parent is in `local`, or a full chain from genesis) iff it is fully valid
/// and yields a longer chain, or an equally long one with a smaller tip
/// digest.
inline SelectOutcome select_chain(const ChainState &local, std::span<const Block> candidate) {
  SelectOutcome out{local, false, std::nullopt, {}};

  // Blocks the local chain already holds carry no information.
  while (!candidate.empty()) {
    auto idx = candidate.front().header.index;
    if (idx > local.tip_index() || block_hash(local.blocks[static_cast<std::size_t>(idx)]) != block_hash(candidate.front()))
      break;
    candidate = candidate.subspan(1);
  }
  if (candidate.empty()) return out;

  const auto first_index = candidate.front().header.index;
  std::size_t keep = 0;  // blocks of `local` kept below the candidate
  if (first_index == 0) {
    if (block_hash(candidate.front()) != local.genesis_hash()) {
      out.violation = Violation{Rule::genesis_mismatch, 0, "candidate genesis differs"};
      return out;
    }
    keep = 0;
  } else {
    if (first_index - 1 > local.tip_index() ||
        block_hash(local.blocks[first_index - 1]) != candidate.front().header.prev_hash) {
      out.violation = Violation{Rule::unknown_parent, first_index, "candidate does not attach"};
      return out;
    }
    keep = static_cast<std::size_t>(first_index);
  }

  const auto new_length = keep + candidate.size();
  const auto local_length = local.blocks.size();
  if (new_length < local_length) return out;
  if (new_length == local_length && !(block_hash(candidate.back()) < local.tip_hash())) return out;

  std::set<Digest> ids;
  for (std::size_t i = 0; i < keep; ++i)
    for (const auto &tx : local.blocks[i].transactions) ids.insert(tx.id);
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const Block *prev = nullptr;
    if (i > 0) prev = &candidate[i - 1];
    else if (keep > 0) prev = &local.blocks[keep - 1];
    if (auto v = validate_block(candidate[i], prev)) {
      out.violation = v;
      return out;
    }
    for (const auto &tx : candidate[i].transactions) {
      if (!ids.insert(tx.id).second) {
        out.violation = Violation{Rule::duplicate_transaction, candidate[i].header.index, tx.id.hex()};
        return out;
      }
    }
  }

  ChainState next;
  next.difficulty = local.difficulty;
  next.blocks.assign(local.blocks.begin(), local.blocks.begin() + static_cast<std::ptrdiff_t>(keep));
  next.blocks.insert(next.blocks.end(), candidate.begin(), candidate.end());
  for (const auto &b : next.blocks)
    for (const auto &tx : b.transactions) next.confirmed.emplace(tx.id, b.header.index);

  out.abandoned.assign(local.blocks.begin() + static_cast<std::ptrdiff_t>(keep), local.blocks.end());
  for (const auto &[id, tx] : local.mempool)
    if (!next.confirmed.contains(id)) next.mempool.emplace(id, tx);
  for (const auto &b : out.abandoned)
    for (const auto &tx : b.transactions)
      if (!next.confirmed.contains(tx.id)) next.mempool.emplace(tx.id, tx);

  out.state = std::move(next);
  out.adopted = true;
  return out;
}

}  // namespace chunkchain
