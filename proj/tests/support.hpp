#pragma once

#include <random>
#include <string>
#include <vector>

#include "chunkchain/ledger/chain.hpp"

namespace chunkchain::testing {

inline crypto::SigningKeyPair key_from_index(int i) {
  Bytes seed(crypto::kSeedBytes, static_cast<std::uint8_t>(i));
  return crypto::SigningKeyPair::from_seed(seed);
}

inline Transaction make_tx(const crypto::SigningKeyPair &key, std::string nick, std::string text,
                           std::int64_t timestamp, TxKind kind = TxKind::chat) {
  TransactionDraft d{kind, key.public_key, std::move(nick), Bytes(text.begin(), text.end()), timestamp};
  return sign_transaction(std::move(d), key);
}

/// Mines a block with `txs` on top of `state` and returns it (not appended).
inline Block mine_next(const ChainState &state, std::vector<Transaction> txs, std::int64_t now,
                       std::string miner = "miner") {
  auto block = next_block_template(state, std::move(txs), now, std::move(miner));
  auto found = mine(block.header, state.difficulty, 0, std::uint64_t{1} << 32);
  block.header.nonce = *found.nonce;
  return block;
}

inline ChainState append(const ChainState &state, const Block &b) {
  auto out = select_chain(state, std::span<const Block>(&b, 1));
  if (!out.adopted) throw Error("fixture block rejected");
  return out.state;
}

/// Chain of `blocks` mined blocks after genesis, each with `per_block` txs.
inline ChainState build_chain(std::size_t blocks, std::size_t per_block, unsigned difficulty = 4,
                              const std::string &classroom = "demo") {
  auto state = make_chain(classroom, difficulty);
  auto key = key_from_index(7);
  int counter = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<Transaction> txs;
    for (std::size_t t = 0; t < per_block; ++t, ++counter)
      txs.push_back(make_tx(key, "alice", "message number " + std::to_string(counter), 1000 + counter));
    state = append(state, mine_next(state, std::move(txs), 10'000 * static_cast<std::int64_t>(b + 1)));
  }
  return state;
}

}  // namespace chunkchain::testing
