#include <gtest/gtest.h>

#include <random>
#include <set>

#include "chunkchain/ledger/chain.hpp"
#include "support.hpp"

namespace chunkchain {
namespace {

using testing::build_chain;
using testing::key_from_index;
using testing::make_tx;
using testing::mine_next;

// Frozen with `sha256sum` and an independent Python implementation of the
// canonical header layout.
constexpr const char *kEmptySha = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
constexpr const char *kAbcSha = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
constexpr const char *kDemoGenesisHeader =
    "000000000000000000000020000000000000000000000000000000000000000000000000000000000000000000000020"
    "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855000000000000000000000000000000080000"
    "0000000000000000000464656d6f";
constexpr const char *kDemoGenesisHash = "4c78e1216a4942ce8edc0a3c48b6ed1d70e4372a5626f43361b33b8a33a85b13";

TEST(Hashing, RawPrimitiveMatchesReferenceVectors) {
  EXPECT_EQ(crypto::sha256(std::string_view{}).hex(), kEmptySha);
  EXPECT_EQ(crypto::sha256(std::string_view{"abc"}).hex(), kAbcSha);
}

TEST(Hashing, HeaderSerializationIsBitExact) {
  auto g = make_genesis("demo", 8);
  EXPECT_EQ(to_hex(encode_header(g.header)), kDemoGenesisHeader);
  EXPECT_EQ(hash_header(g.header).hex(), kDemoGenesisHash);
  EXPECT_EQ(hash_header(g.header).hex().size(), 64u);
}

TEST(Hashing, DeterministicAndNonceSensitive) {
  auto g = make_genesis("demo", 8);
  EXPECT_EQ(hash_header(g.header), hash_header(g.header));
  std::set<Digest> seen;
  auto h = g.header;
  for (std::uint64_t n = 0; n <= 10'000; ++n) {
    h.nonce = n;
    EXPECT_TRUE(seen.insert(hash_header(h)).second) << "collision at nonce " << n;
  }
}

TEST(Genesis, IdenticalAcrossNodesAndBoundToName) {
  EXPECT_EQ(block_hash(make_genesis("demo", 8)), block_hash(make_genesis("demo", 8)));
  EXPECT_NE(block_hash(make_genesis("demo", 8)), block_hash(make_genesis("demo2", 8)));
  EXPECT_THROW(make_genesis("demo", 33), Error);
  auto g = make_genesis("demo", 32);
  EXPECT_TRUE(g.header.prev_hash.is_zero());
  EXPECT_EQ(g.header.timestamp, 0);
  EXPECT_FALSE(validate_block(g, nullptr).has_value());
}

TEST(Signatures, RoundTripAndMutations) {
  auto key = key_from_index(1);
  auto tx = make_tx(key, "alice", "hello", 42);
  EXPECT_TRUE(verify_transaction(tx));

  for (std::size_t i = 0; i < tx.payload.size(); ++i) {
    auto bad = tx;
    bad.payload[i] ^= 0x01;
    EXPECT_FALSE(verify_transaction(bad));
  }
  auto bad_author = tx;
  bad_author.author[0] ^= 0x80;
  EXPECT_FALSE(verify_transaction(bad_author));
  auto bad_time = tx;
  bad_time.timestamp += 1;
  EXPECT_FALSE(verify_transaction(bad_time));
  auto bad_kind = tx;
  bad_kind.kind = TxKind::system;
  EXPECT_FALSE(verify_transaction(bad_kind));

  // Re-signed by someone else but claiming the original author.
  auto other = key_from_index(2);
  auto forged = tx;
  forged.author = other.public_key;
  EXPECT_FALSE(verify_transaction(forged));

  auto wrong_id = tx;
  wrong_id.id.bytes[0] ^= 1;
  EXPECT_FALSE(verify_transaction(wrong_id));
}

TEST(Signatures, MalformedKeyMaterial) {
  auto key = key_from_index(1);
  TransactionDraft d{TxKind::chat, key.public_key, "a", {}, 0};
  auto broken = key;
  broken.secret_key.resize(10);
  EXPECT_THROW(sign_transaction(d, broken), Error);
  TransactionDraft mismatched{TxKind::chat, key_from_index(3).public_key, "a", {}, 0};
  EXPECT_THROW(sign_transaction(mismatched, key), Error);
  EXPECT_THROW(crypto::SigningKeyPair::from_seed(Bytes(5)), Error);

  auto tx = make_tx(key, "a", "x", 1);
  tx.author.resize(7);
  EXPECT_FALSE(verify_transaction(tx));
}

TEST(Mining, DifficultyZeroSucceedsImmediately) {
  auto g = make_genesis("demo", 0);
  auto r = mine(g.header, 0, 12345, 1);
  ASSERT_TRUE(r.nonce);
  EXPECT_EQ(*r.nonce, 12345u);
  EXPECT_EQ(r.attempts, 1u);
  EXPECT_TRUE(try_nonce(g.header, 999).meets);
}

TEST(Mining, DifficultyEightGivesZeroFirstByteAndAgreesWithProbe) {
  auto state = make_chain("demo", 8);
  auto block = next_block_template(state, {}, 1000, "m");
  auto r = mine(block.header, 8, 0, 1u << 20);
  ASSERT_TRUE(r.nonce);
  EXPECT_EQ(r.digest.bytes[0], 0x00);
  auto probe = try_nonce(block.header, *r.nonce);
  EXPECT_TRUE(probe.meets);
  EXPECT_EQ(probe.digest, r.digest);
  // Sequential search: every earlier nonce fails.
  for (std::uint64_t n = 0; n < *r.nonce; ++n) EXPECT_FALSE(try_nonce(block.header, n).meets);
}

TEST(Mining, ExhaustionReported) {
  auto g = make_genesis("demo", 32);
  auto block = next_block_template(make_chain("demo", 32), {}, 5, "m");
  auto r = mine(block.header, 32, 0, 100);
  EXPECT_FALSE(r.nonce);
  EXPECT_EQ(r.attempts, 100u);
  EXPECT_THROW(mine(block.header, 8, 0, 0), Error);
}

TEST(Mining, ExhaustiveProbeFractionAtDifficultyFour) {
  auto block = next_block_template(make_chain("demo", 4), {}, 777, "m");
  std::size_t meets = 0;
  const std::size_t total = std::size_t{1} << 16;
  for (std::uint64_t n = 0; n < total; ++n) meets += try_nonce(block.header, n).meets;
  double fraction = static_cast<double>(meets) / total;
  EXPECT_GE(fraction, 1.0 / 16 * 0.8);
  EXPECT_LE(fraction, 1.0 / 16 * 1.2);
}

TEST(Validation, RulesNamed) {
  auto state = build_chain(2, 2);
  const auto &b1 = state.blocks[1];
  const auto &b2 = state.blocks[2];
  EXPECT_FALSE(validate_block(b2, &b1));

  auto other = build_chain(1, 1, 4, "other");
  auto v = validate_block(b2, &other.blocks[1]);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->name(), "prev-hash-mismatch");

  auto wrong_index = b2;
  wrong_index.header.index = 5;
  EXPECT_EQ(validate_block(wrong_index, &b1)->name(), "index-mismatch");

  auto unworked = mine_next(state, {}, 90'000);
  unworked.header.nonce += 1;
  while (leading_zero_bits(hash_header(unworked.header)) >= 4) unworked.header.nonce += 1;
  EXPECT_EQ(validate_block(unworked, &state.tip())->name(), "insufficient-work");

  auto at = [&](std::int64_t ts) {
    auto b = next_block_template(state, {}, 0, "m");
    b.header.timestamp = ts;
    b.header.nonce = *mine(b.header, 4, 0, 1u << 20).nonce;
    return b;
  };
  auto stale = at(state.tip().header.timestamp - 120'001);
  ASSERT_TRUE(validate_block(stale, &state.tip()));
  EXPECT_EQ(validate_block(stale, &state.tip())->name(), "timestamp-too-old");
  EXPECT_FALSE(validate_block(at(state.tip().header.timestamp - 120'000), &state.tip()));
}

TEST(Validation, TooManyTransactions) {
  auto state = make_chain("demo", 0);
  auto key = key_from_index(4);
  std::vector<Transaction> txs;
  for (int i = 0; i < 65; ++i) txs.push_back(make_tx(key, "k", "m" + std::to_string(i), i));
  auto b = mine_next(state, txs, 100);
  EXPECT_EQ(validate_block(b, &state.tip())->name(), "too-many-transactions");
  txs.pop_back();
  EXPECT_FALSE(validate_block(mine_next(state, txs, 100), &state.tip()));
}

TEST(Validation, EveryPayloadByteMutationOfThreeTxBlockCaught) {
  auto state = build_chain(1, 3);
  const auto &prev = state.blocks[0];
  const auto &block = state.blocks[1];
  ASSERT_FALSE(validate_block(block, &prev));
  std::size_t checked = 0;
  for (std::size_t t = 0; t < block.transactions.size(); ++t) {
    for (std::size_t i = 0; i < block.transactions[t].payload.size(); ++i) {
      for (std::uint8_t flip : {0x01, 0x80, 0xff}) {
        auto bad = block;
        bad.transactions[t].payload[i] ^= flip;
        auto v = validate_block(bad, &prev);
        ASSERT_TRUE(v) << "tx " << t << " byte " << i;
        EXPECT_TRUE(v->name() == "tx-root-mismatch" || v->name() == "invalid-transaction") << v->name();
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Validation, DuplicateTransactionAcrossBlocksRejected) {
  auto state = build_chain(1, 1, 0);
  auto replay = mine_next(state, state.blocks[1].transactions, 50'000);
  auto out = select_chain(state, std::span<const Block>(&replay, 1));
  EXPECT_FALSE(out.adopted);
  ASSERT_TRUE(out.violation);
  EXPECT_EQ(out.violation->name(), "duplicate-transaction");
}

TEST(Validation, DifficultyMustMatchChain) {
  auto state = make_chain("demo", 8);
  auto block = next_block_template(state, {}, 10, "cheater");
  block.header.difficulty = 0;
  EXPECT_EQ(validate_block(block, &state.tip())->name(), "difficulty-mismatch");
}

TEST(ForkChoice, LongerCandidateAdopted) {
  auto local = build_chain(4, 1);  // 5 blocks
  auto fork_base = local;
  fork_base.blocks.resize(2);
  fork_base.confirmed.clear();
  for (auto &b : fork_base.blocks)
    for (auto &tx : b.transactions) fork_base.confirmed[tx.id] = b.header.index;
  auto key = key_from_index(9);
  std::vector<Block> candidate;
  auto cursor = fork_base;
  for (int i = 0; i < 4; ++i) {
    auto b = mine_next(cursor, {make_tx(key, "bob", "fork " + std::to_string(i), 5000 + i)}, 60'000 + i);
    candidate.push_back(b);
    cursor = testing::append(cursor, b);
  }
  ASSERT_EQ(cursor.blocks.size(), 6u);

  auto out = select_chain(local, candidate);
  ASSERT_TRUE(out.adopted);
  EXPECT_EQ(out.state.blocks.size(), 6u);
  EXPECT_EQ(out.state.tip_hash(), cursor.tip_hash());
  // Abandoned transactions return to the mempool.
  EXPECT_EQ(out.abandoned.size(), 3u);
  EXPECT_EQ(out.state.mempool.size(), 3u);
  for (const auto &b : out.abandoned)
    for (const auto &tx : b.transactions) EXPECT_TRUE(out.state.mempool.contains(tx.id));
  for (const auto &[id, tx] : out.state.mempool) EXPECT_FALSE(out.state.confirmed.contains(id));

  // Pure and deterministic.
  auto again = select_chain(local, candidate);
  EXPECT_EQ(again.state, out.state);
}

TEST(ForkChoice, EqualLengthSmallerTipWins) {
  auto base = make_chain("demo", 4);
  auto a = mine_next(base, {}, 1000, "a");
  auto b = mine_next(base, {}, 1000, "b");
  ASSERT_NE(block_hash(a), block_hash(b));
  auto with_a = testing::append(base, a);
  auto with_b = testing::append(base, b);
  const auto &smaller = block_hash(a) < block_hash(b) ? a : b;
  const auto &larger = block_hash(a) < block_hash(b) ? b : a;

  auto from_larger = select_chain(block_hash(a) < block_hash(b) ? with_b : with_a, std::span<const Block>(&smaller, 1));
  EXPECT_TRUE(from_larger.adopted);
  auto from_smaller = select_chain(block_hash(a) < block_hash(b) ? with_a : with_b, std::span<const Block>(&larger, 1));
  EXPECT_FALSE(from_smaller.adopted);
  EXPECT_FALSE(from_smaller.violation);
}

TEST(ForkChoice, InvalidCandidateLeavesLocalUntouched) {
  auto local = build_chain(5, 0);
  auto base = local;
  base.blocks.resize(3);
  std::vector<Block> candidate;
  auto cursor = base;
  for (int i = 0; i < 4; ++i) {
    auto b = mine_next(cursor, {}, 70'000 + i, "forker");
    candidate.push_back(b);
    cursor = testing::append(cursor, b);
  }
  candidate[2].header.miner_nick = "tampered";
  auto out = select_chain(local, candidate);
  EXPECT_FALSE(out.adopted);
  ASSERT_TRUE(out.violation);
  EXPECT_EQ(out.state, local);
}

TEST(ForkChoice, CandidateMustAttach) {
  auto local = build_chain(2, 0);
  auto foreign = build_chain(3, 0, 4, "elsewhere");
  auto out = select_chain(local, std::span<const Block>(foreign.blocks).subspan(1));
  EXPECT_FALSE(out.adopted);
  ASSERT_TRUE(out.violation);
  auto full = select_chain(local, foreign.blocks);
  EXPECT_EQ(full.violation->name(), "genesis-mismatch");
}

TEST(Mempool, IdempotentAndOrdered) {
  auto state = make_chain("demo", 0);
  auto key = key_from_index(5);
  auto t3 = make_tx(key, "a", "three", 3);
  auto t1 = make_tx(key, "a", "one", 1);
  auto t2 = make_tx(key, "a", "two", 2);
  state = mempool_add(state, t3);
  state = mempool_add(state, t3);
  EXPECT_EQ(state.mempool.size(), 1u);
  state = mempool_add(mempool_add(state, t1), t2);
  auto drained = drain_for_block(state);
  ASSERT_EQ(drained.transactions.size(), 3u);
  EXPECT_EQ(drained.transactions[0].id, t1.id);
  EXPECT_EQ(drained.transactions[1].id, t2.id);
  EXPECT_EQ(drained.transactions[2].id, t3.id);
  EXPECT_TRUE(drained.state.mempool.empty());

  auto bad = t1;
  bad.payload.push_back(0);
  auto fresh = make_chain("demo", 0);
  EXPECT_THROW((void)mempool_add(fresh, bad), Error);
}

TEST(Mempool, CapAtSixtyFourAndDisjointFromChain) {
  auto state = make_chain("demo", 0);
  auto key = key_from_index(6);
  for (int i = 0; i < 70; ++i) state = mempool_add(state, make_tx(key, "a", "m" + std::to_string(i), i));
  auto drained = drain_for_block(state);
  EXPECT_EQ(drained.transactions.size(), 64u);
  EXPECT_EQ(drained.state.mempool.size(), 6u);

  auto block = mine_next(drained.state, drained.transactions, 100);
  auto next = testing::append(state, block);  // appended on the undrained state
  EXPECT_EQ(next.mempool.size(), 6u);
  for (const auto &[id, tx] : next.mempool) EXPECT_FALSE(next.confirmed.contains(id));
  // Confirmed ids are refused.
  auto again = mempool_add(next, block.transactions[0]);
  EXPECT_EQ(again.mempool.size(), 6u);
}

TEST(Serialization, BlockRoundTripProperty) {
  std::mt19937 rng(11);
  auto key = key_from_index(8);
  for (int trial = 0; trial < 50; ++trial) {
    Block b;
    b.header.index = rng();
    for (auto &x : b.header.prev_hash.bytes) x = static_cast<std::uint8_t>(rng());
    b.header.timestamp = static_cast<std::int64_t>(rng()) - (1 << 30);
    b.header.difficulty = rng() % 33;
    b.header.nonce = (std::uint64_t{rng()} << 32) | rng();
    b.header.miner_nick = std::string(rng() % 20, 'x');
    auto n = rng() % 5;
    for (unsigned i = 0; i < n; ++i)
      b.transactions.push_back(make_tx(key, "n" + std::to_string(i), std::string(rng() % 300, 'q'), rng()));
    b.header.tx_root = compute_tx_root(b.transactions);
    auto decoded = decode_block(encode_block(b));
    EXPECT_EQ(decoded, b);
  }
  auto raw = encode_block(build_chain(1, 1).blocks[1]);
  raw.pop_back();
  EXPECT_THROW(decode_block(raw), DecodeError);
}

TEST(Invariants, TamperEvidenceOnSmallChain) {
  auto state = build_chain(3, 2);
  ASSERT_FALSE(validate_chain(state.blocks));
  for (std::size_t k = 1; k < state.blocks.size(); ++k) {
    for (std::size_t t = 0; t < state.blocks[k].transactions.size(); ++t) {
      const auto len = state.blocks[k].transactions[t].payload.size();
      for (std::size_t i = 0; i < len; ++i) {
        auto blocks = state.blocks;
        blocks[k].transactions[t].payload[i] ^= 0x20;
        auto v = validate_chain(blocks);
        ASSERT_TRUE(v);
        EXPECT_EQ(v->block_index, k);
      }
    }
  }
}

}  // namespace
}  // namespace chunkchain
