#pragma once

// Embedded copy of share/missions/default.json so the node runs without any
// data files. Keep the two in sync (checked by missions_test).

namespace chunkchain::missions {

inline constexpr const char *kDefaultPackJson = R"pack({
  "version": 1,
  "classroom": {
    "title": "Blockchain chat: first steps",
    "language": "en"
  },
  "missions": [
    {
      "id": "lo1-distributed",
      "level": 1,
      "kind": "quiz",
      "prompt": "Our chat has no central server that owns the messages. Every computer keeps its own copy. What do we call this kind of system?",
      "quiz": {
        "choices": [
          "A client-server system",
          "A distributed system",
          "A single point of truth on one machine",
          "A backup system"
        ],
        "correct_index": 1
      }
    },
    {
      "id": "lo2-integrity",
      "level": 1,
      "kind": "quiz",
      "prompt": "Someone secretly changes one letter of an old message in block 3. Why will every other computer notice?",
      "quiz": {
        "choices": [
          "The teacher checks all messages by hand",
          "The hash of block 3 changes, so it no longer matches the link stored in block 4",
          "Old messages are deleted automatically",
          "Nobody will ever notice"
        ],
        "correct_index": 1
      }
    },
    {
      "id": "lo3-concept",
      "level": 1,
      "kind": "quiz",
      "prompt": "What is a blockchain, in one sentence?",
      "quiz": {
        "choices": [
          "A list of blocks where each block stores the hash of the block before it, shared by many computers",
          "A single encrypted file on the teacher's laptop",
          "A cryptocurrency wallet",
          "A chat app with passwords"
        ],
        "correct_index": 0
      }
    },
    {
      "id": "lo4-legal",
      "level": 1,
      "kind": "quiz",
      "prompt": "Data written to a blockchain cannot be deleted later. Which legal topic does this touch?",
      "quiz": {
        "choices": [
          "Speed limits",
          "The right to have personal data erased (privacy law)",
          "Copyright of fonts",
          "None, blockchains are outside the law"
        ],
        "correct_index": 1
      }
    },
    {
      "id": "act-post",
      "level": 2,
      "kind": "action",
      "prompt": "Send a chat message and watch it travel: it waits as 'pending' until a miner puts it into a block.",
      "action_event": "posted_message"
    },
    {
      "id": "act-inspect-tx",
      "level": 2,
      "kind": "action",
      "prompt": "Open a transaction in the explorer. Find its hash, its signature, and the encrypted payload that protects your message.",
      "action_event": "viewed_transaction"
    },
    {
      "id": "act-inspect-chain",
      "level": 2,
      "kind": "action",
      "prompt": "Open a block in the explorer and follow its prev_hash link back to the block before it. This is how the chain evolves.",
      "action_event": "viewed_block"
    },
    {
      "id": "act-mine",
      "level": 2,
      "kind": "action",
      "prompt": "Become a miner: try nonces until the block hash starts with two zeros (8 zero bits).",
      "action_event": "manual_nonce_found"
    }
  ]
}
)pack";

}  // namespace chunkchain::missions
