#pragma once

#include <sodium.h>

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "chunkchain/ledger/bytes.hpp"

namespace chunkchain::crypto {

inline void ensure_initialized() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw Error("libsodium failed to initialize");
}

inline Digest sha256(ByteView data) {
  ensure_initialized();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
  return d;
}

inline Digest sha256(std::string_view text) { return sha256(as_bytes(text)); }

inline void random_fill(std::span<std::uint8_t> out) {
  ensure_initialized();
  randombytes_buf(out.data(), out.size());
}

inline std::string random_token(std::size_t n_bytes = 16) {
  Bytes raw(n_bytes);
  random_fill(raw);
  return to_hex(raw);
}

constexpr std::size_t kPublicKeyBytes = crypto_sign_PUBLICKEYBYTES;
constexpr std::size_t kSecretKeyBytes = crypto_sign_SECRETKEYBYTES;
constexpr std::size_t kSeedBytes = crypto_sign_SEEDBYTES;
constexpr std::size_t kSignatureBytes = crypto_sign_BYTES;

/// Ed25519 signing key pair. The secret half never leaves the node.
struct SigningKeyPair {
  Bytes public_key;
  Bytes secret_key;

  static SigningKeyPair generate() {
    ensure_initialized();
    SigningKeyPair kp{Bytes(kPublicKeyBytes), Bytes(kSecretKeyBytes)};
    crypto_sign_keypair(kp.public_key.data(), kp.secret_key.data());
    return kp;
  }

  static SigningKeyPair from_seed(ByteView seed) {
    ensure_initialized();
    if (seed.size() != kSeedBytes) throw Error("signing seed must be 32 bytes");
    SigningKeyPair kp{Bytes(kPublicKeyBytes), Bytes(kSecretKeyBytes)};
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
    return kp;
  }
};

inline Bytes sign(ByteView message, ByteView secret_key) {
  ensure_initialized();
  if (secret_key.size() != kSecretKeyBytes) throw Error("malformed secret key");
  Bytes sig(kSignatureBytes);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_key.data());
  return sig;
}

inline bool verify(ByteView message, ByteView signature, ByteView public_key) {
  ensure_initialized();
  if (signature.size() != kSignatureBytes || public_key.size() != kPublicKeyBytes) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     public_key.data()) == 0;
}

constexpr std::size_t kNonceBytes = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
constexpr std::size_t kTagBytes = crypto_aead_xchacha20poly1305_ietf_ABYTES;

/// Symmetric key shared by every node of one classroom.
struct ClassroomKey {
  std::array<std::uint8_t, crypto_aead_xchacha20poly1305_ietf_KEYBYTES> bytes{};
};

enum class KdfCost { interactive, minimal };

/// Derives the classroom key from the teacher's passphrase. The salt is bound
/// to the classroom name so equal passphrases in different classrooms differ.
inline ClassroomKey derive_classroom_key(std::string_view passphrase, std::string_view classroom_name,
                                         KdfCost cost = KdfCost::interactive) {
  ensure_initialized();
  std::string salt_input = "chunkchain/classroom/";
  salt_input.append(classroom_name);
  auto salt = sha256(salt_input);
  static_assert(crypto_pwhash_SALTBYTES <= 32);

  auto ops = cost == KdfCost::interactive ? crypto_pwhash_OPSLIMIT_INTERACTIVE : crypto_pwhash_OPSLIMIT_MIN;
  auto mem = cost == KdfCost::interactive ? crypto_pwhash_MEMLIMIT_INTERACTIVE : crypto_pwhash_MEMLIMIT_MIN;
  ClassroomKey key;
  if (crypto_pwhash(key.bytes.data(), key.bytes.size(), passphrase.data(), passphrase.size(),
                    salt.bytes.data(), ops, mem, crypto_pwhash_ALG_ARGON2ID13) != 0) {
    throw Error("classroom key derivation ran out of memory");
  }
  return key;
}

/// Returns nonce || ciphertext || tag.
inline Bytes seal(const ClassroomKey &key, std::string_view plaintext, ByteView nonce) {
  ensure_initialized();
  if (nonce.size() != kNonceBytes) throw Error("cipher nonce must be 24 bytes");
  Bytes out(kNonceBytes + plaintext.size() + kTagBytes);
  std::copy(nonce.begin(), nonce.end(), out.begin());
  unsigned long long written = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      out.data() + kNonceBytes, &written, reinterpret_cast<const unsigned char *>(plaintext.data()),
      plaintext.size(), nullptr, 0, nullptr, nonce.data(), key.bytes.data());
  out.resize(kNonceBytes + written);
  return out;
}

inline Bytes seal(const ClassroomKey &key, std::string_view plaintext) {
  Bytes nonce(kNonceBytes);
  random_fill(nonce);
  return seal(key, plaintext, nonce);
}

/// nullopt when the payload was sealed under a different key or was altered.
inline std::optional<std::string> open(const ClassroomKey &key, ByteView sealed) {
  ensure_initialized();
  if (sealed.size() < kNonceBytes + kTagBytes) return std::nullopt;
  std::string plain(sealed.size() - kNonceBytes - kTagBytes, '\0');
  unsigned long long written = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(
          reinterpret_cast<unsigned char *>(plain.data()), &written, nullptr,
          sealed.data() + kNonceBytes, sealed.size() - kNonceBytes, nullptr, 0, sealed.data(),
          key.bytes.data()) != 0) {
    return std::nullopt;
  }
  plain.resize(written);
  return plain;
}

}  // namespace chunkchain::crypto
