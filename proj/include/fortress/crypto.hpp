// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Thin wrappers over OpenSSL's EVP interface for the primitives the
// simulator needs: SHA-256, HMAC-SHA-256, Ed25519 signatures, and the four
// AES-128 modes. Padding policy lives with the callers; everything here is
// raw-block.

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <array>
#include <memory>
#include <optional>

#include "fortress/bytes.hpp"
#include "fortress/errors.hpp"

namespace fortress::crypto {

using Digest = std::array<uint8_t, 32>;
using AesKey = std::array<uint8_t, 16>;
using Nonce = std::array<uint8_t, 16>;
using Tag = std::array<uint8_t, 16>;

inline Digest sha256(ByteSpan data) {
  Digest out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

inline Digest hmac_sha256(ByteSpan key, ByteSpan msg) {
  Digest out{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(),
       msg.size(), out.data(), &len);
  return out;
}

// ---------------------------------------------------------------- ed25519

constexpr size_t kEd25519SeedSize = 32;
constexpr size_t kEd25519PublicSize = 32;
constexpr size_t kEd25519SigSize = 64;

namespace detail {
struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;
}  // namespace detail

inline Bytes ed25519_public_key(ByteSpan seed) {
  if (seed.size() != kEd25519SeedSize) throw MalformedKey("ed25519 seed must be 32 bytes");
  detail::PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                                   seed.data(), seed.size()));
  if (!key) throw MalformedKey("ed25519 key rejected");
  Bytes pub(kEd25519PublicSize);
  size_t len = pub.size();
  if (EVP_PKEY_get_raw_public_key(key.get(), pub.data(), &len) != 1 ||
      len != kEd25519PublicSize) {
    throw MalformedKey("ed25519 public key extraction failed");
  }
  return pub;
}

inline Bytes ed25519_sign(ByteSpan seed, ByteSpan msg) {
  if (seed.size() != kEd25519SeedSize) throw MalformedKey("ed25519 seed must be 32 bytes");
  detail::PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                                   seed.data(), seed.size()));
  if (!key) throw MalformedKey("ed25519 key rejected");
  detail::MdCtxPtr ctx(EVP_MD_CTX_new());
  if (EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1)
    throw Error("DigestSignInit failed");
  Bytes sig(kEd25519SigSize);
  size_t siglen = sig.size();
  if (EVP_DigestSign(ctx.get(), sig.data(), &siglen, msg.data(), msg.size()) != 1 ||
      siglen != kEd25519SigSize) {
    throw Error("ed25519 signing failed");
  }
  return sig;
}

inline bool ed25519_verify(ByteSpan pub, ByteSpan msg, ByteSpan sig) {
  if (pub.size() != kEd25519PublicSize || sig.size() != kEd25519SigSize) return false;
  detail::PkeyPtr key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr,
                                                  pub.data(), pub.size()));
  if (!key) return false;
  detail::MdCtxPtr ctx(EVP_MD_CTX_new());
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1)
    return false;
  return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), msg.data(),
                          msg.size()) == 1;
}

// ---------------------------------------------------------------- AES-128

namespace detail {

inline Bytes evp_run(const EVP_CIPHER* cipher, bool encrypt, ByteSpan key,
                     const uint8_t* iv, ByteSpan in) {
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (EVP_CipherInit_ex(ctx.get(), cipher, nullptr, key.data(), iv,
                        encrypt ? 1 : 0) != 1)
    throw Error("cipher init failed");
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  Bytes out(in.size() + 16);
  int len = 0, fin = 0;
  if (EVP_CipherUpdate(ctx.get(), out.data(), &len, in.data(),
                       static_cast<int>(in.size())) != 1)
    throw Error("cipher update failed");
  if (EVP_CipherFinal_ex(ctx.get(), out.data() + len, &fin) != 1)
    throw Error("cipher final failed");
  out.resize(static_cast<size_t>(len + fin));
  return out;
}

}  // namespace detail

inline Bytes aes128_ecb(bool encrypt, const AesKey& key, ByteSpan data) {
  if (data.size() % 16 != 0) throw Error("ecb input must be block aligned");
  return detail::evp_run(EVP_aes_128_ecb(), encrypt, ByteSpan(key), nullptr, data);
}

inline Bytes aes128_cbc(bool encrypt, const AesKey& key, const Nonce& iv, ByteSpan data) {
  if (data.size() % 16 != 0) throw Error("cbc input must be block aligned");
  return detail::evp_run(EVP_aes_128_cbc(), encrypt, ByteSpan(key), iv.data(), data);
}

inline Bytes aes128_ctr(bool encrypt, const AesKey& key, const Nonce& iv, ByteSpan data) {
  return detail::evp_run(EVP_aes_128_ctr(), encrypt, ByteSpan(key), iv.data(), data);
}

struct GcmSealed {
  Bytes ciphertext;
  Tag tag{};
};

/// AES-128-GCM with the full 16-byte IV (the non-96-bit-IV derivation of the
/// initial counter block).
inline GcmSealed aes128_gcm_encrypt(const AesKey& key, const Nonce& iv, ByteSpan pt) {
  detail::CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1)
    throw Error("gcm init failed");
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(iv.size()), nullptr);
  if (EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), iv.data()) != 1)
    throw Error("gcm key/iv init failed");
  GcmSealed out;
  out.ciphertext.resize(pt.size());
  int len = 0, fin = 0;
  if (!pt.empty() &&
      EVP_EncryptUpdate(ctx.get(), out.ciphertext.data(), &len, pt.data(),
                        static_cast<int>(pt.size())) != 1)
    throw Error("gcm update failed");
  if (EVP_EncryptFinal_ex(ctx.get(), out.ciphertext.data() + len, &fin) != 1)
    throw Error("gcm final failed");
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16, out.tag.data());
  return out;
}

/// Returns the plaintext only if the tag verifies; nullopt on any mismatch.
inline std::optional<Bytes> aes128_gcm_decrypt(const AesKey& key, const Nonce& iv,
                                               ByteSpan ct, const Tag& tag) {
  detail::CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1)
    throw Error("gcm init failed");
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(iv.size()), nullptr);
  if (EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), iv.data()) != 1)
    throw Error("gcm key/iv init failed");
  Bytes pt(ct.size());
  int len = 0, fin = 0;
  if (!ct.empty() &&
      EVP_DecryptUpdate(ctx.get(), pt.data(), &len, ct.data(),
                        static_cast<int>(ct.size())) != 1)
    return std::nullopt;
  Tag tag_copy = tag;
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, tag_copy.data());
  if (EVP_DecryptFinal_ex(ctx.get(), pt.data() + len, &fin) != 1)
    return std::nullopt;
  pt.resize(static_cast<size_t>(len + fin));
  return pt;
}

}  // namespace fortress::crypto
