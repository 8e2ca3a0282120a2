// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Trusted-application runtime: sessions bound to pseudo-TA dispatch tables,
// the four-step checked invocation crossing S-EL0 to S-EL1, key derivation
// from the hardware-unique key, obfuscation policies over captured audio,
// and GCM-sealed storage.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fortress/bytes.hpp"
#include "fortress/crypto.hpp"
#include "fortress/errors.hpp"
#include "fortress/mem_fabric.hpp"

namespace fortress::tee {

using Uuid = std::array<uint8_t, 16>;

enum class ParamDir : uint8_t { In, Out, InOut };

/// GlobalPlatform-style invocation parameter: a pair of 64-bit values or a
/// memory reference into the TA's private range.
struct TeeParam {
  enum class Kind : uint8_t { Value, MemRef };

  Kind kind = Kind::Value;
  uint64_t a = 0;
  uint64_t b = 0;
  uint64_t base = 0;
  uint64_t len = 0;
  ParamDir dir = ParamDir::In;

  static TeeParam value(uint64_t a, uint64_t b) {
    TeeParam p;
    p.kind = Kind::Value;
    p.a = a;
    p.b = b;
    return p;
  }
  static TeeParam memref(uint64_t base, uint64_t len, ParamDir dir) {
    TeeParam p;
    p.kind = Kind::MemRef;
    p.base = base;
    p.len = len;
    p.dir = dir;
    return p;
  }
};

using TeeParamList = std::vector<TeeParam>;

/// Kernel-side view of one parameter during dispatch: values are mutable,
/// memrefs expose their staging buffer.
struct StagedParam {
  TeeParam::Kind kind = TeeParam::Kind::Value;
  ParamDir dir = ParamDir::In;
  uint64_t a = 0;
  uint64_t b = 0;
  uint64_t declared_len = 0;
  Bytes buf;
};

using PtaHandler = std::function<void(std::vector<StagedParam>&)>;

struct Session {
  uint64_t id = 0;
  Uuid uuid{};
};

// ------------------------------------------------------------ obfuscation

enum class ObfMode : uint8_t {
  AesEcb = 0,
  AesCbc = 1,
  AesCtr = 2,
  AesGcm = 3,
  Filter = 4,
  Convert = 5,
};

inline const char* to_string(ObfMode m) {
  switch (m) {
    case ObfMode::AesEcb: return "ecb";
    case ObfMode::AesCbc: return "cbc";
    case ObfMode::AesCtr: return "ctr";
    case ObfMode::AesGcm: return "gcm";
    case ObfMode::Filter: return "filter";
    case ObfMode::Convert: return "convert";
  }
  return "?";
}

inline ObfMode obf_mode_from_string(const std::string& s) {
  if (s == "ecb") return ObfMode::AesEcb;
  if (s == "cbc") return ObfMode::AesCbc;
  if (s == "ctr") return ObfMode::AesCtr;
  if (s == "gcm") return ObfMode::AesGcm;
  if (s == "filter") return ObfMode::Filter;
  if (s == "convert") return ObfMode::Convert;
  throw Error("unknown obfuscation mode '" + s + "'");
}

struct ObfuscationPolicy {
  ObfMode mode = ObfMode::AesGcm;
  std::string key_context = "payload";
};

/// Framed obfuscation result. The nonce is zero for ECB/Filter/Convert and
/// the tag is zero unless GCM.
struct ObfuscatedPayload {
  ObfMode mode = ObfMode::AesGcm;
  crypto::Nonce nonce{};
  crypto::Tag tag{};
  Bytes body;

  bool operator==(const ObfuscatedPayload&) const = default;
};

/// Wire form: mode u8 | nonce 16 | tag 16 | body.
inline Bytes serialize_payload(const ObfuscatedPayload& p) {
  Bytes out;
  out.reserve(33 + p.body.size());
  out.push_back(static_cast<uint8_t>(p.mode));
  out.insert(out.end(), p.nonce.begin(), p.nonce.end());
  out.insert(out.end(), p.tag.begin(), p.tag.end());
  out.insert(out.end(), p.body.begin(), p.body.end());
  return out;
}

inline ObfuscatedPayload parse_payload(ByteSpan raw) {
  if (raw.size() < 33) throw CorruptPayload("payload shorter than its header");
  if (raw[0] > static_cast<uint8_t>(ObfMode::Convert))
    throw CorruptPayload("unknown mode tag");
  ObfuscatedPayload p;
  p.mode = static_cast<ObfMode>(raw[0]);
  std::copy(raw.begin() + 1, raw.begin() + 17, p.nonce.begin());
  std::copy(raw.begin() + 17, raw.begin() + 33, p.tag.begin());
  p.body.assign(raw.begin() + 33, raw.end());
  return p;
}

/// Block padding where every pad byte equals the pad length; aligned input
/// gains a full block so unpadding is unambiguous.
inline Bytes block_pad(ByteSpan data, size_t block = 16) {
  size_t pad = block - data.size() % block;
  Bytes out(data.begin(), data.end());
  out.insert(out.end(), pad, static_cast<uint8_t>(pad));
  return out;
}

inline Bytes block_unpad(ByteSpan data, size_t block = 16) {
  if (data.empty() || data.size() % block != 0)
    throw CorruptPayload("padded data not block aligned");
  uint8_t pad = data.back();
  if (pad == 0 || pad > block) throw CorruptPayload("bad padding length");
  for (size_t k = data.size() - pad; k < data.size(); ++k)
    if (data[k] != pad) throw CorruptPayload("inconsistent padding bytes");
  return Bytes(data.begin(), data.end() - pad);
}

// --------------------------------------------------------- filter/convert

using LabeledSegments = std::vector<std::pair<std::string, Bytes>>;

/// Keep only segments whose label the grammar recognizes.
inline Bytes filter(const LabeledSegments& segments,
                    const std::set<std::string>& grammar) {
  Bytes out;
  for (const auto& [label, bytes] : segments)
    if (grammar.contains(label)) out.insert(out.end(), bytes.begin(), bytes.end());
  return out;
}

/// Map recognized labels to command ids, dropping everything else; raw
/// segment bytes are never forwarded.
inline std::vector<uint32_t> convert(const LabeledSegments& segments,
                                     const std::map<std::string, uint32_t>& command_map) {
  std::vector<uint32_t> out;
  for (const auto& [label, bytes] : segments) {
    auto it = command_map.find(label);
    if (it != command_map.end()) out.push_back(it->second);
  }
  return out;
}

/// The fixed home-automation keyword grammar.
inline const std::map<std::string, uint32_t>& keyword_command_map() {
  static const std::map<std::string, uint32_t> map = {
      {"lights_on", 1},  {"lights_off", 2}, {"lock_door", 3},
      {"unlock_door", 4}, {"temp_up", 5},    {"temp_down", 6},
      {"alarm_arm", 7},  {"alarm_off", 8},
  };
  return map;
}

inline std::set<std::string> keyword_grammar() {
  std::set<std::string> g;
  for (const auto& kv : keyword_command_map()) g.insert(kv.first);
  return g;
}

inline Bytes command_ids_to_bytes(const std::vector<uint32_t>& ids) {
  Bytes out;
  for (uint32_t id : ids) put_u32_be(out, id);
  return out;
}

// ----------------------------------------------------------- the runtime

inline constexpr char kSealMagic[5] = {'F', 'S', 'E', 'A', 'L'};

/// S-EL1 runtime: PTA registry, sessions, the checked invocation path, HUK
/// key derivation, obfuscation and sealed storage.
class TeeRuntime {
 public:
  TeeRuntime(MemFabric& fabric, std::array<uint8_t, 32> huk, uint64_t ta_base,
             uint64_t ta_size, uint64_t rng_seed = 1)
      : fabric_(fabric), huk_(huk), ta_base_(ta_base), ta_size_(ta_size),
        rng_(rng_seed) {}

  TeeRuntime(const TeeRuntime&) = delete;
  TeeRuntime& operator=(const TeeRuntime&) = delete;

  MemFabric& fabric() { return fabric_; }
  uint64_t ta_base() const { return ta_base_; }
  uint64_t ta_size() const { return ta_size_; }

  // -------------------------------------------------------------- PTAs

  void register_pta(const Uuid& uuid, std::string name) {
    ptas_[uuid].name = std::move(name);
  }

  void register_command(const Uuid& uuid, uint32_t cmd, PtaHandler handler) {
    auto it = ptas_.find(uuid);
    if (it == ptas_.end()) throw UnknownUuid("register_command on unknown PTA");
    it->second.commands[cmd] = std::move(handler);
  }

  // ----------------------------------------------------------- sessions

  Session open_session(const Uuid& uuid) {
    if (!ptas_.contains(uuid))
      throw UnknownUuid("no PTA registered for uuid " + to_hex(uuid));
    fabric_.counters().secure_syscalls += 1;
    Session s{next_session_id_++, uuid};
    sessions_[s.id] = SessionState{uuid, true};
    return s;
  }

  void close_session(const Session& s) {
    auto it = sessions_.find(s.id);
    if (it != sessions_.end()) it->second.open = false;
  }

  bool is_open(const Session& s) const {
    auto it = sessions_.find(s.id);
    return it != sessions_.end() && it->second.open;
  }

  /// The four-step checked invocation:
  ///  (1) every MemRef is validated against the TA's private range;
  ///  (2) in-direction buffers and all value params are staged into the
  ///      secure kernel, counted as copy work;
  ///  (3) the PTA routine runs, charged as one secure syscall plus one
  ///      world-internal switch;
  ///  (4) results are copied back into out-direction MemRefs.
  /// A step-1 failure aborts before anything is staged or dispatched.
  TeeParamList invoke_command(const Session& sess, uint32_t cmd,
                              TeeParamList params) {
    auto sit = sessions_.find(sess.id);
    if (sit == sessions_.end() || !sit->second.open)
      throw SessionClosed("invoke on closed session");
    if (params.size() > 4)
      throw BadParamRange("parameter list longer than 4 entries");
    WorkCounters& counters = fabric_.counters();

    for (const TeeParam& p : params) {
      if (p.kind != TeeParam::Kind::MemRef) continue;
      counters.access_checks += 1;
      const uint64_t end = p.base + p.len;
      if (end < p.base || p.base < ta_base_ || end > ta_base_ + ta_size_)
        throw BadParamRange("MemRef outside the TA memory range");
    }

    std::vector<StagedParam> staged(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      const TeeParam& p = params[i];
      StagedParam& s = staged[i];
      s.kind = p.kind;
      s.dir = p.dir;
      if (p.kind == TeeParam::Kind::Value) {
        s.a = p.a;
        s.b = p.b;
        counters.bytes_copied += 16;  // values are staged uniformly
      } else {
        s.declared_len = p.len;
        if (p.dir != ParamDir::Out) {
          s.buf = fabric_.read_bytes(p.base, p.len);
          counters.bytes_copied += p.len;
        }
      }
    }

    counters.secure_syscalls += 1;
    counters.world_switches += 1;  // S-EL0 -> S-EL1
    auto& table = ptas_.at(sit->second.uuid).commands;
    auto hit = table.find(cmd);
    if (hit == table.end())
      throw UnknownCommand("command " + std::to_string(cmd));
    hit->second(staged);

    for (size_t i = 0; i < params.size(); ++i) {
      TeeParam& p = params[i];
      StagedParam& s = staged[i];
      if (p.kind == TeeParam::Kind::Value) {
        p.a = s.a;
        p.b = s.b;
        continue;
      }
      if (p.dir == ParamDir::In) continue;
      s.buf.resize(s.declared_len, 0);
      fabric_.write_bytes(p.base, s.buf);
      counters.bytes_copied += s.declared_len;
    }
    return params;
  }

  /// Secure-kernel copy of driver-held bytes into a staging buffer;
  /// charged as one check plus the byte count. The first half of the
  /// invocation path's double copy.
  void stage_copy(StagedParam& dst, ByteSpan data) {
    fabric_.counters().access_checks += 1;
    fabric_.counters().bytes_copied += data.size();
    dst.buf.assign(data.begin(), data.end());
  }

  // ------------------------------------------------------- key derivation

  /// First 16 bytes of HMAC-SHA-256(HUK, world byte || context). The fuse
  /// block is secure-world-only; the world argument selects the REE/TEE
  /// derivation personality.
  crypto::AesKey derive_key(const std::string& context, World tag_world) {
    if (fabric_.ctx().world() != World::Secure)
      throw HukUnavailable("HUK fuses are not readable from the normal world");
    Bytes msg;
    msg.push_back(tag_world == World::Secure ? 0x01 : 0x00);
    msg.insert(msg.end(), context.begin(), context.end());
    crypto::Digest d = crypto::hmac_sha256(huk_, msg);
    crypto::AesKey key;
    std::copy(d.begin(), d.begin() + key.size(), key.begin());
    return key;
  }

  // --------------------------------------------------------- obfuscation

  crypto::Nonce fresh_nonce() {
    crypto::Nonce n;
    for (auto& b : n) b = static_cast<uint8_t>(rng_());
    return n;
  }

  ObfuscatedPayload obfuscate(const ObfuscationPolicy& policy, ByteSpan plaintext,
                              const crypto::AesKey& key, const crypto::Nonce& nonce) {
    ObfuscatedPayload out;
    out.mode = policy.mode;
    switch (policy.mode) {
      case ObfMode::AesEcb:
        out.body = crypto::aes128_ecb(true, key, block_pad(plaintext));
        break;
      case ObfMode::AesCbc:
        out.nonce = nonce;
        out.body = crypto::aes128_cbc(true, key, nonce, block_pad(plaintext));
        break;
      case ObfMode::AesCtr:
        out.nonce = nonce;
        out.body = crypto::aes128_ctr(true, key, nonce, plaintext);
        break;
      case ObfMode::AesGcm: {
        if (!gcm_nonces_[key].insert(nonce).second)
          throw BadNonceReuse("GCM nonce reused under the same key");
        out.nonce = nonce;
        crypto::GcmSealed sealed = crypto::aes128_gcm_encrypt(key, nonce, plaintext);
        out.body = std::move(sealed.ciphertext);
        out.tag = sealed.tag;
        break;
      }
      case ObfMode::Filter:
      case ObfMode::Convert:
        throw Error("filter/convert payloads are built from labeled segments");
    }
    return out;
  }

  Bytes deobfuscate(const ObfuscatedPayload& payload, const crypto::AesKey& key) {
    switch (payload.mode) {
      case ObfMode::AesEcb:
        return block_unpad(crypto::aes128_ecb(false, key, payload.body));
      case ObfMode::AesCbc:
        return block_unpad(
            crypto::aes128_cbc(false, key, payload.nonce, payload.body));
      case ObfMode::AesCtr:
        return crypto::aes128_ctr(false, key, payload.nonce, payload.body);
      case ObfMode::AesGcm: {
        auto pt = crypto::aes128_gcm_decrypt(key, payload.nonce, payload.body,
                                             payload.tag);
        if (!pt) throw TagMismatch("GCM authentication failed");
        return std::move(*pt);
      }
      case ObfMode::Filter:
      case ObfMode::Convert:
        break;
    }
    throw CorruptPayload("deobfuscate requires a crypto mode payload");
  }

  // ------------------------------------------------------- sealed storage

  /// FSEAL: magic | context_len u8 | context | nonce 16 | tag 16 |
  /// ciphertext. The sealing key derives from the context string.
  Bytes seal(ByteSpan blob, const std::string& context) {
    if (context.size() > 255) throw Error("seal context longer than 255 bytes");
    crypto::AesKey key = derive_key(context, World::Secure);
    crypto::Nonce nonce = fresh_nonce();
    crypto::GcmSealed sealed = crypto::aes128_gcm_encrypt(key, nonce, blob);
    Bytes out;
    out.insert(out.end(), kSealMagic, kSealMagic + 5);
    out.push_back(static_cast<uint8_t>(context.size()));
    out.insert(out.end(), context.begin(), context.end());
    out.insert(out.end(), nonce.begin(), nonce.end());
    out.insert(out.end(), sealed.tag.begin(), sealed.tag.end());
    out.insert(out.end(), sealed.ciphertext.begin(), sealed.ciphertext.end());
    return out;
  }

  /// Unseal with the caller's context; the key never depends on the label
  /// recorded in the blob, so a wrong context fails authentication.
  Bytes unseal(ByteSpan sealed, const std::string& context) {
    if (sealed.size() < 6 || !std::equal(kSealMagic, kSealMagic + 5, sealed.begin()))
      throw CorruptPayload("bad FSEAL magic");
    size_t ctx_len = sealed[5];
    size_t header = 6 + ctx_len + 16 + 16;
    if (sealed.size() < header) throw CorruptPayload("truncated FSEAL blob");
    crypto::Nonce nonce;
    crypto::Tag tag;
    std::copy(sealed.begin() + 6 + ctx_len, sealed.begin() + 6 + ctx_len + 16,
              nonce.begin());
    std::copy(sealed.begin() + 6 + ctx_len + 16, sealed.begin() + header,
              tag.begin());
    Bytes ct(sealed.begin() + header, sealed.end());
    crypto::AesKey key = derive_key(context, World::Secure);
    auto pt = crypto::aes128_gcm_decrypt(key, nonce, ct, tag);
    if (!pt) throw TagMismatch("FSEAL authentication failed");
    return std::move(*pt);
  }

 private:
  struct Pta {
    std::string name;
    std::map<uint32_t, PtaHandler> commands;
  };
  struct SessionState {
    Uuid uuid{};
    bool open = false;
  };

  MemFabric& fabric_;
  std::array<uint8_t, 32> huk_;
  uint64_t ta_base_;
  uint64_t ta_size_;
  std::mt19937_64 rng_;
  std::map<Uuid, Pta> ptas_;
  std::map<uint64_t, SessionState> sessions_;
  uint64_t next_session_id_ = 1;
  std::map<crypto::AesKey, std::set<crypto::Nonce>> gcm_nonces_;
};

}  // namespace fortress::tee
