// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// End-to-end record flow: untrusted power/clock bring-up, secure capture
// through the PTA, in-TEE obfuscation, staging to shared memory, and the
// normal-world supplicant relaying the result to the cloud. The outcome
// keeps both the secure-side truth and the supplicant's view so tests can
// prove the normal world never held plaintext.

#include <cstdint>
#include <string>

#include "fortress/pcm.hpp"
#include "fortress/platform.hpp"
#include "fortress/relay_cloud.hpp"

namespace fortress::pipeline {

struct RecordConfig {
  uint64_t frames = 0;  // 0 = the whole fixture
  bool via_dma = false;
  tee::ObfuscationPolicy policy;
  std::string cloud_host = "127.0.0.1";
  uint16_t cloud_port = 0;  // 0 = skip the relay leg
  int timeout_ms = relay::kDefaultTimeoutMs;
};

struct RecordOutcome {
  Bytes capture;         // secure-side raw bytes; never leaves the TEE
  tee::ObfuscatedPayload payload;
  Bytes wire;            // serialized payload staged to shared memory
  Bytes supplicant_view; // what the normal world read back from SHM
  uint32_t acked_length = 0;
  bool relayed = false;
  WorkCounters work;
};

/// Build the outbound payload inside the TEE. Crypto modes encrypt the
/// whole capture under a HUK-derived key; filter and convert reduce the
/// capture to grammar hits before anything leaves the secure world.
inline tee::ObfuscatedPayload build_payload(platform::Board& board,
                                            platform::TeeStack& stack,
                                            const pcm::PcmFixture& fixture,
                                            ByteSpan capture,
                                            const tee::ObfuscationPolicy& policy) {
  return board.ctx.call_secure([&](ProcessorContext&) {
    tee::ObfuscatedPayload p;
    switch (policy.mode) {
      case tee::ObfMode::Filter:
        p.mode = tee::ObfMode::Filter;
        p.body = tee::filter(pcm::labeled_segments(fixture, capture),
                             tee::keyword_grammar());
        break;
      case tee::ObfMode::Convert:
        p.mode = tee::ObfMode::Convert;
        p.body = tee::command_ids_to_bytes(
            tee::convert(pcm::labeled_segments(fixture, capture),
                         tee::keyword_command_map()));
        break;
      default: {
        crypto::AesKey key =
            stack.rt().derive_key(policy.key_context, World::Secure);
        p = stack.rt().obfuscate(policy, capture, key, stack.rt().fresh_nonce());
      }
    }
    return p;
  });
}

/// One full record run on an already-booted board.
inline RecordOutcome run_record(platform::Board& board, platform::TeeStack& stack,
                                const pcm::PcmFixture& fixture,
                                const RecordConfig& cfg) {
  RecordOutcome out;
  WorkCounters before = board.fabric.counters_snapshot();

  UntrustedDriver untrusted(board.fabric, platform::kClockBase);
  untrusted.power_set(PowerLevel::Full);
  untrusted.clock_enable();
  board.i2s.attach_source(pcm::device_words(fixture));

  tee::Session session = stack.open_session();
  const uint64_t frames = cfg.frames ? cfg.frames : fixture.samples.size();
  out.capture = stack.capture(session, frames, cfg.via_dma);
  out.payload = build_payload(board, stack, fixture, out.capture, cfg.policy);
  out.wire = tee::serialize_payload(out.payload);

  // Secure kernel stages length + payload into the supplicant's SHM.
  board.ctx.call_secure([&](ProcessorContext&) {
    Bytes staged;
    put_u32_be(staged, static_cast<uint32_t>(out.wire.size()));
    staged.insert(staged.end(), out.wire.begin(), out.wire.end());
    board.fabric.mem_write(platform::kShmBase, staged);
  });

  // Normal-world supplicant picks the payload up and pushes it out.
  Bytes len_raw = board.fabric.mem_read(platform::kShmBase, 4);
  uint32_t staged_len = get_u32_be(len_raw);
  out.supplicant_view = board.fabric.mem_read(platform::kShmBase + 4, staged_len);
  if (cfg.cloud_port != 0) {
    out.acked_length = relay::relay_bytes(out.supplicant_view, cfg.cloud_host,
                                          cfg.cloud_port, cfg.timeout_ms);
    out.relayed = true;
  }

  stack.rt().close_session(session);
  untrusted.clock_disable();
  untrusted.cleanup();
  out.work = board.fabric.counters_snapshot() - before;
  return out;
}

}  // namespace fortress::pipeline
