// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Disciplined measurements over the model: world-parity of MMIO work,
// the copy-cost ladder from plain memcpy up to a full checked invocation,
// and wall-clock ordering of the AES obfuscation modes.

#include <chrono>
#include <cstdint>
#include <random>
#include <vector>

#include "fortress/crypto.hpp"
#include "fortress/pipeline.hpp"
#include "fortress/platform.hpp"

namespace fortress::bench {

struct MmioParity {
  int repeats = 0;
  WorkCounters normal_delta;
  WorkCounters secure_delta;
  bool equal = false;
};

/// The same register write+read pair, first from the normal world, then
/// from the secure world. The fabric's charging model is world-blind.
inline MmioParity mmio_parity(platform::Board& board, int repeats = 16) {
  const uint64_t addr = platform::kScratchBase + 0x10;
  auto measure = [&] {
    WorkCounters start = board.fabric.counters_snapshot();
    for (int i = 0; i < repeats; ++i) {
      board.fabric.iowrite32(addr, 0xA5A50000u + static_cast<uint32_t>(i));
      (void)board.fabric.ioread32(addr);
    }
    return board.fabric.counters_snapshot() - start;
  };
  MmioParity r;
  r.repeats = repeats;
  r.normal_delta = measure();
  board.ctx.call_secure([&](ProcessorContext&) { r.secure_delta = measure(); });
  r.equal = r.normal_delta == r.secure_delta;
  return r;
}

struct CopySample {
  size_t size = 0;
  uint64_t memcpy_units = 0;
  uint64_t copy_to_user_units = 0;
  uint64_t invoke_units = 0;
};

struct CopyAsymmetry {
  std::vector<CopySample> samples;
  bool strictly_ordered = false;  // invoke > copy_to_user > memcpy, every size
};

/// Three ways to move N bytes: a driver-internal copy, the kernel->user
/// edge, and the four-step invocation path (whose staging discipline moves
/// every byte twice). Sizes must be multiples of 4 and fit the capture
/// buffer.
inline CopyAsymmetry copy_asymmetry(platform::Board& board,
                                    platform::TeeStack& stack,
                                    const std::vector<size_t>& sizes,
                                    uint64_t seed = 1) {
  CopyAsymmetry result;
  result.strictly_ordered = true;
  std::mt19937_64 rng(seed);
  const uint64_t src = platform::kTeeRamBase + 0x1000;
  const uint64_t dst = platform::kTeeRamBase + 0x80000;

  UntrustedDriver untrusted(board.fabric, platform::kClockBase);
  untrusted.power_set(PowerLevel::Full);
  untrusted.clock_enable();
  tee::Session session = stack.open_session();

  for (size_t n : sizes) {
    if (n == 0 || n % 4 != 0 || n > platform::kCaptureBufSize)
      throw Error("copy bench sizes must be nonzero multiples of 4 within the buffer");
    CopySample sample;
    sample.size = n;
    board.fabric.write_bytes(src, random_bytes(rng, n));

    board.ctx.call_secure([&](ProcessorContext&) {
      WorkCounters c0 = board.fabric.counters_snapshot();
      board.fabric.copy(dst, src, n);
      sample.memcpy_units = (board.fabric.counters_snapshot() - c0).total_units();

      c0 = board.fabric.counters_snapshot();
      board.fabric.copy_to_user(platform::kNsUserBase, src, n);
      sample.copy_to_user_units =
          (board.fabric.counters_snapshot() - c0).total_units();
    });

    // Unmeasured capture primes the PTA's staging buffer with n bytes.
    std::vector<uint32_t> words(n / 4);
    for (auto& w : words) w = static_cast<uint16_t>(rng());
    board.i2s.attach_source(words);
    board.ctx.call_secure([&](ProcessorContext&) {
      tee::TeeParamList cap{tee::TeeParam::value(words.size(), 0)};
      stack.rt().invoke_command(session, platform::kCmdCaptureMmio, cap);

      WorkCounters c0 = board.fabric.counters_snapshot();
      tee::TeeParamList rd{tee::TeeParam::memref(platform::kTaScratchAddr, n,
                                                 tee::ParamDir::Out)};
      stack.rt().invoke_command(session, platform::kCmdReadBuffer, rd);
      sample.invoke_units = (board.fabric.counters_snapshot() - c0).total_units();
    });

    if (!(sample.invoke_units > sample.copy_to_user_units &&
          sample.copy_to_user_units > sample.memcpy_units))
      result.strictly_ordered = false;
    result.samples.push_back(sample);
  }

  stack.rt().close_session(session);
  untrusted.clock_disable();
  untrusted.cleanup();
  return result;
}

struct CryptoTiming {
  int iterations = 0;
  size_t payload_bytes = 0;
  double ecb_enc_ms = 0, cbc_enc_ms = 0, ctr_enc_ms = 0, gcm_enc_ms = 0;
  double ecb_dec_ms = 0, cbc_dec_ms = 0, ctr_dec_ms = 0, gcm_dec_ms = 0;

  bool gcm_ge_ctr_encrypt() const { return gcm_enc_ms >= ctr_enc_ms; }
  bool gcm_ge_ctr_decrypt() const { return gcm_dec_ms >= ctr_dec_ms; }
  double gcm_over_ctr_encrypt() const {
    return ctr_enc_ms > 0 ? gcm_enc_ms / ctr_enc_ms : 0;
  }
  double gcm_over_ctr_decrypt() const {
    return ctr_dec_ms > 0 ? gcm_dec_ms / ctr_dec_ms : 0;
  }
};

/// Wall-clock totals per mode and direction over `iterations` runs on one
/// random payload. Modes are interleaved round-robin so scheduler noise
/// lands evenly; GCM pays for GHASH on top of the CTR keystream in both
/// directions.
inline CryptoTiming crypto_timing(uint64_t seed, int iterations = 100,
                                  size_t payload_bytes = 64 * 1024) {
  using Clock = std::chrono::steady_clock;
  std::mt19937_64 rng(seed);
  Bytes plaintext = random_bytes(rng, payload_bytes);
  const Bytes padded = tee::block_pad(plaintext);
  crypto::AesKey key{};
  for (auto& b : key) b = static_cast<uint8_t>(rng());

  CryptoTiming t;
  t.iterations = iterations;
  t.payload_bytes = payload_bytes;

  auto fresh_nonce = [&rng] {
    crypto::Nonce n;
    for (auto& b : n) b = static_cast<uint8_t>(rng());
    return n;
  };
  volatile uint8_t sink = 0;
  auto timed = [&](auto&& op, double& acc) {
    auto begin = Clock::now();
    Bytes out = op();
    acc += std::chrono::duration<double, std::milli>(Clock::now() - begin).count();
    if (!out.empty()) sink = sink ^ out[0];
    return out;
  };

  // warm caches and the cipher implementation before timing
  (void)crypto::aes128_ctr(true, key, fresh_nonce(), plaintext);
  (void)crypto::aes128_gcm_encrypt(key, fresh_nonce(), plaintext);

  for (int i = 0; i < iterations; ++i) {
    Bytes ct = timed([&] { return crypto::aes128_ecb(true, key, padded); },
                     t.ecb_enc_ms);
    (void)timed([&] { return crypto::aes128_ecb(false, key, ct); }, t.ecb_dec_ms);

    crypto::Nonce iv = fresh_nonce();
    ct = timed([&] { return crypto::aes128_cbc(true, key, iv, padded); },
               t.cbc_enc_ms);
    (void)timed([&] { return crypto::aes128_cbc(false, key, iv, ct); },
                t.cbc_dec_ms);

    iv = fresh_nonce();
    ct = timed([&] { return crypto::aes128_ctr(true, key, iv, plaintext); },
               t.ctr_enc_ms);
    (void)timed([&] { return crypto::aes128_ctr(false, key, iv, ct); },
                t.ctr_dec_ms);

    iv = fresh_nonce();
    crypto::GcmSealed sealed;
    (void)timed([&] {
      sealed = crypto::aes128_gcm_encrypt(key, iv, plaintext);
      return sealed.ciphertext;
    }, t.gcm_enc_ms);
    (void)timed([&] {
      auto pt = crypto::aes128_gcm_decrypt(key, iv, sealed.ciphertext, sealed.tag);
      return pt ? std::move(*pt) : Bytes{};
    }, t.gcm_dec_ms);
  }
  return t;
}

struct BenchReport {
  MmioParity mmio;
  CopyAsymmetry copy;
  CryptoTiming crypto;
};

inline const std::vector<size_t>& default_copy_sizes() {
  static const std::vector<size_t> sizes = {64, 256, 1024, 4096, 16384, 65536};
  return sizes;
}

inline BenchReport run_all(platform::Board& board, platform::TeeStack& stack,
                           uint64_t seed) {
  BenchReport r;
  r.mmio = mmio_parity(board);
  r.copy = copy_asymmetry(board, stack, default_copy_sizes(), seed);
  r.crypto = crypto_timing(seed);
  return r;
}

}  // namespace fortress::bench
