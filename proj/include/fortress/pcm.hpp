// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// PCM fixture files: raw little-endian signed 16-bit samples in a ".pcm"
// file, with a text sidecar "<name>.pcm.meta" holding
//   rate=16000,channels=1
// and, for keyword fixtures, one line per labeled segment:
//   segment=<label>:<first frame>:<frame count>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fortress/bytes.hpp"
#include "fortress/errors.hpp"

namespace fortress::pcm {

struct Segment {
  std::string label;
  size_t start = 0;  // frame index
  size_t count = 0;  // frames

  bool operator==(const Segment&) const = default;
};

struct PcmFixture {
  uint32_t rate = 16000;
  uint32_t channels = 1;
  std::vector<int16_t> samples;
  std::vector<Segment> segments;
};

inline std::filesystem::path meta_path(const std::filesystem::path& pcm_path) {
  return std::filesystem::path(pcm_path.string() + ".meta");
}

inline void save(const std::filesystem::path& path, const PcmFixture& fx) {
  Bytes raw;
  raw.reserve(fx.samples.size() * 2);
  for (int16_t s : fx.samples) {
    uint16_t u = static_cast<uint16_t>(s);
    raw.push_back(static_cast<uint8_t>(u & 0xFF));
    raw.push_back(static_cast<uint8_t>(u >> 8));
  }
  write_file(path, raw);
  std::ostringstream meta;
  meta << "rate=" << fx.rate << ",channels=" << fx.channels << "\n";
  for (const auto& seg : fx.segments)
    meta << "segment=" << seg.label << ":" << seg.start << ":" << seg.count << "\n";
  write_text_file(meta_path(path), meta.str());
}

inline PcmFixture load(const std::filesystem::path& path) {
  PcmFixture fx;
  Bytes raw = read_file(path);
  if (raw.size() % 2 != 0) throw Error("pcm file has odd byte count");
  fx.samples.resize(raw.size() / 2);
  for (size_t i = 0; i < fx.samples.size(); ++i)
    fx.samples[i] = static_cast<int16_t>(
        static_cast<uint16_t>(raw[2 * i]) | static_cast<uint16_t>(raw[2 * i + 1]) << 8);

  std::istringstream meta(read_text_file(meta_path(path)));
  std::string line;
  bool have_header = false;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    if (line.starts_with("rate=")) {
      unsigned rate = 0, channels = 0;
      if (std::sscanf(line.c_str(), "rate=%u,channels=%u", &rate, &channels) != 2)
        throw Error("bad pcm sidecar header: " + line);
      fx.rate = rate;
      fx.channels = channels;
      have_header = true;
    } else if (line.starts_with("segment=")) {
      std::string body = line.substr(8);
      size_t c1 = body.find(':');
      size_t c2 = body.find(':', c1 == std::string::npos ? c1 : c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw Error("bad segment line: " + line);
      Segment seg;
      seg.label = body.substr(0, c1);
      seg.start = std::stoull(body.substr(c1 + 1, c2 - c1 - 1));
      seg.count = std::stoull(body.substr(c2 + 1));
      fx.segments.push_back(std::move(seg));
    } else {
      throw Error("unrecognized pcm sidecar line: " + line);
    }
  }
  if (!have_header) throw Error("pcm sidecar missing rate/channels header");
  return fx;
}

/// Samples as the raw words the I2S slave shifts out (low 16 bits).
inline std::vector<uint32_t> device_words(const PcmFixture& fx) {
  std::vector<uint32_t> out;
  out.reserve(fx.samples.size());
  for (int16_t s : fx.samples) out.push_back(static_cast<uint16_t>(s));
  return out;
}

/// The byte stream a perfect capture of n frames must produce: each sample
/// zero-extended to a 32-bit little-endian word. Oracle for the bit-level
/// device model.
inline Bytes expected_capture(const PcmFixture& fx, size_t n_frames) {
  Bytes out;
  out.reserve(n_frames * 4);
  for (size_t i = 0; i < n_frames && i < fx.samples.size(); ++i)
    put_u32_le(out, static_cast<uint16_t>(fx.samples[i]));
  return out;
}

/// Slice a capture buffer into (label, bytes) pairs per sidecar segment.
inline std::vector<std::pair<std::string, Bytes>> labeled_segments(
    const PcmFixture& fx, ByteSpan capture) {
  std::vector<std::pair<std::string, Bytes>> out;
  for (const auto& seg : fx.segments) {
    size_t begin = seg.start * 4;
    size_t end = (seg.start + seg.count) * 4;
    if (end > capture.size()) throw Error("segment past end of capture");
    out.emplace_back(seg.label, Bytes(capture.begin() + begin, capture.begin() + end));
  }
  return out;
}

}  // namespace fortress::pcm
