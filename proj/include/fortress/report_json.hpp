// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// JSON projections of the machine-readable reports the CLI emits. Shapes
// are pinned by the schemas under schemas/.

#include <json.hpp>

#include "fortress/bench.hpp"
#include "fortress/boot.hpp"
#include "fortress/counters.hpp"
#include "fortress/devtree.hpp"
#include "fortress/drivers.hpp"
#include "fortress/pipeline.hpp"

namespace fortress::report {

using nlohmann::json;

inline json to_json(const WorkCounters& c) {
  return json{{"access_checks", c.access_checks},
              {"bytes_copied", c.bytes_copied},
              {"world_switches", c.world_switches},
              {"secure_syscalls", c.secure_syscalls},
              {"total_units", c.total_units()}};
}

inline json to_json(const devtree::DeviceNode& n) {
  json reg = json::array();
  for (const auto& [base, size] : n.reg)
    reg.push_back(json{{"base", base}, {"size", size}});
  return json{{"name", n.name},
              {"compatible", n.compatible},
              {"reg", reg},
              {"status", n.status == devtree::DeviceNode::Status::Okay
                             ? "okay" : "disabled"},
              {"secure_status",
               n.secure_status == devtree::DeviceNode::SecureStatus::Secure
                   ? "secure" : "non-secure"}};
}

inline json to_json(const boot::BootReport& r) {
  json verified = json::array();
  for (boot::Stage s : r.verified) verified.push_back(boot::to_string(s));
  json regions = json::array();
  for (const auto& [base, size] : r.configured_regions)
    regions.push_back(json{{"base", base}, {"size", size}});
  json nodes = json::array();
  for (const auto& n : r.dt_nodes) nodes.push_back(to_json(n));
  json out{{"success", r.success()},
           {"verified_stages", verified},
           {"configured_regions", regions},
           {"dt_nodes", nodes}};
  if (r.failed_stage) {
    out["failed_stage"] = boot::to_string(*r.failed_stage);
    out["failure_detail"] = r.failure_detail;
  }
  return out;
}

inline json to_json(const TcbReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back(json{{"component", row.component},
                        {"trusted_pct", row.trusted_pct},
                        {"untrusted_pct", row.untrusted_pct}});
  return json{{"rows", rows},
              {"total_trusted_pct", r.total_trusted_pct},
              {"total_untrusted_pct", r.total_untrusted_pct}};
}

inline json to_json(const bench::MmioParity& m) {
  return json{{"scenario", "mmio"},
              {"iterations", m.repeats},
              {"normal_work", to_json(m.normal_delta)},
              {"secure_work", to_json(m.secure_delta)},
              {"equal", m.equal},
              {"derived_ratios",
               json{{"secure_over_normal_units",
                     m.normal_delta.total_units() == 0
                         ? 0.0
                         : static_cast<double>(m.secure_delta.total_units()) /
                               static_cast<double>(m.normal_delta.total_units())}}}};
}

inline json to_json(const bench::CopyAsymmetry& c) {
  json samples = json::array();
  json ratios = json::object();
  for (const auto& s : c.samples) {
    samples.push_back(json{{"size", s.size},
                           {"memcpy_units", s.memcpy_units},
                           {"copy_to_user_units", s.copy_to_user_units},
                           {"invoke_units", s.invoke_units}});
    ratios["invoke_over_memcpy_" + std::to_string(s.size)] =
        static_cast<double>(s.invoke_units) / static_cast<double>(s.memcpy_units);
  }
  return json{{"scenario", "copy"},
              {"iterations", c.samples.size()},
              {"samples", samples},
              {"strictly_ordered", c.strictly_ordered},
              {"derived_ratios", ratios}};
}

inline json to_json(const bench::CryptoTiming& t) {
  return json{{"scenario", "crypto"},
              {"iterations", t.iterations},
              {"payload_bytes", t.payload_bytes},
              {"wall_ms",
               json{{"ecb_encrypt", t.ecb_enc_ms}, {"ecb_decrypt", t.ecb_dec_ms},
                    {"cbc_encrypt", t.cbc_enc_ms}, {"cbc_decrypt", t.cbc_dec_ms},
                    {"ctr_encrypt", t.ctr_enc_ms}, {"ctr_decrypt", t.ctr_dec_ms},
                    {"gcm_encrypt", t.gcm_enc_ms}, {"gcm_decrypt", t.gcm_dec_ms}}},
              {"gcm_ge_ctr_encrypt", t.gcm_ge_ctr_encrypt()},
              {"gcm_ge_ctr_decrypt", t.gcm_ge_ctr_decrypt()},
              {"derived_ratios",
               json{{"gcm_over_ctr_encrypt", t.gcm_over_ctr_encrypt()},
                    {"gcm_over_ctr_decrypt", t.gcm_over_ctr_decrypt()}}}};
}

inline json to_json(const bench::BenchReport& r) {
  return json{{"scenarios", json::array({to_json(r.mmio), to_json(r.copy),
                                         to_json(r.crypto)})}};
}

inline json to_json(const pipeline::RecordOutcome& r) {
  return json{{"mode", tee::to_string(r.payload.mode)},
              {"capture_bytes", r.capture.size()},
              {"payload_bytes", r.wire.size()},
              {"payload_sha256", to_hex(crypto::sha256(r.wire))},
              {"relayed", r.relayed},
              {"acked_length", r.acked_length},
              {"work", to_json(r.work)}};
}

}  // namespace fortress::report
