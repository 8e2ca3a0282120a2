// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: boot the modeled SoC from signed images, run the
// record pipeline, benchmark the isolation model, and reproduce the TCB
// split. Exit codes: 0 success, 1 stage/pipeline failure, 2 I/O or parse
// errors.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include "fortress/fortress.hpp"
#include "fortress/report_json.hpp"

namespace {

using namespace fortress;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitStageFailure = 1;
constexpr int kExitIoError = 2;

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

/// Name the pipeline stage an exception belongs to, for record's exit
/// diagnostics.
std::string stage_of(const std::exception& e) {
  if (dynamic_cast<const BootRequired*>(&e) ||
      dynamic_cast<const RegionNotSecure*>(&e))
    return "tee-init";
  if (dynamic_cast<const Overrun*>(&e) || dynamic_cast<const DmaFault*>(&e) ||
      dynamic_cast<const SourceExhausted*>(&e) ||
      dynamic_cast<const DeviceStalled*>(&e) ||
      dynamic_cast<const DeviceBusy*>(&e))
    return "capture";
  if (dynamic_cast<const BadNonceReuse*>(&e) ||
      dynamic_cast<const HukUnavailable*>(&e) ||
      dynamic_cast<const CorruptPayload*>(&e))
    return "obfuscate";
  if (dynamic_cast<const ConnectError*>(&e) ||
      dynamic_cast<const AckMismatch*>(&e) || dynamic_cast<const Timeout*>(&e) ||
      dynamic_cast<const ProtocolError*>(&e))
    return "relay";
  if (dynamic_cast<const SessionClosed*>(&e) ||
      dynamic_cast<const BadParamRange*>(&e) ||
      dynamic_cast<const UnknownUuid*>(&e) ||
      dynamic_cast<const UnknownCommand*>(&e))
    return "invoke";
  return "pipeline";
}

struct BootArgs {
  std::string images_dir;
  std::string dt_path;
  std::string out_path;
};

int cmd_boot(const BootArgs& args) {
  platform::Board board;
  boot::BootToken token;
  try {
    token = board.boot_from_dir(args.images_dir);
  } catch (const Error& e) {
    std::cerr << "boot: cannot load images: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::exception& e) {
    std::cerr << "boot: " << e.what() << "\n";
    return kExitIoError;
  }

  json report = report::to_json(*token);
  bool dt_ok = true;
  if (!args.dt_path.empty() && token->success()) {
    try {
      auto on_disk = devtree::parse(read_text_file(args.dt_path));
      dt_ok = on_disk == token->dt_nodes;
      report["dt_cross_check"] = dt_ok ? "match" : "mismatch";
    } catch (const std::exception& e) {
      std::cerr << "boot: device tree cross-check: " << e.what() << "\n";
      return kExitIoError;
    }
  }
  report["images_dir"] = std::filesystem::absolute(args.images_dir).string();
  emit(report);
  if (!args.out_path.empty()) write_json_file(args.out_path, report);
  return token->success() && dt_ok ? kExitOk : kExitStageFailure;
}

struct RecordArgs {
  std::string state_path;
  std::string pcm_path;
  uint64_t frames = 0;
  std::string path = "mmio";
  std::string policy = "gcm";
  std::string out_path;
  std::string cloud;
  uint64_t seed = 1;
  bool json_out = false;
};

int cmd_record(const RecordArgs& args) {
  json state;
  pcm::PcmFixture fixture;
  try {
    state = json::parse(read_text_file(args.state_path));
    fixture = pcm::load(args.pcm_path);
  } catch (const std::exception& e) {
    std::cerr << "record: " << e.what() << "\n";
    return kExitIoError;
  }
  if (!state.value("success", false)) {
    std::cerr << "record: boot state file does not record a successful boot\n";
    return kExitStageFailure;
  }

  pipeline::RecordConfig cfg;
  cfg.frames = args.frames;
  cfg.via_dma = args.path == "dma";
  try {
    cfg.policy.mode = tee::obf_mode_from_string(args.policy);
  } catch (const Error& e) {
    std::cerr << "record: " << e.what() << "\n";
    return kExitIoError;
  }
  if (!args.cloud.empty()) {
    size_t colon = args.cloud.rfind(':');
    if (colon == std::string::npos) {
      std::cerr << "record: --cloud wants HOST:PORT\n";
      return kExitIoError;
    }
    cfg.cloud_host = args.cloud.substr(0, colon);
    cfg.cloud_port =
        static_cast<uint16_t>(std::stoul(args.cloud.substr(colon + 1)));
  }

  try {
    platform::Board board;
    boot::BootToken token =
        board.boot_from_dir(state.at("images_dir").get<std::string>());
    if (!token->success()) {
      std::cerr << "record: boot failed: " << token->failure_detail << "\n";
      return kExitStageFailure;
    }
    platform::TeeStack stack(board, token, args.seed);
    pipeline::RecordOutcome outcome = pipeline::run_record(board, stack, fixture, cfg);
    if (!args.out_path.empty()) write_file(args.out_path, outcome.wire);
    if (args.json_out) {
      emit(report::to_json(outcome));
    } else {
      std::cout << "recorded " << outcome.capture.size() << " bytes via "
                << args.path << ", payload " << outcome.wire.size() << " bytes ("
                << tee::to_string(outcome.payload.mode) << ")";
      if (outcome.relayed) std::cout << ", acked " << outcome.acked_length;
      std::cout << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "record: stage '" << stage_of(e) << "' failed: " << e.what()
              << "\n";
    return kExitStageFailure;
  }
}

struct BenchArgs {
  std::string scenario = "all";
  int iters = 100;
  uint64_t seed = 1;
  bool json_out = false;
  std::string out_path;
};

int cmd_bench(const BenchArgs& args) {
  json scenarios = json::array();
  platform::Board board;
  boot::BootToken token = board.boot_with_generated_chain();
  platform::TeeStack stack(board, token, args.seed);

  if (args.scenario == "all" || args.scenario == "mmio")
    scenarios.push_back(report::to_json(bench::mmio_parity(board)));
  if (args.scenario == "all" || args.scenario == "copy")
    scenarios.push_back(report::to_json(
        bench::copy_asymmetry(board, stack, bench::default_copy_sizes(), args.seed)));
  if (args.scenario == "all" || args.scenario == "crypto")
    scenarios.push_back(
        report::to_json(bench::crypto_timing(args.seed, args.iters)));
  json out{{"scenarios", scenarios}};

  if (args.json_out) {
    emit(out);
  } else {
    for (const auto& s : scenarios) {
      std::string name = s.at("scenario").get<std::string>();
      if (name == "mmio") {
        std::cout << "mmio parity: " << (s.at("equal").get<bool>() ? "equal" : "UNEQUAL")
                  << " (" << s.at("normal_work").at("total_units").get<uint64_t>()
                  << " units per world)\n";
      } else if (name == "copy") {
        std::cout << "copy asymmetry (units: memcpy / copy_to_user / invoke):\n";
        for (const auto& sample : s.at("samples"))
          std::cout << "  " << sample.at("size").get<uint64_t>() << " B: "
                    << sample.at("memcpy_units").get<uint64_t>() << " / "
                    << sample.at("copy_to_user_units").get<uint64_t>() << " / "
                    << sample.at("invoke_units").get<uint64_t>() << "\n";
        std::cout << "  strictly ordered: "
                  << (s.at("strictly_ordered").get<bool>() ? "yes" : "NO") << "\n";
      } else if (name == "crypto") {
        const auto& w = s.at("wall_ms");
        std::cout << "crypto wall-clock (ms, " << s.at("iterations").get<int>()
                  << " iters x " << s.at("payload_bytes").get<uint64_t>()
                  << " B):\n";
        for (const char* mode : {"ecb", "cbc", "ctr", "gcm"})
          std::cout << "  " << mode << ": enc "
                    << w.at(std::string(mode) + "_encrypt").get<double>()
                    << ", dec " << w.at(std::string(mode) + "_decrypt").get<double>()
                    << "\n";
        std::cout << "  gcm/ctr: enc "
                  << s.at("derived_ratios").at("gcm_over_ctr_encrypt").get<double>()
                  << ", dec "
                  << s.at("derived_ratios").at("gcm_over_ctr_decrypt").get<double>()
                  << "\n";
      }
    }
  }
  if (!args.out_path.empty()) write_json_file(args.out_path, out);
  return kExitOk;
}

struct TcbArgs {
  std::string csv_path;
  bool json_out = false;
};

int cmd_tcb(const TcbArgs& args) {
  TcbReport report;
  try {
    report = tcb_report(parse_loc_csv(read_text_file(args.csv_path)));
  } catch (const std::exception& e) {
    std::cerr << "tcb: " << e.what() << "\n";
    return kExitIoError;
  }
  if (args.json_out) {
    emit(report::to_json(report));
    return kExitOk;
  }
  std::printf("%-24s %10s %12s\n", "component", "trusted%", "untrusted%");
  for (const auto& row : report.rows)
    std::printf("%-24s %10.2f %12.2f\n", row.component.c_str(), row.trusted_pct,
                row.untrusted_pct);
  std::printf("%-24s %10.2f %12.2f\n", "Total", report.total_trusted_pct,
              report.total_untrusted_pct);
  return kExitOk;
}

std::atomic<bool> g_stop{false};

struct CloudArgs {
  uint16_t port = 0;
  std::string store_dir;
  int duration_ms = 0;  // 0 = run until SIGINT/SIGTERM
};

int cmd_cloud(const CloudArgs& args) {
  std::unique_ptr<relay::CloudServer> server;
  try {
    server = relay::cloud_serve(args.port, args.store_dir);
  } catch (const BindError& e) {
    std::cerr << "cloud: " << e.what() << "\n";
    return kExitStageFailure;
  }
  std::cout << "cloud listening on 127.0.0.1:" << server->port() << ", store "
            << args.store_dir << "\n"
            << std::flush;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(args.duration_ms);
  while (!g_stop) {
    if (args.duration_ms > 0 && std::chrono::steady_clock::now() >= deadline)
      break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server->stop();
  std::cout << "cloud stored " << server->frames_stored() << " payloads\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fortress: a two-world SoC audio-capture model"};
  app.require_subcommand(1);
  uint64_t seed = 1;
  bool json_out = false;
  app.add_option("--seed", seed, "deterministic RNG seed")->capture_default_str();
  app.add_flag("--json", json_out, "machine-readable JSON output");

  BootArgs boot_args;
  auto* boot_cmd = app.add_subcommand("boot", "run the trusted boot chain");
  boot_cmd->add_option("--images", boot_args.images_dir, "directory of signed stage images")
      ->required();
  boot_cmd->add_option("--dt", boot_args.dt_path,
                       "cross-check the verified device tree against this file");
  boot_cmd->add_option("--out", boot_args.out_path, "write the boot state file");

  RecordArgs record_args;
  auto* record_cmd = app.add_subcommand("record", "capture, obfuscate and deliver audio");
  record_cmd->add_option("--state", record_args.state_path, "boot state file")->required();
  record_cmd->add_option("--pcm", record_args.pcm_path, "PCM fixture (.pcm + .pcm.meta)")
      ->required();
  record_cmd->add_option("--frames", record_args.frames, "frames to capture (0 = all)");
  record_cmd->add_option("--path", record_args.path, "capture path")
      ->check(CLI::IsMember({"mmio", "dma"}))
      ->capture_default_str();
  record_cmd->add_option("--policy", record_args.policy, "obfuscation policy")
      ->check(CLI::IsMember({"ecb", "cbc", "ctr", "gcm", "filter", "convert"}))
      ->capture_default_str();
  record_cmd->add_option("--out", record_args.out_path, "write the payload file");
  record_cmd->add_option("--cloud", record_args.cloud, "relay to HOST:PORT");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "work-unit and wall-clock measurements");
  bench_cmd->add_option("--scenario", bench_args.scenario, "which scenario")
      ->check(CLI::IsMember({"all", "mmio", "copy", "crypto"}))
      ->capture_default_str();
  bench_cmd->add_option("--iters", bench_args.iters, "crypto iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--out", bench_args.out_path, "write the report JSON");

  TcbArgs tcb_args;
  auto* tcb_cmd = app.add_subcommand("tcb", "trusted/untrusted LOC percentages");
  tcb_cmd->add_option("--csv", tcb_args.csv_path, "LOC table CSV")->required();

  CloudArgs cloud_args;
  auto* cloud_cmd = app.add_subcommand("cloud", "run the mock cloud store");
  cloud_cmd->add_option("--port", cloud_args.port, "TCP port (0 = ephemeral)");
  cloud_cmd->add_option("--store", cloud_args.store_dir, "payload store directory")
      ->required();
  cloud_cmd->add_option("--duration-ms", cloud_args.duration_ms,
                        "exit after this long (0 = until SIGINT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitIoError;
  }

  record_args.seed = seed;
  record_args.json_out = json_out;
  bench_args.seed = seed;
  bench_args.json_out = json_out;
  tcb_args.json_out = json_out;

  try {
    if (boot_cmd->parsed()) return cmd_boot(boot_args);
    if (record_cmd->parsed()) return cmd_record(record_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args);
    if (tcb_cmd->parsed()) return cmd_tcb(tcb_args);
    if (cloud_cmd->parsed()) return cmd_cloud(cloud_args);
  } catch (const std::exception& e) {
    std::cerr << "fortress: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return kExitIoError;
}
