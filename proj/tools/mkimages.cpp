// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

// Build-time signing tool: emits a deterministic, fully signed boot chain
// (FIMG containers plus the root public key) for a given device tree.

#include <CLI11.hpp>

#include <iostream>

#include "fortress/image_tool.hpp"
#include "fortress/platform.hpp"

int main(int argc, char** argv) {
  using namespace fortress;

  CLI::App app{"mkimages: sign a fortress boot chain"};
  std::string out_dir;
  std::string dts_path;
  uint64_t key_seed = 7;
  size_t pad = 1024;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--dts", dts_path, "device tree source (default: built-in board tree)");
  app.add_option("--key-seed", key_seed, "deterministic key seed")->capture_default_str();
  app.add_option("--pad", pad, "pad stage payloads to this many bytes (0 = no padding)")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    std::string dts =
        dts_path.empty() ? platform::default_dts() : read_text_file(dts_path);
    image_tool::ChainKeys keys = image_tool::deterministic_keys(key_seed);
    auto chain = image_tool::build_chain(
        keys, image_tool::default_contents(std::move(dts)), pad);
    image_tool::write_chain(out_dir, chain, keys.root_public());
    std::cout << "wrote " << chain.size() << " images + root key to " << out_dir
              << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mkimages: " << e.what() << "\n";
    return 2;
  }
}
