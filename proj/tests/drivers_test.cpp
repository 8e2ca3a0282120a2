// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <fortress/bytes.hpp>
#include <fortress/drivers.hpp>
#include <fortress/errors.hpp>
#include <fortress/pcm.hpp>
#include <fortress/platform.hpp>

#include "support/tmpdir.hpp"

#include <memory>
#include <random>
#include <tuple>
#include <vector>

using namespace fortress;

namespace {

pcm::PcmFixture random_fixture(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  pcm::PcmFixture fx;
  fx.samples.resize(n);
  for (auto& s : fx.samples)
    s = static_cast<int16_t>(rng() & 0xFFFF);
  return fx;
}

struct DriverRig {
  platform::Board board;
  boot::BootToken token;
  UntrustedDriver untrusted;
  std::unique_ptr<TrustedDriver> driver;

  DriverRig() : untrusted(board.fabric, platform::kClockBase) {
    token = board.boot_with_generated_chain();
    REQUIRE(token->success());
    {
      FirmwareSection fw(board.ctx);
      board.fabric.configure_secure_region(platform::kCaptureBufBase,
                                           platform::kCaptureBufSize);
    }
    board.ctx.call_secure([&](ProcessorContext&) {
      driver = std::make_unique<TrustedDriver>(
          board.fabric, token->dt_nodes[0], token, platform::kDmaFiqId,
          platform::kDataIrqId, platform::kCaptureBufBase,
          platform::kCaptureBufSize);
    });
    untrusted.power_set(PowerLevel::Full);
    untrusted.clock_enable();
  }
};

}  // namespace

TEST_CASE("trusted driver construction demands the chain of trust") {
  platform::Board board;

  SECTION("no token at all") {
    devtree::DeviceNode node;
    CHECK_THROWS_AS(TrustedDriver(board.fabric, node, nullptr, 40, 41,
                                  platform::kCaptureBufBase,
                                  platform::kCaptureBufSize),
                    BootRequired);
  }

  SECTION("a failed boot report is not a capability") {
    auto keys = image_tool::deterministic_keys(7);
    auto chain = image_tool::build_chain(
        keys, image_tool::default_contents(platform::default_dts()));
    chain[2].payload[50] ^= 1;
    auto bad = boot::boot_chain(chain, keys.root_public(), board.fabric);
    REQUIRE_FALSE(bad->success());
    devtree::DeviceNode node;
    CHECK_THROWS_AS(TrustedDriver(board.fabric, node, bad, 40, 41,
                                  platform::kCaptureBufBase,
                                  platform::kCaptureBufSize),
                    BootRequired);
  }

  SECTION("device window and buffer must be TZASC-protected") {
    auto token = board.boot_with_generated_chain();
    REQUIRE(token->success());

    devtree::DeviceNode bare;
    CHECK_THROWS_AS(
        TrustedDriver(board.fabric, bare, token, 40, 41,
                      platform::kCaptureBufBase, platform::kCaptureBufSize),
        RegionNotSecure);

    board.ctx.call_secure([&](ProcessorContext&) {
      // TEE RAM was never secured in this rig, so the buffer check fires.
      CHECK_THROWS_AS(
          TrustedDriver(board.fabric, token->dt_nodes[0], token, 40, 41,
                        platform::kCaptureBufBase, platform::kCaptureBufSize),
          RegionNotSecure);
    });
  }
}

TEST_CASE("mmio capture copies the exact device stream into secure RAM") {
  DriverRig rig;
  auto fx = random_fixture(200, 0xD1);
  rig.board.i2s.attach_source(pcm::device_words(fx));

  Bytes got = rig.board.ctx.call_secure(
      [&](ProcessorContext&) { return rig.driver->capture_mmio(200); });

  Bytes want = pcm::expected_capture(fx, 200);
  CHECK(got == want);
  CHECK(rig.board.fabric.read_bytes(platform::kCaptureBufBase, want.size()) ==
        want);
  CHECK_FALSE(rig.board.i2s.enabled());
}

TEST_CASE("dma capture lands the same bytes as mmio polling") {
  DriverRig rig;
  auto fx = random_fixture(300, 0xD2);

  rig.board.i2s.attach_source(pcm::device_words(fx));
  Bytes via_mmio = rig.board.ctx.call_secure(
      [&](ProcessorContext&) { return rig.driver->capture_mmio(300); });

  rig.board.i2s.attach_source(pcm::device_words(fx));
  Bytes via_dma = rig.board.ctx.call_secure(
      [&](ProcessorContext&) { return rig.driver->capture_dma(300); });

  CHECK(via_dma == via_mmio);
  CHECK(via_dma == pcm::expected_capture(fx, 300));
}

TEST_CASE("normal world cannot drive the trusted capture path") {
  DriverRig rig;
  rig.board.i2s.attach_source({1, 2, 3, 4});
  CHECK_THROWS_AS(rig.driver->capture_mmio(4), AccessDenied);
}

TEST_CASE("a latched overrun aborts the capture") {
  DriverRig rig;
  std::vector<uint32_t> words(80, 0x42);
  rig.board.i2s.attach_source(words);

  rig.board.ctx.call_secure([&](ProcessorContext&) {
    rig.board.fabric.iowrite32(platform::kI2sBase + I2sDevice::kCtrl, 1);
    for (int k = 0; k < 70; ++k) rig.board.fabric.tick();
    REQUIRE(rig.board.i2s.overrun());
    CHECK_THROWS_AS(rig.driver->capture_mmio(10), Overrun);
  });
}

TEST_CASE("a drained source stalls out as SourceExhausted") {
  DriverRig rig;
  rig.board.i2s.attach_source({1, 2});
  rig.board.ctx.call_secure([&](ProcessorContext&) {
    CHECK_THROWS_AS(rig.driver->capture_mmio(5), SourceExhausted);
  });

  SECTION("the dma path reports starvation the same way") {
    rig.board.i2s.attach_source({1, 2});
    rig.board.ctx.call_secure([&](ProcessorContext&) {
      CHECK_THROWS_AS(rig.driver->capture_dma(5), SourceExhausted);
    });
  }
}

TEST_CASE("dma into normal memory is a fault, not a leak") {
  DriverRig rig;
  auto fx = random_fixture(50, 0xD3);
  rig.board.i2s.attach_source(pcm::device_words(fx));

  rig.board.ctx.call_secure([&](ProcessorContext&) {
    CHECK_THROWS_AS(rig.driver->capture_dma_to(platform::kNsKernelBase, 50),
                    DmaFault);
    // Nothing reached the normal-world destination.
    CHECK(rig.board.fabric.read_bytes(platform::kNsKernelBase, 200) ==
          Bytes(200, 0));
    // The driver's own buffer still works after the fault.
    Bytes got = rig.driver->capture_dma(50);
    CHECK(got == pcm::expected_capture(fx, 50));
  });
}

TEST_CASE("cleanup is idempotent and fences later use") {
  DriverRig rig;
  CHECK(rig.board.fabric.mapping_count() == 1);

  rig.board.ctx.call_secure([&](ProcessorContext&) {
    rig.driver->cleanup();
    rig.driver->cleanup();
  });
  CHECK(rig.driver->cleaned_up());
  CHECK(rig.board.fabric.mapping_count() == 0);

  rig.board.ctx.call_secure([&](ProcessorContext&) {
    CHECK_THROWS_AS(rig.driver->capture_mmio(1), UseAfterCleanup);
    CHECK_THROWS_AS(rig.driver->capture_dma(1), UseAfterCleanup);
    // The registered data-IRQ handler degrades to a no-op.
    CHECK_NOTHROW(rig.board.ctx.deliver_interrupt(platform::kDataIrqId,
                                                  IrqKind::Irq));
  });
}

TEST_CASE("untrusted driver manages clock and power through the open block") {
  platform::Board board;
  UntrustedDriver drv(board.fabric, platform::kClockBase);

  CHECK_FALSE(board.i2s.clock_gate());
  drv.clock_enable();
  CHECK(board.i2s.clock_gate());
  drv.clock_disable();
  CHECK_FALSE(board.i2s.clock_gate());

  drv.power_set(PowerLevel::Off);
  CHECK(board.i2s.power() == PowerLevel::Off);
  CHECK(drv.power_state() == PowerLevel::Off);
  drv.power_set(PowerLevel::Low);
  CHECK(board.i2s.power() == PowerLevel::Low);
  drv.power_set(PowerLevel::Full);
  CHECK(board.i2s.power() == PowerLevel::Full);

  drv.cleanup();
  drv.cleanup();
  CHECK_FALSE(board.i2s.clock_gate());
  CHECK_THROWS_AS(drv.clock_enable(), UseAfterCleanup);
  CHECK_THROWS_AS(drv.power_set(PowerLevel::Full), UseAfterCleanup);
}

TEST_CASE("untrusted driver never touches protected addresses") {
  DriverRig rig;
  std::vector<std::tuple<World, uint64_t, bool>> checks;
  rig.board.fabric.set_access_trace(
      [&](World w, uint64_t addr, uint64_t, AccessKind, bool ok) {
        checks.emplace_back(w, addr, ok);
      });

  rig.untrusted.clock_disable();
  rig.untrusted.power_set(PowerLevel::Low);
  rig.untrusted.power_set(PowerLevel::Full);
  rig.untrusted.clock_enable();

  REQUIRE_FALSE(checks.empty());
  for (const auto& [world, addr, ok] : checks) {
    CHECK(world == World::Normal);
    CHECK(ok);
    CHECK(addr >= platform::kClockBase);
    CHECK(addr < platform::kClockBase + platform::kClockWindow);
  }
}

TEST_CASE("LOC csv parsing") {
  auto table = parse_loc_csv(
      "component,trusted_loc,untrusted_loc\r\n"
      "Initialization,2213,2345\n"
      "\n"
      "Cleanup,221,221\n");
  REQUIRE(table.size() == 2);
  CHECK(table[0].component == "Initialization");
  CHECK(table[0].trusted_loc == 2213);
  CHECK(table[0].untrusted_loc == 2345);
  CHECK(table[1].component == "Cleanup");

  SECTION("headerless input works when the first row is numeric") {
    auto t2 = parse_loc_csv("Init,10,20\n");
    REQUIRE(t2.size() == 1);
    CHECK(t2[0].trusted_loc == 10);
  }
  SECTION("malformed rows are rejected") {
    CHECK_THROWS_AS(parse_loc_csv("Init,10\n"), Error);
    CHECK_THROWS_AS(parse_loc_csv("a,1,2\nInit,x,20\n"), Error);
    CHECK_THROWS_AS(parse_loc_csv("a,1,2\nInit,10,\n"), Error);
  }
}

TEST_CASE("tcb percentages are half-up rounded shares of the grand total") {
  TcbReport r = tcb_report({{"x", 1, 2}});
  CHECK_THAT(r.rows[0].trusted_pct, Catch::Matchers::WithinAbs(33.33, 1e-9));
  CHECK_THAT(r.rows[0].untrusted_pct, Catch::Matchers::WithinAbs(66.67, 1e-9));

  TcbReport half = tcb_report({{"x", 1, 799}});
  CHECK_THAT(half.rows[0].trusted_pct, Catch::Matchers::WithinAbs(0.13, 1e-9));
  CHECK_THAT(half.rows[0].untrusted_pct,
             Catch::Matchers::WithinAbs(99.88, 1e-9));

  CHECK_THROWS_AS(tcb_report({}), EmptyTable);
  CHECK_THROWS_AS(tcb_report({{"z", 0, 0}}), EmptyTable);
}

TEST_CASE("the checked-in driver LOC split totals 66.82 / 33.18") {
  std::string text =
      read_text_file(std::string(FORTRESS_REPO_DIR) + "/fixtures/tcb_i2s.csv");
  TcbReport r = tcb_report(parse_loc_csv(text));

  REQUIRE(r.rows.size() == 5);
  CHECK_THAT(r.total_trusted_pct, Catch::Matchers::WithinAbs(66.82, 1e-9));
  CHECK_THAT(r.total_untrusted_pct, Catch::Matchers::WithinAbs(33.18, 1e-9));

  CHECK(r.rows[0].component == "Initialization");
  CHECK_THAT(r.rows[0].trusted_pct, Catch::Matchers::WithinAbs(22.13, 1e-9));
  CHECK_THAT(r.rows[0].untrusted_pct, Catch::Matchers::WithinAbs(23.45, 1e-9));
  CHECK_THAT(r.rows[1].trusted_pct, Catch::Matchers::WithinAbs(41.15, 1e-9));
  CHECK_THAT(r.rows[3].untrusted_pct, Catch::Matchers::WithinAbs(7.52, 1e-9));
}
