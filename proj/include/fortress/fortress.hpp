// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Umbrella header for the whole model.

#include "fortress/bench.hpp"
#include "fortress/boot.hpp"
#include "fortress/bytes.hpp"
#include "fortress/counters.hpp"
#include "fortress/crypto.hpp"
#include "fortress/devtree.hpp"
#include "fortress/drivers.hpp"
#include "fortress/errors.hpp"
#include "fortress/i2s_dev.hpp"
#include "fortress/image_tool.hpp"
#include "fortress/mem_fabric.hpp"
#include "fortress/pcm.hpp"
#include "fortress/pipeline.hpp"
#include "fortress/platform.hpp"
#include "fortress/relay_cloud.hpp"
#include "fortress/soc_state.hpp"
#include "fortress/tee_rt.hpp"
