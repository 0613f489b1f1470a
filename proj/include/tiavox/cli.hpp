// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "tiavox/renderer.hpp"
#include "tiavox/trainer.hpp"

namespace tiavox {

// Applies a JSON config document (flat keys named after the TrainConfig /
// RenderConfig fields, plus an "occupancy" object) on top of the given
// values. Unknown keys are rejected.
void apply_config_text(const std::string& json_text, TrainConfig& train, RenderConfig& render);
void apply_config_file(const std::filesystem::path& path, TrainConfig& train, RenderConfig& render);

// Entry point of the `tiavox` tool. Diagnostics go to `err`, reports to `out`.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tiavox
