// Copyright 2026 The dfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint container:
//   bytes 0..7   magic "DFXCKPT1"
//   bytes 8..15  little-endian u64 manifest length L
//   next L bytes manifest JSON (config, parameter table, provenance)
//   remainder    float32 little-endian parameter blobs, manifest order
// Loading validates every parameter name and shape against the receiving
// model before any value is copied.

#pragma once

#include <filesystem>

#include "json.hpp"

#include "dfx/nn/param.hpp"

namespace dfx::nn {

/// Writes params with the caller's manifest fields ("config", "provenance",
/// ...) merged in. The "params" and "checksum" keys are filled here.
void save_checkpoint(const std::filesystem::path& path,
                     const nlohmann::json& manifest,
                     const ParamList<float>& params);

/// Reads only the manifest.
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path);

/// Loads values into params (matched by position and name). Throws
/// ShapeError on any mismatch. Returns the manifest.
nlohmann::json load_checkpoint(const std::filesystem::path& path,
                               const ParamList<float>& params);

}  // namespace dfx::nn
