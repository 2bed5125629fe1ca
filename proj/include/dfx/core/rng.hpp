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

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dfx {

using Rng = std::mt19937_64;

/// Mixes a root seed with a stream name ("corpus", "init", "shuffle",
/// "noise", ...) so every consumer of randomness gets an independent,
/// reproducible stream from a single user-facing seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

/// derive_seed chained with an index, for per-item streams.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                          std::uint64_t index);

inline Rng make_rng(std::uint64_t root, std::string_view name) {
  return Rng(derive_seed(root, name));
}

}  // namespace dfx
