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

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dfx::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand. Returns 0 on success, 1 on runtime failure and 2
/// on usage errors. Diagnostics go to stderr.
int run(int argc, const char* const* argv);

/// Record written as manifest.json into every output directory.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string started_at, finished_at;  // ISO-8601 UTC
  nlohmann::json artifacts = nlohmann::json::object();  // name -> path
  nlohmann::json checksums = nlohmann::json::object();  // name -> hex digest
};

nlohmann::json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

std::string utc_now();

/// Splits argv into "section.key=value" overrides (flags of the form
/// --section.key=value or --section.key value whose section is listed)
/// and the remaining arguments.
struct SplitArgs {
  std::vector<std::string> rest;
  std::vector<std::string> overrides;
};
SplitArgs split_overrides(const std::vector<std::string>& args,
                          const std::vector<std::string>& sections);

}  // namespace dfx::cli
