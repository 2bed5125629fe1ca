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

#include <chrono>
#include <ctime>
#include <fstream>

#include "dfx/cli/cli.hpp"
#include "dfx/core/error.hpp"

namespace dfx::cli {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},       {"argv", m.argv},
          {"config", m.config},         {"config_hash", m.config_hash},
          {"seed", m.seed},             {"started_at", m.started_at},
          {"finished_at", m.finished_at}, {"artifacts", m.artifacts},
          {"checksums", m.checksums},     {"version", kVersion}};
}

RunManifest run_manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("command")) throw ConfigError("not a run manifest");
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.value("argv", std::vector<std::string>{});
  m.config = j.value("config", nlohmann::json::object());
  m.config_hash = j.value("config_hash", std::string());
  m.seed = j.value("seed", std::uint64_t{0});
  m.started_at = j.value("started_at", std::string());
  m.finished_at = j.value("finished_at", std::string());
  m.artifacts = j.value("artifacts", nlohmann::json::object());
  m.checksums = j.value("checksums", nlohmann::json::object());
  return m;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  std::filesystem::create_directories(dir);
  const auto tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << to_json(m).dump(2) << "\n";
  }
  std::filesystem::rename(tmp, dir / "manifest.json");
}

RunManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest in " + dir.string() + ": " + e.what());
  }
  return run_manifest_from_json(j);
}

SplitArgs split_overrides(const std::vector<std::string>& args,
                          const std::vector<std::string>& sections) {
  SplitArgs out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    bool matched = false;
    if (a.rfind("--", 0) == 0) {
      const auto dot = a.find('.');
      const auto eq = a.find('=');
      if (dot != std::string::npos && (eq == std::string::npos || dot < eq)) {
        const std::string section = a.substr(2, dot - 2);
        for (const auto& s : sections) matched = matched || s == section;
        if (matched) {
          if (eq != std::string::npos) {
            out.overrides.push_back(a.substr(2));
          } else {
            if (i + 1 >= args.size()) throw ConfigError("missing value for " + a);
            out.overrides.push_back(a.substr(2) + "=" + args[++i]);
          }
        }
      }
    }
    if (!matched) out.rest.push_back(a);
  }
  return out;
}

}  // namespace dfx::cli
