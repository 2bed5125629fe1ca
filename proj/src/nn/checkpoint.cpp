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

#include "dfx/nn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"

namespace dfx::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'D', 'F', 'X', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

nlohmann::json read_manifest(std::istream& is, const std::filesystem::path& path) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic)
    throw IoError("not a dfx checkpoint: " + path.string());
  const std::uint64_t len = get_u64(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw IoError("truncated checkpoint manifest: " + path.string());
  return nlohmann::json::parse(text);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const nlohmann::json& manifest,
                     const ParamList<float>& params) {
  nlohmann::json m = manifest;
  m["format"] = "dfx-checkpoint/1";
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto* p : params) {
    table.push_back({{"name", p->name},
                     {"shape", {p->value.rows(), p->value.cols()}},
                     {"offset", offset}});
    offset += p->value.size();
  }
  m["params"] = std::move(table);
  m["checksum"] = hex64(checksum(params));
  const std::string text = m.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  static_assert(sizeof(float) == 4);
  for (const auto* p : params)
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  return read_manifest(is, path);
}

nlohmann::json load_checkpoint(const std::filesystem::path& path,
                               const ParamList<float>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  nlohmann::json m = read_manifest(is, path);
  const auto& table = m.at("params");
  if (table.size() != params.size())
    throw ShapeError("checkpoint has " + std::to_string(table.size()) +
                     " tensors, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = table[i];
    const auto* p = params[i];
    if (e.at("name").get<std::string>() != p->name)
      throw ShapeError("checkpoint tensor " + std::to_string(i) + " is '" +
                       e.at("name").get<std::string>() + "', model expects '" +
                       p->name + "'");
    if (e.at("shape")[0].get<int>() != p->value.rows() ||
        e.at("shape")[1].get<int>() != p->value.cols())
      throw ShapeError("shape mismatch for " + p->name);
  }
  for (auto* p : params) {
    is.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!is) throw IoError("truncated checkpoint data: " + path.string());
  }
  if (m.contains("checksum") && m["checksum"].get<std::string>() != hex64(checksum(params)))
    throw IoError("checkpoint checksum mismatch: " + path.string());
  return m;
}

}  // namespace dfx::nn
