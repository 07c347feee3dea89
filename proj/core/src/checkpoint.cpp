// Copyright 2026 The MUST Authors
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

#include "must/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "must/binio.hpp"
#include "must/errors.hpp"

namespace must {

namespace {
constexpr char kMagic[9] = "MUSTCKPT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor>& params) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  binio::write_magic(out, kMagic);
  binio::write_u32(out, kVersion);
  for (const auto& [name, t] : params) {
    binio::write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) binio::write_u64(out, d);
    for (double v : t.data) binio::write_f64(out, v);
  }
  if (!out) throw Error("short write to checkpoint: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  binio::expect_magic(in, kMagic, "checkpoint");
  const std::uint32_t version = binio::read_u32(in);
  if (version != kVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version) +
                " in " + path);
  }
  std::map<std::string, Tensor> params;
  while (in.peek() != std::ifstream::traits_type::eof()) {
    const std::uint32_t name_len = binio::read_u32(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw Error("truncated parameter name in " + path);
    }
    const std::uint32_t rank = binio::read_u32(in);
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<std::size_t>(binio::read_u64(in));
      count *= shape[i];
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = binio::read_f64(in);
    if (params.count(name)) {
      throw Error("duplicate parameter '" + name + "' in " + path);
    }
    params.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

}  // namespace must
