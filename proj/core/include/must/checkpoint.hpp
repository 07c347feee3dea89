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

#ifndef MUST_CHECKPOINT_HPP
#define MUST_CHECKPOINT_HPP

#include <map>
#include <string>

#include "must/tensor.hpp"

namespace must {

// Checkpoint container: magic "MUSTCKPT", u32 version, then one record per
// parameter (u32 name length, UTF-8 name, u32 rank, dims as u64, values as
// f64, all little-endian) until end of file. Round-trips bit-exactly.

void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor>& params);

std::map<std::string, Tensor> load_checkpoint(const std::string& path);

}  // namespace must

#endif  // MUST_CHECKPOINT_HPP
