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

#include "must/rng.hpp"

#include "must/hash.hpp"

namespace must {

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) return 0;
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = eng_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

std::uint64_t derive_seed(std::uint64_t master,
                          const std::vector<std::string>& labels) {
  std::string key = std::to_string(master);
  for (const auto& l : labels) {
    key.push_back('\x1f');  // unit separator keeps ("ab","c") != ("a","bc")
    key += l;
  }
  return sha256_prefix_u64(key);
}

}  // namespace must
