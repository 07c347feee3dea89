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

#ifndef MUST_HASH_HPP
#define MUST_HASH_HPP

#include <cstdint>
#include <string>

namespace must {

/// SHA-256 of a byte string, as lowercase hex. Used for artifact
/// provenance manifests and child-seed derivation.
std::string sha256_hex(const std::string& bytes);

/// SHA-256 of a file's contents.
std::string sha256_file(const std::string& path);

/// First eight digest bytes as a little-endian u64.
std::uint64_t sha256_prefix_u64(const std::string& bytes);

}  // namespace must

#endif  // MUST_HASH_HPP
