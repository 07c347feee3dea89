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

#ifndef MUST_TEXT_HPP
#define MUST_TEXT_HPP

#include <string>

namespace must {

// Transcripts are sequences of Unicode code points (std::u32string)
// internally; files carry UTF-8.

std::string utf8_encode(const std::u32string& s);
std::u32string utf8_decode(const std::string& s);

/// Fixed-format doubles for CSV/report emission.
std::string fmt_f(double v, int decimals);
/// Shortest exact round-trip representation ("%.17g").
std::string fmt_g17(double v);

}  // namespace must

#endif  // MUST_TEXT_HPP
