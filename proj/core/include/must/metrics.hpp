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

#ifndef MUST_METRICS_HPP
#define MUST_METRICS_HPP

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace must {

/// One optimal unit-cost alignment of hypothesis against reference.
/// Deletions are reference characters missing from the hypothesis;
/// insertions are hypothesis characters absent from the reference.
struct EditBreakdown {
  std::size_t distance = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
};

/// Levenshtein distance with an S/D/I decomposition. When several optimal
/// alignments exist the traceback prefers substitution, then deletion, then
/// insertion.
EditBreakdown edit_distance(const std::u32string& hyp, const std::u32string& ref);

struct CerResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;
  double cer = 0.0;  // (S+D+I) / reference_length, pooled over the corpus
};

/// Corpus-level character error rate: edits pooled over all pairs, divided
/// by the pooled reference length. May exceed 1 when insertions dominate.
CerResult cer(const std::vector<std::u32string>& hyps,
              const std::vector<std::u32string>& refs);

/// Renders a CSV table: header `row_header,<col>...[,avg]`, one line per row
/// name. Missing cells print as "-" and are excluded from the avg column.
/// Cell values are fixed-format with `decimals` digits.
std::string csv_table(
    const std::string& row_header, const std::vector<std::string>& row_names,
    const std::vector<std::string>& col_names,
    const std::map<std::pair<std::string, std::string>, double>& cells,
    int decimals, bool with_avg);

/// One JSON object per line: utt_id, hyp, ref, S, D, I.
std::string jsonl_utterance_log(
    const std::vector<std::string>& utt_ids,
    const std::vector<std::u32string>& hyps,
    const std::vector<std::u32string>& refs);

}  // namespace must

#endif  // MUST_METRICS_HPP
