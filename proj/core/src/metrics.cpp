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

#include "must/metrics.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "must/errors.hpp"
#include "must/text.hpp"

namespace must {

EditBreakdown edit_distance(const std::u32string& hyp, const std::u32string& ref) {
  const std::size_t n = hyp.size();
  const std::size_t m = ref.size();
  // dist[i][j]: distance between hyp[0..i) and ref[0..j).
  std::vector<std::vector<std::size_t>> dist(n + 1,
                                             std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) dist[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) dist[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = dist[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      const std::size_t del = dist[i][j - 1] + 1;  // ref char missing
      const std::size_t ins = dist[i - 1][j] + 1;  // extra hyp char
      dist[i][j] = std::min({sub, del, ins});
    }
  }

  EditBreakdown out;
  out.distance = dist[n][m];
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dist[i][j] == dist[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
      if (hyp[i - 1] != ref[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (j > 0 && dist[i][j] == dist[i][j - 1] + 1) {
      ++out.deletions;
      --j;
    } else {
      ++out.insertions;
      --i;
    }
  }
  return out;
}

CerResult cer(const std::vector<std::u32string>& hyps,
              const std::vector<std::u32string>& refs) {
  if (hyps.size() != refs.size()) {
    throw NumericalError("cer: " + std::to_string(hyps.size()) +
                         " hypotheses vs " + std::to_string(refs.size()) +
                         " references");
  }
  CerResult out;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    const EditBreakdown b = edit_distance(hyps[k], refs[k]);
    out.substitutions += b.substitutions;
    out.deletions += b.deletions;
    out.insertions += b.insertions;
    out.reference_length += refs[k].size();
  }
  if (out.reference_length == 0) {
    throw NumericalError("cer: total reference length is zero");
  }
  out.cer = static_cast<double>(out.substitutions + out.deletions +
                                out.insertions) /
            static_cast<double>(out.reference_length);
  return out;
}

std::string csv_table(
    const std::string& row_header, const std::vector<std::string>& row_names,
    const std::vector<std::string>& col_names,
    const std::map<std::pair<std::string, std::string>, double>& cells,
    int decimals, bool with_avg) {
  std::string out = row_header;
  for (const auto& c : col_names) out += "," + c;
  if (with_avg) out += ",avg";
  out += "\n";
  for (const auto& r : row_names) {
    out += r;
    double sum = 0.0;
    std::size_t present = 0;
    for (const auto& c : col_names) {
      auto it = cells.find({r, c});
      if (it == cells.end()) {
        out += ",-";
      } else {
        out += "," + fmt_f(it->second, decimals);
        sum += it->second;
        ++present;
      }
    }
    if (with_avg) {
      out += present == 0
                 ? ",-"
                 : "," + fmt_f(sum / static_cast<double>(present), decimals);
    }
    out += "\n";
  }
  return out;
}

std::string jsonl_utterance_log(
    const std::vector<std::string>& utt_ids,
    const std::vector<std::u32string>& hyps,
    const std::vector<std::u32string>& refs) {
  if (utt_ids.size() != hyps.size() || hyps.size() != refs.size()) {
    throw NumericalError("utterance log inputs differ in length");
  }
  std::string out;
  for (std::size_t k = 0; k < utt_ids.size(); ++k) {
    const EditBreakdown b = edit_distance(hyps[k], refs[k]);
    nlohmann::json row;
    row["utt_id"] = utt_ids[k];
    row["hyp"] = utf8_encode(hyps[k]);
    row["ref"] = utf8_encode(refs[k]);
    row["S"] = b.substitutions;
    row["D"] = b.deletions;
    row["I"] = b.insertions;
    out += row.dump() + "\n";
  }
  return out;
}

}  // namespace must
