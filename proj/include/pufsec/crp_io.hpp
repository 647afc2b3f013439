#pragma once

// pufcrp v1: a header line
//   pufcrp v1 arch=<arbiter|xor|lw> stages=<n> k=<k> count=<m> seed=<s>
// followed by m lines "<n-char bitstring> <+1|-1>", LF endings, no trailing blank line.

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pufsec/error.hpp"
#include "pufsec/puf.hpp"
#include "pufsec/text.hpp"

namespace pufsec {

inline void write_crps(std::ostream& out, const CrpDataset& ds) {
  out << "pufcrp v1 arch=" << arch_name(ds.arch.arch) << " stages=" << ds.arch.stages
      << " k=" << ds.arch.k << " count=" << ds.size() << " seed=" << ds.seed << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i)
    out << to_bitstring(ds.challenges[i]) << (ds.responses[i] > 0 ? " +1" : " -1") << '\n';
}

inline std::string crps_to_string(const CrpDataset& ds) {
  std::ostringstream s;
  write_crps(s, ds);
  return s.str();
}

inline CrpDataset read_crps(std::istream& in) {
  const auto lines = text::read_lines(in);
  if (lines.empty()) throw ParseError(1, "empty CRP file");
  const auto tokens = text::split(lines[0], ' ');
  if (tokens.size() < 2 || tokens[0] != "pufcrp" || tokens[1] != "v1")
    throw ParseError(1, "expected 'pufcrp v1' header");
  const auto fields = text::header_fields(tokens, 2, 1);

  CrpDataset ds;
  try {
    ds.arch.arch = parse_arch_name(text::require_field(fields, "arch", 1));
  } catch (const InvalidArgument& e) {
    throw ParseError(1, e.what());
  }
  ds.arch.stages = text::parse_or_throw<int>(text::require_field(fields, "stages", 1), 1, "stages");
  ds.arch.k = text::parse_or_throw<int>(text::require_field(fields, "k", 1), 1, "k");
  const auto count = text::parse_or_throw<std::size_t>(text::require_field(fields, "count", 1), 1, "count");
  ds.seed = text::parse_or_throw<std::uint64_t>(text::require_field(fields, "seed", 1), 1, "seed");
  try {
    validate(ds.arch);
  } catch (const InvalidArgument& e) {
    throw ParseError(1, e.what());
  }

  const std::size_t data_lines = lines.size() - 1;
  if (data_lines != count)
    throw ParseError(data_lines < count ? lines.size() + 1 : count + 2,
                     "header declares count=" + std::to_string(count) + " but file has " +
                         std::to_string(data_lines) + " data lines");

  const auto n = static_cast<std::size_t>(ds.arch.stages);
  ds.challenges.reserve(count);
  ds.responses.reserve(count);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::size_t lineno = i + 1;
    if (line.size() != n + 3 || line[n] != ' ')
      throw ParseError(lineno, "expected '<" + std::to_string(n) + "-bit challenge> <+1|-1>'");
    Challenge c(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (line[j] != '0' && line[j] != '1') throw ParseError(lineno, "challenge must be a bitstring");
      c[j] = static_cast<std::uint8_t>(line[j] - '0');
    }
    const std::string_view r(line.data() + n + 1, 2);
    if (r != "+1" && r != "-1") throw ParseError(lineno, "response must be +1 or -1");
    ds.challenges.push_back(std::move(c));
    ds.responses.push_back(r == "+1" ? 1 : -1);
  }
  return ds;
}

inline CrpDataset crps_from_string(const std::string& s) {
  std::istringstream in(s);
  return read_crps(in);
}

}  // namespace pufsec
