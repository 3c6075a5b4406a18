#pragma once

// Text and JSON exports: null distributions (CSV), cluster tables and
// comparison reports (JSON), and the sign-flip matrix text format.
//
// Sign-flip matrix: one row per randomization, one whitespace-separated
// entry per subject, each "+1", "1" or "-1" (a Unicode minus is accepted).
// Blank lines and lines starting with '#' are ignored. The first row must be
// the identity.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "etfce/error.hpp"
#include "etfce/forest.hpp"
#include "etfce/inference.hpp"

namespace etfce::formats {

using nlohmann::json;

inline std::vector<std::vector<std::int8_t>> parse_sign_matrix(std::istream& in, const std::string& source) {
  std::vector<std::vector<std::int8_t>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::size_t row_no = rows.size() + 1;
    std::istringstream tokens(line);
    std::vector<std::int8_t> row;
    std::string tok;
    while (tokens >> tok) {
      if (tok.rfind("\xE2\x88\x92", 0) == 0) tok = "-" + tok.substr(3);  // U+2212
      if (tok == "+1" || tok == "1")
        row.push_back(1);
      else if (tok == "-1")
        row.push_back(-1);
      else
        throw FormatError(source + ": row " + std::to_string(row_no) + " (line " + std::to_string(line_no) +
                          "): entry '" + tok + "' is not +1 or -1");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(source + ": row " + std::to_string(row_no) + " has " + std::to_string(row.size()) +
                        " entries, expected " + std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(source + ": no sign-flip rows");
  for (auto s : rows.front())
    if (s != 1) throw FormatError(source + ": row 1 must be the identity (all +1)");
  return rows;
}

/// Sign-flip plan from a matrix file; row 1 is the identity.
inline RandomizationPlan read_permutation_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  RandomizationPlan plan;
  plan.kind = RandomizationKind::sign_flip;
  plan.sign_patterns = parse_sign_matrix(in, path);
  plan.n_perm = static_cast<std::int64_t>(plan.sign_patterns.size()) - 1;
  return plan;
}

inline void write_sign_matrix(std::ostream& out, const Randomizer& randomizer) {
  std::vector<std::int8_t> s(randomizer.n_subjects());
  for (std::int64_t b = 0; b <= randomizer.n_perm(); ++b) {
    randomizer.signs(b, s);
    for (std::size_t j = 0; j < s.size(); ++j) out << (j ? " " : "") << (s[j] > 0 ? "+1" : "-1");
    out << '\n';
  }
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

/// CSV with header `b,statistic,max_value`, rows b = 1..n_perm per statistic and tail.
/// Statistic names carry a tail suffix when both tails were run.
inline void write_null_csv(std::ostream& out, const InferenceResult& result) {
  out << "b,statistic,max_value\n";
  for (const auto& s : result.statistics) {
    for (const auto& t : s.tails) {
      std::string name = to_string(s.kind);
      if (s.tails.size() > 1 || t.tail == Tail::negative) name += t.tail == Tail::negative ? "_neg" : "_pos";
      for (std::size_t b = 0; b < t.null.maxima.size(); ++b)
        out << (b + 1) << ',' << name << ',' << format_double(t.null.maxima[b]) << '\n';
    }
  }
}

inline json cluster_table_json(const ClusterTable& table, const Mask& mask, const std::vector<double>* p = nullptr,
                               const std::vector<double>* statistic = nullptr) {
  json clusters = json::array();
  for (std::size_t c = 0; c < table.clusters.size(); ++c) {
    const auto& cl = table.clusters[c];
    json members = json::array();
    for (Voxel v : cl.members) {
      const auto xyz = mask.coords(v);
      members.push_back({xyz[0], xyz[1], xyz[2]});
    }
    json entry = {{"index", c + 1}, {"extent", cl.extent}, {"mass", cl.mass}, {"members", members}};
    if (statistic) entry["statistic"] = (*statistic)[c];
    if (p) entry["p_fwe"] = (*p)[c];
    clusters.push_back(std::move(entry));
  }
  return {{"cdt", table.cdt}, {"n_clusters", table.clusters.size()}, {"clusters", clusters}};
}

inline json cluster_results_json(const InferenceResult& result, const Mask& mask) {
  json out = json::array();
  for (const auto& s : result.statistics) {
    if (s.kind == StatisticKind::tfce) continue;
    for (const auto& t : s.tails) {
      json entry = cluster_table_json(t.clusters, mask, &t.cluster_p, &t.cluster_statistic);
      entry["statistic"] = to_string(s.kind);
      entry["tail"] = to_string(t.tail);
      entry["n_perm"] = result.n_perm;
      out.push_back(std::move(entry));
    }
  }
  return out;
}

inline json comparison_json(const ComparisonReport& r) {
  return {{"n_voxels", r.n_voxels},
          {"alpha", r.alpha},
          {"d_plus_pct", r.d_plus_pct},
          {"d_minus_pct", r.d_minus_pct},
          {"mean_d_plus", r.mean_d_plus},
          {"mean_abs_d_minus", r.mean_abs_d_minus},
          {"gain_pct", r.gain_pct},
          {"loss_pct", r.loss_pct},
          {"gain_voxels", r.gain_voxels.size()},
          {"loss_voxels", r.loss_voxels.size()}};
}

}  // namespace etfce::formats
