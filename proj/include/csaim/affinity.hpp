#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "csaim/types.hpp"

namespace csaim {

struct AffinityReport {
  int affinity = 0;                                // matched sample count
  std::vector<std::uint64_t> misclassified_ids;    // samples the antibody gets wrong
  std::vector<std::size_t> misclassified_indices;  // same set, as positions in the input
};

// Weighted sum of the inputs, no threshold applied. Summation is in fixed
// ascending index order so results are reproducible bit for bit.
inline double raw_output(const Antibody& ab, const Sample& s) {
  if (ab.weights.size() != s.features.size())
    throw std::invalid_argument("raw_output: antibody/sample dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < ab.weights.size(); ++i) sum += ab.weights[i] * s.features[i];
  return sum;
}

// Responds (1) iff the output is at least E_sim away from the threshold.
// The boundary |output - threshold| == E_sim counts as a response.
inline int classify(const Antibody& ab, const Sample& s, double e_sim) {
  if (e_sim < 0.0) throw std::invalid_argument("classify: E_sim must be nonnegative");
  return std::abs(raw_output(ab, s) - ab.threshold) >= e_sim ? 1 : 0;
}

// 1 iff the response agrees with the sample label.
inline int matches_label(const Antibody& ab, const Sample& s, double e_sim) {
  return classify(ab, s, e_sim) == s.label ? 1 : 0;
}

// Count of matched samples only; the hot path of the evolutionary loop.
inline int affinity_count(const Antibody& ab, std::span<const Sample> ds, double e_sim) {
  int count = 0;
  for (const Sample& s : ds) count += matches_label(ab, s, e_sim);
  return count;
}

// Full evaluation: match count plus the identities of the misses.
inline AffinityReport affinity(const Antibody& ab, std::span<const Sample> ds, double e_sim) {
  AffinityReport report;
  for (std::size_t p = 0; p < ds.size(); ++p) {
    if (matches_label(ab, ds[p], e_sim)) {
      ++report.affinity;
    } else {
      report.misclassified_ids.push_back(ds[p].id);
      report.misclassified_indices.push_back(p);
    }
  }
  return report;
}

}  // namespace csaim
