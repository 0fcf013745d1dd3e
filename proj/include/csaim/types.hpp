#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace csaim {

// Number of clinical features in the default schema.
inline constexpr std::size_t kChdFeatureCount = 8;

// One record: feature vector normalized to [0,1] plus a binary class label.
struct Sample {
  std::uint64_t id = 0;
  int label = 0;  // 0 or 1
  std::vector<double> features;
};

// Candidate recognizer: a linear form with threshold. The paratope is
// (weights..., threshold); `affinity` caches the last evaluation against a
// fixed training set and is cleared by every mutating operation.
struct Antibody {
  std::vector<double> weights;
  double threshold = 0.0;
  std::optional<int> affinity;

  std::size_t dimension() const { return weights.size(); }

  friend bool operator==(const Antibody& a, const Antibody& b) {
    return a.weights == b.weights && a.threshold == b.threshold;
  }
};

}  // namespace csaim
