#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csaim/affinity.hpp"
#include "csaim/config.hpp"
#include "csaim/types.hpp"

namespace csaim::memory {

struct MemoryCell {
  Antibody antibody;
  std::size_t category = 0;  // stable for the cell's lifetime
  double theta_q = 0.0;      // category threshold, fixed by the category's first cell
  bool trained = false;
};

struct MemoryStore {
  std::vector<MemoryCell> cells;                     // insertion order
  std::vector<std::vector<std::size_t>> categories;  // category id -> cell indices
  std::size_t capacity = 0;
  std::size_t refusals = 0;  // insertions rejected because the store was full

  explicit MemoryStore(std::size_t cap = 1) : capacity(cap) {}

  std::size_t size() const { return cells.size(); }
  bool full() const { return cells.size() >= capacity; }
};

// Rescales an input vector into the range of an antibody's weights: every
// element passing the (d_i != 0 and h_i != 0) guard is multiplied by
// h_j / d_j, where j indexes the minimum nonzero element of d whose weight
// counterpart is also nonzero. Guarded-out elements are copied unchanged,
// and if no valid j exists the input comes back unscaled.
inline std::vector<double> scale_to_antibody(const std::vector<double>& d,
                                             const std::vector<double>& h) {
  if (d.size() != h.size())
    throw std::invalid_argument("scale_to_antibody: dimension mismatch");
  std::size_t j = d.size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] != 0.0 && h[i] != 0.0 && (j == d.size() || d[i] < d[j])) j = i;
  }
  std::vector<double> out = d;
  if (j == d.size()) return out;
  const double factor = h[j] / d[j];
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] != 0.0 && h[i] != 0.0) out[i] = d[i] * factor;
  }
  return out;
}

// Euclidean distance between the scaled input and the weight vector.
inline double scaled_distance(const std::vector<double>& d, const std::vector<double>& h) {
  const std::vector<double> scaled = scale_to_antibody(d, h);
  double sq = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double diff = scaled[i] - h[i];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

// A cell responds when the sample, rescaled into the cell's range, lies
// strictly within the response radius. In sum mode the radius is the sum of
// the scaled input elements instead of the fixed mu_theta.
inline bool responds(const MemoryCell& cell, const Sample& s, double mu_theta,
                     bool sum_mode = false) {
  if (mu_theta <= 0.0) throw std::invalid_argument("responds: mu_theta must be positive");
  const std::vector<double>& h = cell.antibody.weights;
  const std::vector<double> scaled = scale_to_antibody(s.features, h);
  double sq = 0.0;
  double element_sum = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double diff = scaled[i] - h[i];
    sq += diff * diff;
    element_sum += scaled[i];
  }
  const double radius = sum_mode ? element_sum : mu_theta;
  return std::sqrt(sq) < radius;
}

namespace detail {

// FNV-1a over the paratope bytes; canonical tie-break for medoid selection.
inline std::uint64_t antibody_hash(const Antibody& ab) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (double w : ab.weights) mix(w);
  mix(ab.threshold);
  return h;
}

}  // namespace detail

// Central member of a crowd: the antibody minimizing the sum of its scaled
// distances to every other member (the candidate is range-scaled into each
// member in turn). Distances are accumulated in sorted order so the cost is
// independent of crowd permutation; exact cost ties go to the smaller
// paratope hash.
inline std::size_t medoid_index(std::span<const Antibody> crowd) {
  if (crowd.empty()) throw std::invalid_argument("medoid_index: empty crowd");
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::uint64_t best_hash = 0;
  std::vector<double> dists;
  for (std::size_t c = 0; c < crowd.size(); ++c) {
    dists.clear();
    for (std::size_t o = 0; o < crowd.size(); ++o) {
      if (o == c) continue;
      dists.push_back(scaled_distance(crowd[c].weights, crowd[o].weights));
    }
    std::sort(dists.begin(), dists.end());
    double cost = 0.0;
    for (double v : dists) cost += v;
    const std::uint64_t hash = detail::antibody_hash(crowd[c]);
    if (cost < best_cost || (cost == best_cost && hash < best_hash)) {
      best = c;
      best_cost = cost;
      best_hash = hash;
    }
  }
  return best;
}

// Category a candidate antibody would fall into: the first category whose
// founding cell it responds to, or none.
inline std::optional<std::size_t> assign_category(const MemoryStore& store,
                                                  const Antibody& candidate, double mu_theta) {
  for (std::size_t q = 0; q < store.categories.size(); ++q) {
    const MemoryCell& rep = store.cells[store.categories[q][0]];
    if (scaled_distance(candidate.weights, rep.antibody.weights) < mu_theta)
      return q;
  }
  return std::nullopt;
}

// Promotes the crowd's medoid into the store. Returns false (and counts a
// refusal) when the store is at capacity. A new category adopts the
// inserted antibody's own threshold as theta_q.
inline bool promote_to_memory(std::span<const Antibody> crowd, MemoryStore& store,
                              double mu_theta, bool trained = true) {
  if (crowd.empty()) throw std::invalid_argument("promote_to_memory: empty crowd");
  if (store.full()) {
    ++store.refusals;
    return false;
  }
  Antibody medoid = crowd[medoid_index(crowd)];
  medoid.affinity.reset();

  MemoryCell cell;
  cell.antibody = std::move(medoid);
  cell.trained = trained;
  if (const auto q = assign_category(store, cell.antibody, mu_theta)) {
    cell.category = *q;
    cell.theta_q = store.cells[store.categories[*q][0]].theta_q;
  } else {
    cell.category = store.categories.size();
    cell.theta_q = cell.antibody.threshold;
    store.categories.emplace_back();
  }
  store.categories[cell.category].push_back(store.cells.size());
  store.cells.push_back(std::move(cell));
  return true;
}

struct TrainResult {
  Antibody antibody;
  int passes = 0;          // full passes over the training cases
  double last_error = 0.0; // pass-maximum E of the final pass
  bool converged = false;  // stopped because E fell below the floor
};

// Online delta-rule training toward the category threshold: per case,
// O = sum(w_i x_i), delta = theta_q - O, E = delta^2 / 2, then
// w_i += eta * delta * x_i. Stops when the pass-maximum E drops below
// e_min or after t_im passes. The antibody's own threshold is untouched.
inline TrainResult train_memory_cell(const Antibody& ab, std::span<const Sample> cases,
                                     double theta_q, double eta, int t_im, double e_min) {
  if (cases.empty()) throw std::invalid_argument("train_memory_cell: no training cases");
  if (!(eta >= 0.1 && eta <= 1.0))
    throw std::invalid_argument("train_memory_cell: eta outside [0.1, 1.0]");
  if (t_im < 1) throw std::invalid_argument("train_memory_cell: T_IM must be at least 1");

  TrainResult result;
  result.antibody = ab;
  result.antibody.affinity.reset();
  std::vector<double>& w = result.antibody.weights;

  for (int pass = 1; pass <= t_im; ++pass) {
    double max_error = 0.0;
    for (const Sample& s : cases) {
      if (s.features.size() != w.size())
        throw std::invalid_argument("train_memory_cell: case dimension mismatch");
      double out = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) out += w[i] * s.features[i];
      const double delta = theta_q - out;
      const double error = 0.5 * delta * delta;
      if (error > max_error) max_error = error;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += eta * delta * s.features[i];
    }
    result.passes = pass;
    result.last_error = max_error;
    if (max_error < e_min) {
      result.converged = true;
      break;
    }
  }
  return result;
}

// Per-generation hook: every elite whose affinity has been flat for tau
// generations is delta-rule trained on its misclassified cases. Only good
// training outcomes reach the store: the trained antibody is promoted (as
// the medoid of its crowd of similar elites) iff its affinity beat the
// stalled original. The elite at protect_index (the current best) is
// trained for promotion only, never rewritten in place, so the engine's
// monotone-best guarantee survives. Returns the number of training events;
// counters of trained slots reset.
inline std::size_t stall_hook(std::vector<Antibody>& elites, std::vector<int>& stall,
                              std::span<const Sample> ds, MemoryStore& store,
                              const ExperimentConfig& cfg, std::size_t protect_index) {
  if (elites.size() != stall.size())
    throw std::invalid_argument("stall_hook: elites/stall size mismatch");
  int champion = 0;
  for (Antibody& e : elites) {
    if (!e.affinity) e.affinity = affinity_count(e, ds, cfg.E_sim);
    champion = std::max(champion, *e.affinity);
  }
  std::size_t events = 0;
  for (std::size_t i = 0; i < elites.size(); ++i) {
    if (stall[i] < cfg.tau) continue;
    const AffinityReport report = affinity(elites[i], ds, cfg.E_sim);
    if (report.misclassified_indices.empty()) continue;  // nothing left to learn

    std::vector<Sample> t_ro;
    t_ro.reserve(report.misclassified_indices.size());
    for (std::size_t p : report.misclassified_indices) t_ro.push_back(ds[p]);

    const auto q = assign_category(store, elites[i], cfg.mu_theta);
    const double theta_q =
        q ? store.cells[store.categories[*q][0]].theta_q : elites[i].threshold;

    TrainResult trained =
        train_memory_cell(elites[i], t_ro, theta_q, cfg.eta, cfg.T_IM, cfg.E_min);
    trained.antibody.affinity = affinity_count(trained.antibody, ds, cfg.E_sim);

    if (*trained.antibody.affinity > report.affinity &&
        *trained.antibody.affinity >= champion) {
      std::vector<Antibody> crowd;
      crowd.push_back(trained.antibody);
      for (std::size_t j = 0; j < elites.size(); ++j) {
        if (j == i) continue;
        if (scaled_distance(elites[j].weights, trained.antibody.weights) < cfg.mu_theta)
          crowd.push_back(elites[j]);
      }
      promote_to_memory(crowd, store, cfg.mu_theta);
    }

    if (i != protect_index) elites[i] = trained.antibody;
    stall[i] = 0;
    ++events;
  }
  return events;
}

// Nearest responding cell by scaled distance; ties keep the earliest
// insertion. Null when nothing responds.
inline const MemoryCell* retrieve(const MemoryStore& store, const Sample& s, double mu_theta,
                                  bool sum_mode = false) {
  const MemoryCell* best = nullptr;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const MemoryCell& cell : store.cells) {
    if (!responds(cell, s, mu_theta, sum_mode)) continue;
    const double dist = scaled_distance(s.features, cell.antibody.weights);
    if (dist < best_dist) {
      best = &cell;
      best_dist = dist;
    }
  }
  return best;
}

// Memory-first classification: a responding cell answers, otherwise the
// fallback antibody does.
inline int classify_with_memory(const MemoryStore& store, const Sample& s,
                                const Antibody& fallback, double e_sim, double mu_theta,
                                bool sum_mode = false) {
  if (const MemoryCell* cell = retrieve(store, s, mu_theta, sum_mode))
    return classify(cell->antibody, s, e_sim);
  return classify(fallback, s, e_sim);
}

// One cell per line: category id, theta_q, threshold, then the weights.
inline void write_snapshot(const MemoryStore& store, std::ostream& out) {
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ' ' << buf;
  };
  for (const MemoryCell& cell : store.cells) {
    out << cell.category;
    put(cell.theta_q);
    put(cell.antibody.threshold);
    for (double w : cell.antibody.weights) put(w);
    out << '\n';
  }
}

}  // namespace csaim::memory
