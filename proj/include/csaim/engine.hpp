#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "csaim/affinity.hpp"
#include "csaim/config.hpp"
#include "csaim/memory.hpp"
#include "csaim/random.hpp"
#include "csaim/types.hpp"

namespace csaim::engine {

// Elite pools in best-affinity-first order. Clone quotas depend only on the
// rank, so they are fixed once per run. The stall counters travel with their
// elites through re-sorting and feed the memory training hook.
struct ElitePools {
  std::vector<Antibody> elites;
  std::vector<std::size_t> clone_quotas;
  std::vector<int> stall;
  int generation = 0;

  std::size_t size() const { return elites.size(); }
};

struct GenerationTrace {
  int generation = 0;
  int best_affinity = 0;      // affinity of the best antibody seen so far
  double correct_ratio = 0.0; // memory-first correct fraction on the training set
  std::size_t memory_cells = 0;
  int elite_affinity = 0;     // affinity of the current top pool (not serialized)

  friend bool operator==(const GenerationTrace&, const GenerationTrace&) = default;
};

struct RunResult {
  Antibody best;
  std::vector<GenerationTrace> traces;
};

using TraceCallback = std::function<void(const GenerationTrace&)>;

// Fresh antibody with weights and threshold uniform in [-1, 1].
inline Antibody random_antibody(std::size_t k, RandomSource& rng) {
  Antibody ab;
  ab.weights.resize(k);
  for (std::size_t i = 0; i < k; ++i) ab.weights[i] = rng.uniform(-1.0, 1.0);
  ab.threshold = rng.uniform(-1.0, 1.0);
  return ab;
}

inline std::vector<Antibody> init_population(std::size_t m, std::size_t k, RandomSource& rng) {
  if (m < 1) throw std::invalid_argument("init_population: m must be positive");
  if (k < 1) throw std::invalid_argument("init_population: k must be positive");
  std::vector<Antibody> pop;
  pop.reserve(m);
  for (std::size_t i = 0; i < m; ++i) pop.push_back(random_antibody(k, rng));
  return pop;
}

// Clone quota of the pool at 1-based rank i: round((n-i)/n * Q), halves
// rounding away from zero. Computed in exact integer arithmetic: the ratio
// lands on exact halves for many (i, n, Q) and a double evaluation misrounds
// them (e.g. 29/100*50 = 14.5 evaluates to 14.499999999999998).
inline std::size_t clone_quota(std::size_t i, std::size_t n, std::size_t Q) {
  if (i < 1 || i > n) throw std::invalid_argument("clone_quota: rank out of range");
  if (Q < 1) throw std::invalid_argument("clone_quota: Q must be at least 1");
  const unsigned long long num = static_cast<unsigned long long>(n - i) * Q;
  const unsigned long long base = num / n;
  const unsigned long long rem = num % n;
  return static_cast<std::size_t>(base + (2 * rem >= n ? 1 : 0));
}

// The n best individuals, best first, ties kept in input order. Affinities
// are evaluated here and cached on the returned elites; quotas follow rank.
inline ElitePools select_elites(std::span<const Antibody> pop, std::size_t n,
                                std::span<const Sample> ds, double e_sim, std::size_t Q = 1) {
  if (pop.size() < n) throw std::invalid_argument("select_elites: population smaller than n");
  std::vector<int> scores(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i)
    scores[i] = pop[i].affinity ? *pop[i].affinity : affinity_count(pop[i], ds, e_sim);

  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  ElitePools pools;
  pools.elites.reserve(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    Antibody ab = pop[order[rank]];
    ab.affinity = scores[order[rank]];
    pools.elites.push_back(std::move(ab));
    pools.clone_quotas.push_back(clone_quota(rank + 1, n, Q));
  }
  pools.stall.assign(n, 0);
  return pools;
}

// Hypermutation and receptor-editing shares for a parent of affinity d.
// Rates for a zero-affinity parent degenerate to an even split.
inline std::pair<double, double> mutation_rates(double d, double a) {
  if (d == 0.0) return {0.5, 0.5};
  if (d < 0.0) throw std::invalid_argument("mutation_rates: negative affinity");
  if (a < 0.0 || a > d) throw std::invalid_argument("mutation_rates: a outside [0, D]");
  return {a / d, (d - a) / d};
}

// Perturbs one uniformly chosen weight and the threshold. The literal bound
// mode draws the threshold delta from (-1, gamma_theta) instead of the
// symmetric interval.
inline Antibody hypermutate(const Antibody& ab, double gamma_w, double gamma_theta,
                            RandomSource& rng, bool literal_theta_bound = false) {
  if (gamma_w <= 0.0 || gamma_theta <= 0.0)
    throw std::invalid_argument("hypermutate: bounds must be positive");
  Antibody out = ab;
  out.affinity.reset();
  const std::size_t idx = rng.uniform_index(out.weights.size());
  out.weights[idx] += rng.uniform(-gamma_w, gamma_w);
  out.threshold += literal_theta_bound ? rng.uniform(-1.0, gamma_theta)
                                       : rng.uniform(-gamma_theta, gamma_theta);
  return out;
}

// Crossover: a uniformly chosen weight segment [p, q], p < q, is taken from
// the partner; the threshold stays. Dimension below two degrades to a copy.
inline Antibody receptor_edit(const Antibody& ab, const Antibody& partner, RandomSource& rng) {
  const std::size_t k = ab.weights.size();
  if (partner.weights.size() != k)
    throw std::invalid_argument("receptor_edit: dimension mismatch");
  if (k < 2) return ab;
  const std::size_t pairs = k * (k - 1) / 2;
  std::size_t r = rng.uniform_index(pairs);
  std::size_t p = 0;
  while (r >= k - 1 - p) {
    r -= k - 1 - p;
    ++p;
  }
  const std::size_t q = p + 1 + r;
  Antibody out = ab;
  out.affinity.reset();
  for (std::size_t i = p; i <= q; ++i) out.weights[i] = partner.weights[i];
  return out;
}

// Fittest clone; ties keep the first occurrence. Affinities are cached on
// the clones as a side effect.
inline const Antibody& best_clone(std::vector<Antibody>& clones, std::span<const Sample> ds,
                                  double e_sim) {
  if (clones.empty()) throw std::invalid_argument("best_clone: empty clone set");
  std::size_t best = 0;
  for (std::size_t i = 0; i < clones.size(); ++i) {
    if (!clones[i].affinity) clones[i].affinity = affinity_count(clones[i], ds, e_sim);
    if (*clones[i].affinity > *clones[best].affinity) best = i;
  }
  return clones[best];
}

// Elite replacement rule for 1-based pool index i: a strictly better
// candidate always wins; pool 1 never accepts a non-improvement; any other
// pool accepts one with probability exp((D(B) - D(elite)) / alpha).
inline Antibody update_elite(std::size_t i, const Antibody& elite, const Antibody& candidate,
                             double alpha, RandomSource& rng) {
  if (!elite.affinity || !candidate.affinity)
    throw std::logic_error("update_elite: affinities must be evaluated");
  const int d_elite = *elite.affinity;
  const int d_cand = *candidate.affinity;
  if (d_elite < d_cand) return candidate;
  if (i == 1) return elite;
  const double p = std::exp(static_cast<double>(d_cand - d_elite) / alpha);
  return rng.bernoulli(p) ? candidate : elite;
}

// Every t generations the c = round(beta*n) currently worst elites are
// replaced by fresh random antibodies; their affinity caches clear and
// their stall counters reset. The best pool is never touched since c < n.
inline void diversify(ElitePools& pools, double beta, int t, int generation, RandomSource& rng) {
  const std::size_t n = pools.size();
  const long long c = std::llround(beta * static_cast<double>(n));
  if (c >= static_cast<long long>(n))
    throw std::invalid_argument("diversify: round(beta*n) must stay below n");
  if (t < 1 || generation % t != 0 || c <= 0) return;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&pools](std::size_t a, std::size_t b) {
    return pools.elites[a].affinity.value_or(0) > pools.elites[b].affinity.value_or(0);
  });
  const std::size_t k = pools.elites.front().weights.size();
  for (std::size_t rank = n - static_cast<std::size_t>(c); rank < n; ++rank) {
    const std::size_t slot = order[rank];
    pools.elites[slot] = random_antibody(k, rng);
    pools.stall[slot] = 0;
  }
}

namespace detail {

inline void ensure_affinities(ElitePools& pools, std::span<const Sample> ds, double e_sim) {
  for (Antibody& ab : pools.elites)
    if (!ab.affinity) ab.affinity = affinity_count(ab, ds, e_sim);
}

// Best-first stable re-sort carrying the stall counters along.
inline void sort_pools(ElitePools& pools) {
  const std::size_t n = pools.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&pools](std::size_t a, std::size_t b) {
    return *pools.elites[a].affinity > *pools.elites[b].affinity;
  });
  std::vector<Antibody> elites;
  std::vector<int> stall;
  elites.reserve(n);
  stall.reserve(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    elites.push_back(std::move(pools.elites[order[rank]]));
    stall.push_back(pools.stall[order[rank]]);
  }
  pools.elites = std::move(elites);
  pools.stall = std::move(stall);
}

inline std::size_t argmax_affinity(const ElitePools& pools) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pools.size(); ++i)
    if (*pools.elites[i].affinity > *pools.elites[best].affinity) best = i;
  return best;
}

}  // namespace detail

// The full evolutionary loop. A null store disables the memory subsystem;
// otherwise stalled elites are trained into it each generation. Fully
// deterministic for a given config seed.
inline RunResult run(const ExperimentConfig& cfg, std::span<const Sample> ds,
                     memory::MemoryStore* store, const TraceCallback& on_trace = {}) {
  if (const auto errors = validate_config(cfg); !errors.empty())
    throw std::invalid_argument("run: invalid config: " + errors.front());
  if (ds.empty()) throw std::invalid_argument("run: empty training set");

  const std::size_t k = ds.front().features.size();
  RandomSource rng(cfg.seed);

  std::vector<Antibody> pop = init_population(cfg.m, k, rng);
  ElitePools pools = select_elites(pop, cfg.n, ds, cfg.E_sim, cfg.Q);

  Antibody best_ever = pools.elites.front();

  RunResult result;
  result.traces.reserve(static_cast<std::size_t>(cfg.G_max));

  std::vector<Antibody> clones;
  for (int g = 1; g <= cfg.G_max; ++g) {
    pools.generation = g;
    for (std::size_t slot = 0; slot < cfg.n; ++slot) {
      const std::size_t quota = pools.clone_quotas[slot];
      if (quota == 0) {
        ++pools.stall[slot];
        continue;
      }
      const Antibody& parent = pools.elites[slot];
      const int parent_affinity = *parent.affinity;
      const double d = static_cast<double>(parent_affinity);
      const auto [p_hm, p_re] = mutation_rates(d, cfg.a_fraction * d);
      (void)p_re;

      clones.assign(quota, parent);
      for (Antibody& c : clones) c.affinity.reset();
      for (std::size_t j = 0; j < quota; ++j) {
        if (rng.bernoulli(p_hm)) {
          clones[j] = hypermutate(clones[j], cfg.gamma_w, cfg.gamma_theta, rng,
                                  cfg.literal_theta_bound);
        } else if (quota > 1) {
          std::size_t partner = rng.uniform_index(quota - 1);
          if (partner >= j) ++partner;
          clones[j] = receptor_edit(clones[j], clones[partner], rng);
        }
      }
      const Antibody& fittest = best_clone(clones, ds, cfg.E_sim);
      pools.elites[slot] = update_elite(slot + 1, parent, fittest, cfg.alpha, rng);
      pools.stall[slot] = *pools.elites[slot].affinity > parent_affinity
                              ? 0
                              : pools.stall[slot] + 1;
    }

    diversify(pools, cfg.beta, cfg.t, g, rng);
    detail::ensure_affinities(pools, ds, cfg.E_sim);

    const std::size_t top = detail::argmax_affinity(pools);
    if (!best_ever.affinity || *pools.elites[top].affinity > *best_ever.affinity)
      best_ever = pools.elites[top];

    if (store) {
      memory::stall_hook(pools.elites, pools.stall, ds, *store, cfg, top);
      detail::ensure_affinities(pools, ds, cfg.E_sim);
    }

    int correct = 0;
    if (store) {
      for (const Sample& s : ds)
        correct += memory::classify_with_memory(*store, s, best_ever, cfg.E_sim, cfg.mu_theta,
                                                cfg.mu_theta_sum_mode) == s.label;
    } else {
      correct = affinity_count(best_ever, ds, cfg.E_sim);
    }

    GenerationTrace trace;
    trace.generation = g;
    trace.best_affinity = *best_ever.affinity;
    trace.correct_ratio = static_cast<double>(correct) / static_cast<double>(ds.size());
    trace.memory_cells = store ? store->size() : 0;
    trace.elite_affinity = *pools.elites[detail::argmax_affinity(pools)].affinity;
    if (on_trace) on_trace(trace);
    result.traces.push_back(trace);

    detail::sort_pools(pools);
  }

  result.best = std::move(best_ever);
  return result;
}

}  // namespace csaim::engine
