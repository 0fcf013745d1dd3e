#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csaim/memory.hpp"
#include "csaim/random.hpp"
#include "oracles.hpp"

using csaim::Antibody;
using csaim::ExperimentConfig;
using csaim::RandomSource;
using csaim::Sample;
namespace memory = csaim::memory;

namespace {

Antibody make_antibody(std::vector<double> w, double theta = 0.0) {
  Antibody ab;
  ab.weights = std::move(w);
  ab.threshold = theta;
  return ab;
}

Sample make_sample(std::vector<double> x, int label = 0, std::uint64_t id = 0) {
  Sample s;
  s.features = std::move(x);
  s.label = label;
  s.id = id;
  return s;
}

memory::MemoryCell make_cell(std::vector<double> w, double theta = 0.0, double theta_q = 0.0) {
  memory::MemoryCell cell;
  cell.antibody = make_antibody(std::move(w), theta);
  cell.theta_q = theta_q;
  return cell;
}

std::vector<double> positive_vector(std::size_t k, RandomSource& rng) {
  std::vector<double> v(k);
  for (double& x : v) x = rng.uniform(0.05, 1.0);
  return v;
}

}  // namespace

TEST_CASE("range scaling: identical and proportional vectors collapse", "[memory]") {
  const std::vector<double> h = {0.4, 0.2, 0.9, 0.7};

  // d = h: the scale factor is 1, so d' = d and the distance vanishes.
  CHECK(memory::scale_to_antibody(h, h) == h);
  CHECK(memory::scaled_distance(h, h) == 0.0);

  // d = 2h: the factor is exactly one half, mapping d back onto h.
  std::vector<double> twice = h;
  for (double& v : twice) v *= 2.0;
  const auto scaled = memory::scale_to_antibody(twice, h);
  for (std::size_t i = 0; i < h.size(); ++i)
    CHECK_THAT(scaled[i], Catch::Matchers::WithinAbs(h[i], 1e-12));
}

TEST_CASE("range scaling: guarded elements pass through unscaled", "[memory]") {
  const std::vector<double> h = {0.5, 0.5, 0.5};

  // A zero input element is copied unchanged.
  const std::vector<double> with_zero = {0.0, 0.4, 0.8};
  const auto scaled = memory::scale_to_antibody(with_zero, h);
  CHECK(scaled[0] == 0.0);
  // j picks index 1 (minimum nonzero), factor 0.5/0.4.
  CHECK_THAT(scaled[1], Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(scaled[2], Catch::Matchers::WithinAbs(1.0, 1e-12));

  // No valid scale index: all-zero input comes back as-is.
  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  CHECK(memory::scale_to_antibody(zeros, h) == zeros);

  // Every candidate blocked by a zero weight: unscaled as well.
  const std::vector<double> d = {0.3, 0.6, 0.0};
  const std::vector<double> blocked = {0.0, 0.0, 1.0};
  CHECK(memory::scale_to_antibody(d, blocked) == d);

  CHECK_THROWS_AS(memory::scale_to_antibody({1.0}, h), std::invalid_argument);
}

TEST_CASE("scaled distance agrees with the reference implementation", "[memory]") {
  RandomSource rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> d(8), h(8);
    for (double& v : d) v = rng.bernoulli(0.15) ? 0.0 : rng.uniform(-1.0, 1.0);
    for (double& v : h) v = rng.bernoulli(0.15) ? 0.0 : rng.uniform(-1.0, 1.0);
    CHECK_THAT(memory::scaled_distance(d, h),
               Catch::Matchers::WithinAbs(oracle::scaled_distance_reference(d, h), 1e-9));
  }
}

TEST_CASE("response test: coincidence, scale cancellation and strict boundary", "[memory]") {
  const auto cell = make_cell({0.3, 0.5, 0.2, 0.8});

  // Sample equal to the weights: distance zero, responds for any radius.
  CHECK(memory::responds(cell, make_sample({0.3, 0.5, 0.2, 0.8}), 1e-9));

  // Proportional sample: the factor cancels, so the response holds for any
  // positive lambda regardless of radius.
  CHECK(memory::responds(cell, make_sample({0.6, 1.0, 0.4, 1.6}), 1e-9));
  CHECK(memory::responds(cell, make_sample({0.03, 0.05, 0.02, 0.08}), 1e-9));

  // Distance exactly at the radius must not respond (strict inequality).
  const auto unit_cell = make_cell({1.0, 0.0});
  const Sample off = make_sample({1.0, 0.5});  // scaled distance is exactly 0.5
  CHECK(memory::scaled_distance(off.features, unit_cell.antibody.weights) == 0.5);
  CHECK_FALSE(memory::responds(unit_cell, off, 0.5));
  CHECK(memory::responds(unit_cell, off, 0.5000001));

  CHECK_THROWS_AS(memory::responds(cell, make_sample({1, 1, 1, 1}), 0.0),
                  std::invalid_argument);
}

TEST_CASE("response is invariant under positive rescaling of the sample", "[memory]") {
  RandomSource rng(47);
  for (int trial = 0; trial < 1'000; ++trial) {
    const auto cell = make_cell(positive_vector(8, rng));
    Sample s = make_sample(positive_vector(8, rng));
    const double mu = rng.uniform(0.05, 2.0);
    const bool base = memory::responds(cell, s, mu);
    const double lambda = rng.uniform(0.1, 10.0);
    Sample scaled = s;
    for (double& v : scaled.features) v *= lambda;
    CHECK(memory::responds(cell, scaled, mu) == base);
  }
}

TEST_CASE("medoid: the central antibody of a collinear crowd is the middle one", "[memory]") {
  // Positions 0, 1 and 10 along the first axis.
  std::vector<Antibody> crowd = {
      make_antibody({0.0, 0.0}),
      make_antibody({1.0, 0.0}),
      make_antibody({10.0, 0.0}),
  };

  // Brute-force oracle over all three candidates using the reference
  // distance, accumulated independently of the library's ordering trick.
  std::size_t expected = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < crowd.size(); ++c) {
    double cost = 0.0;
    for (std::size_t o = 0; o < crowd.size(); ++o)
      if (o != c)
        cost += oracle::scaled_distance_reference(crowd[c].weights, crowd[o].weights);
    if (cost < best) {
      best = cost;
      expected = c;
    }
  }
  CHECK(expected == 1);  // middle antibody
  CHECK(memory::medoid_index(crowd) == expected);
}

TEST_CASE("medoid choice is invariant under crowd permutation", "[memory]") {
  RandomSource rng(59);
  std::vector<Antibody> crowd;
  for (int i = 0; i < 7; ++i) crowd.push_back(make_antibody(positive_vector(5, rng), 0.1 * i));

  const Antibody chosen = crowd[memory::medoid_index(crowd)];
  for (int round = 0; round < 10; ++round) {
    for (std::size_t i = crowd.size(); i > 1; --i)
      std::swap(crowd[i - 1], crowd[rng.uniform_index(i)]);
    CHECK(crowd[memory::medoid_index(crowd)] == chosen);
  }
}

TEST_CASE("promotion: singleton crowd, categorization and capacity refusal", "[memory]") {
  memory::MemoryStore store(2);
  const double mu = 0.3;

  // Singleton crowd promotes that antibody and opens category 0 with the
  // antibody's own threshold as theta_q.
  const Antibody first = make_antibody({0.5, 0.5, 0.5}, 0.42);
  REQUIRE(memory::promote_to_memory(std::vector{first}, store, mu));
  REQUIRE(store.size() == 1);
  CHECK(store.cells[0].antibody == first);
  CHECK(store.cells[0].category == 0);
  CHECK(store.cells[0].theta_q == 0.42);

  // A nearby antibody joins the category and inherits its theta_q; a far one
  // would open a new category.
  const Antibody near = make_antibody({0.51, 0.5, 0.5}, -0.9);
  REQUIRE(memory::promote_to_memory(std::vector{near}, store, mu));
  REQUIRE(store.size() == 2);
  CHECK(store.cells[1].category == 0);
  CHECK(store.cells[1].theta_q == 0.42);

  // Store at capacity: refusal is signalled and counted.
  const Antibody extra = make_antibody({-0.5, 0.1, 0.9}, 0.0);
  CHECK_FALSE(memory::promote_to_memory(std::vector{extra}, store, mu));
  CHECK(store.size() == 2);
  CHECK(store.refusals == 1);

  CHECK_THROWS_AS(memory::promote_to_memory(std::vector<Antibody>{}, store, mu),
                  std::invalid_argument);
}

TEST_CASE("categories partition the cells", "[memory]") {
  RandomSource rng(61);
  memory::MemoryStore store(40);
  for (int i = 0; i < 40; ++i)
    memory::promote_to_memory(std::vector{make_antibody(positive_vector(4, rng))}, store, 0.3);

  std::vector<int> owner(store.size(), -1);
  for (std::size_t q = 0; q < store.categories.size(); ++q) {
    for (std::size_t idx : store.categories[q]) {
      REQUIRE(idx < store.size());
      CHECK(owner[idx] == -1);  // no cell in two categories
      owner[idx] = static_cast<int>(q);
      CHECK(store.cells[idx].category == q);
    }
  }
  CHECK(std::count(owner.begin(), owner.end(), -1) == 0);
}

TEST_CASE("delta-rule training contracts the residual on a single case", "[memory]") {
  RandomSource rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    const double eta = rng.uniform(0.1, 1.0);
    // Scale the case so that eta*|x|^2 sits inside the contraction region.
    std::vector<double> x = positive_vector(8, rng);
    double norm_sq = 0.0;
    for (double v : x) norm_sq += v * v;
    const double target_gain = rng.uniform(0.2, 1.8);
    const double scale = std::sqrt(target_gain / (eta * norm_sq));
    for (double& v : x) v *= scale;
    norm_sq = target_gain / eta;

    Antibody ab = make_antibody(std::vector<double>(8, 0.0));
    for (double& w : ab.weights) w = rng.uniform(-0.25, 0.25);
    const double theta_q = rng.uniform(-1.0, 1.0);

    // Reference residual sequence from the closed-form recurrence.
    double out0 = 0.0;
    for (std::size_t i = 0; i < 8; ++i) out0 += ab.weights[i] * x[i];
    const auto deltas = oracle::delta_sequence(theta_q - out0, eta, norm_sq, 60);

    const Sample c = make_sample(x);
    const auto result =
        memory::train_memory_cell(ab, std::vector{c}, theta_q, eta, 50, 0.001);

    // The final pass error matches the recurrence at the stopping pass.
    REQUIRE(result.passes >= 1);
    const double expected_delta = deltas[static_cast<std::size_t>(result.passes - 1)];
    CHECK_THAT(result.last_error,
               Catch::Matchers::WithinAbs(0.5 * expected_delta * expected_delta, 1e-6));

    // Strict contraction pass over pass.
    for (int p = 1; p <= result.passes; ++p)
      CHECK(std::abs(deltas[static_cast<std::size_t>(p)]) <=
            std::abs(deltas[static_cast<std::size_t>(p - 1)]));

    if (std::abs(1.0 - eta * norm_sq) <= 0.9) {
      CHECK(result.converged);
      CHECK(result.last_error < 0.001);
    }
  }
}

TEST_CASE("training edge cases: zero input, already-converged, argument checks", "[memory]") {
  // An all-zero case annihilates the update: weights stay put even though
  // the residual is large.
  Antibody ab = make_antibody({0.4, -0.3, 0.2});
  const Sample zero = make_sample({0.0, 0.0, 0.0});
  const auto frozen = memory::train_memory_cell(ab, std::vector{zero}, 5.0, 0.1, 50, 0.001);
  CHECK(frozen.antibody.weights == ab.weights);
  CHECK_FALSE(frozen.converged);  // E stays at 12.5 forever
  CHECK(frozen.passes == 50);

  // Output already equal to theta_q: immediate stop with no weight change.
  const Sample hit = make_sample({1.0, 1.0, 1.0});
  const double theta_q = 0.4 - 0.3 + 0.2;
  const auto done = memory::train_memory_cell(ab, std::vector{hit}, theta_q, 0.1, 50, 0.001);
  CHECK(done.passes == 1);
  CHECK(done.converged);
  CHECK(done.antibody.weights == ab.weights);
  CHECK(done.antibody.threshold == ab.threshold);  // threshold never trained

  CHECK_THROWS_AS(memory::train_memory_cell(ab, std::vector<Sample>{}, 0.0, 0.1, 50, 0.001),
                  std::invalid_argument);
  CHECK_THROWS_AS(memory::train_memory_cell(ab, std::vector{hit}, 0.0, 0.05, 50, 0.001),
                  std::invalid_argument);
}

TEST_CASE("stall hook trains once per window and respects the protect slot", "[memory]") {
  // Two fixed elites over a tiny dataset; scripted stall counters.
  std::vector<Sample> ds;
  ds.push_back(make_sample({0.2, 0.9}, 1, 1));
  ds.push_back(make_sample({0.8, 0.1}, 0, 2));
  ds.push_back(make_sample({0.5, 0.5}, 1, 3));

  ExperimentConfig cfg;
  cfg.tau = 3;
  cfg.c_max_memory = 10;

  std::vector<Antibody> elites = {make_antibody({0.7, -0.2}, 0.05),
                                  make_antibody({-0.4, 0.6}, 0.6)};
  const std::vector<Antibody> original = elites;
  memory::MemoryStore store(cfg.c_max_memory);

  // Window not met: nothing happens.
  std::vector<int> stall = {2, 1};
  CHECK(memory::stall_hook(elites, stall, ds, store, cfg, 0) == 0);
  CHECK(store.size() == 0);
  CHECK(elites == original);

  // Slot 1 hits the window: exactly one training event, counter resets,
  // elite is rewritten in place (slot 0 is protected anyway).
  stall = {2, 3};
  CHECK(memory::stall_hook(elites, stall, ds, store, cfg, 0) == 1);
  CHECK(store.size() == 1);
  CHECK(stall[1] == 0);
  CHECK(elites[0] == original[0]);
  CHECK_FALSE(elites[1] == original[1]);

  // Protected slot: trained copy is promoted but the elite stays in place.
  elites = original;
  stall = {3, 0};
  CHECK(memory::stall_hook(elites, stall, ds, store, cfg, 0) == 1);
  CHECK(elites[0] == original[0]);
  CHECK(store.size() == 2);
  CHECK(stall[0] == 0);

  // Scripted flat stretch on a protected slot (so the elite itself never
  // changes): the counter climbs back to the window before the next event,
  // giving exactly one training per window.
  std::vector<Antibody> lone = {original[0]};
  std::vector<int> lone_stall = {0};
  std::size_t events = 0;
  for (int g = 1; g <= 9; ++g) {
    ++lone_stall[0];
    const std::size_t fired = memory::stall_hook(lone, lone_stall, ds, store, cfg, 0);
    CHECK(fired == (g % cfg.tau == 0 ? 1u : 0u));
    events += fired;
  }
  CHECK(events == 3);
  CHECK(lone[0] == original[0]);
}

TEST_CASE("stall hook keeps training when the store is full", "[memory]") {
  std::vector<Sample> ds;
  ds.push_back(make_sample({0.3, 0.4}, 1, 1));
  ds.push_back(make_sample({0.9, 0.2}, 0, 2));

  ExperimentConfig cfg;
  cfg.tau = 1;
  cfg.c_max_memory = 1;

  memory::MemoryStore store(cfg.c_max_memory);
  memory::promote_to_memory(std::vector{make_antibody({5.0, 5.0}, 1.0)}, store, cfg.mu_theta);
  REQUIRE(store.full());

  std::vector<Antibody> elites = {make_antibody({0.7, -0.2}, 0.05),
                                  make_antibody({-0.4, 0.6}, -0.3)};
  const Antibody before = elites[1];
  std::vector<int> stall = {0, 5};
  CHECK(memory::stall_hook(elites, stall, ds, store, cfg, 0) == 1);
  CHECK(store.size() == 1);          // no insertion
  CHECK(store.refusals == 1);        // but the refusal is recorded
  CHECK_FALSE(elites[1] == before);  // training still updated the elite
}

TEST_CASE("retrieval returns the nearest responding cell, earliest on ties", "[memory]") {
  memory::MemoryStore store(10);
  const Sample s = make_sample({0.5, 0.5, 0.5}, 1, 9);

  // Empty store: no cell.
  CHECK(memory::retrieve(store, s, 0.3) == nullptr);

  // One responding cell: that cell.
  memory::promote_to_memory(std::vector{make_antibody({0.5, 0.5, 0.5}, 0.1)}, store, 0.3);
  const memory::MemoryCell* only = memory::retrieve(store, s, 0.3);
  REQUIRE(only != nullptr);
  CHECK(only == &store.cells[0]);

  // Two responding cells at different distances: the nearer wins. Verify
  // against a plain linear scan.
  memory::promote_to_memory(std::vector{make_antibody({0.55, 0.5, 0.5}, 0.2)}, store, 0.3);
  const memory::MemoryCell* best = memory::retrieve(store, s, 0.5);
  const memory::MemoryCell* expected = nullptr;
  double expected_dist = std::numeric_limits<double>::infinity();
  for (const auto& cell : store.cells) {
    const double dist = oracle::scaled_distance_reference(s.features, cell.antibody.weights);
    if (dist < 0.5 && dist < expected_dist) {
      expected = &cell;
      expected_dist = dist;
    }
  }
  CHECK(best == expected);

  // Exact tie (identical weights): earliest insertion wins.
  memory::MemoryStore ties(4);
  memory::promote_to_memory(std::vector{make_antibody({0.5, 0.5, 0.5}, 0.0)}, ties, 0.3);
  memory::promote_to_memory(std::vector{make_antibody({0.5, 0.5, 0.5}, 0.9)}, ties, 0.3);
  CHECK(memory::retrieve(ties, s, 0.3) == &ties.cells[0]);
}

TEST_CASE("memory-first classification falls back only when nothing responds", "[memory]") {
  memory::MemoryStore store(4);
  const Sample s = make_sample({0.4, 0.4}, 1, 5);

  // Fallback path: zero paratope with theta 1 answers 1 for any sample.
  const Antibody fallback = make_antibody({0.0, 0.0}, 1.0);
  CHECK(memory::classify_with_memory(store, s, fallback, 0.05, 0.3) == 1);

  // A responding trained cell overrides the fallback: its output sits right
  // at its own threshold, so it answers 0, and mutating the fallback has no
  // effect anymore.
  Antibody cell_ab = make_antibody({0.4, 0.4}, 0.32);  // output 0.32 on s
  memory::promote_to_memory(std::vector{cell_ab}, store, 0.3);
  CHECK(memory::classify_with_memory(store, s, fallback, 0.05, 0.3) == 0);
  const Antibody mutated = make_antibody({9.0, 9.0}, -5.0);
  CHECK(memory::classify_with_memory(store, s, mutated, 0.05, 0.3) == 0);

  // Output is always a valid label.
  RandomSource rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Sample r = make_sample(positive_vector(2, rng), 0, trial);
    const int out = memory::classify_with_memory(store, r, fallback, 0.05, 0.3);
    CHECK((out == 0 || out == 1));
  }
}

TEST_CASE("snapshot serializes one cell per line", "[memory]") {
  memory::MemoryStore store(4);
  memory::promote_to_memory(std::vector{make_antibody({0.25, -0.5}, 0.125)}, store, 0.3);
  memory::promote_to_memory(std::vector{make_antibody({4.0, 8.0}, -1.5)}, store, 0.3);

  std::ostringstream out;
  memory::write_snapshot(store, out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::size_t category;
    double theta_q, theta, w0, w1;
    REQUIRE((fields >> category >> theta_q >> theta >> w0 >> w1));
    const auto& cell = store.cells[lines];
    CHECK(category == cell.category);
    CHECK(theta_q == cell.theta_q);
    CHECK(theta == cell.antibody.threshold);
    CHECK(w0 == cell.antibody.weights[0]);
    CHECK(w1 == cell.antibody.weights[1]);
    ++lines;
  }
  CHECK(lines == store.size());
}
