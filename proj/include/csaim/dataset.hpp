#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "csaim/config.hpp"
#include "csaim/random.hpp"
#include "csaim/types.hpp"

namespace csaim::dataset {

struct FeatureSpec {
  std::string name;
  bool categorical = false;
  int levels = 0;      // categorical: valid raw values are 0..levels-1
  double min = 0.0;    // continuous bounds (categorical: 0..levels-1)
  double max = 1.0;

  double lo() const { return categorical ? 0.0 : min; }
  double hi() const { return categorical ? static_cast<double>(levels - 1) : max; }
};

// The eight clinical baseline items, in CSV column order. Continuous bounds
// are fixed, physiologically plausible closed ranges so the normalization
// map is independent of any particular dataset.
struct FeatureSchema {
  std::array<FeatureSpec, kChdFeatureCount> features;

  static FeatureSchema chd_default() {
    FeatureSchema s;
    s.features[0] = {"ORIGIN", true, 2, 0, 1};
    s.features[1] = {"EDUCATE", true, 4, 0, 3};
    s.features[2] = {"TOBACCO", true, 5, 0, 4};
    s.features[3] = {"ALCOHOL", false, 0, 0.0, 300.0};   // oz/mo
    s.features[4] = {"SBP", false, 0, 80.0, 260.0};      // mmHg
    s.features[5] = {"DBP", false, 0, 50.0, 150.0};      // mmHg
    s.features[6] = {"TC", false, 0, 100.0, 500.0};      // mg/dl
    s.features[7] = {"LVH", true, 2, 0, 1};
    return s;
  }
};

// A record on the raw schema scale, before normalization.
struct RawRecord {
  std::uint64_t id = 0;
  int label = 0;
  std::array<double, kChdFeatureCount> values{};
};

// Ground-truth logistic risk model over the clinical risk items. Inputs are
// standardized in-model; the noise rate flips the drawn label.
struct LabelModel {
  double intercept = -0.1;
  double c_sbp = 1.6;
  double c_dbp = 0.9;
  double c_tc = 1.3;
  double c_tobacco = 0.8;
  double c_lvh = 1.1;
  double noise_rate = 0.05;
};

struct DatasetSpec {
  std::size_t n_chd = 650;
  std::size_t n_non_chd = 650;
  LabelModel label_model;
  std::uint64_t seed = 1;
  FeatureSchema schema = FeatureSchema::chd_default();
};

namespace detail {

// Low-risk patient archetypes: compact mixture components mimicking common
// baseline profiles. Each row fixes the categorical levels and the
// continuous means; per-draw spread around the means is small, so every
// archetype forms a tight cluster in feature space. High-risk profiles are
// drawn diffusely instead (pathology presents heterogeneously), which makes
// the class structure learnable without being linearly separable.
struct Archetype {
  int origin, educate, tobacco, lvh;  // fixed levels
  double alcohol, sbp, dbp, tc;       // continuous means
};

inline constexpr std::size_t kArchetypeCount = 40;

// The table is generated once from a fixed seed: categorical levels cycle
// through heavy-exposure profiles while the clinical vitals stay in low-risk
// ranges.
inline const std::array<Archetype, kArchetypeCount>& low_risk_archetypes() {
  static const std::array<Archetype, kArchetypeCount> table = [] {
    std::array<Archetype, kArchetypeCount> t{};
    RandomSource layout(777);
    for (std::size_t i = 0; i < kArchetypeCount; ++i) {
      Archetype a;
      a.origin = static_cast<int>(i % 2);
      a.educate = 2 + static_cast<int>((i / 2) % 2);
      a.tobacco = 3 + static_cast<int>((i / 4) % 2);
      a.lvh = i % 3 == 2;
      a.alcohol = 180.0 + 110.0 * layout.uniform01();
      a.sbp = 96.0 + 24.0 * layout.uniform01();
      a.dbp = 56.0 + 18.0 * layout.uniform01();
      a.tc = 124.0 + 56.0 * layout.uniform01();
      t[i] = a;
    }
    return t;
  }();
  return table;
}

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Quantize to 1/inv units. Dividing (rather than multiplying by the inexact
// step) keeps the result the correctly rounded double of the decimal value,
// so serialized files show clean numbers.
inline double round_to_inv(double v, double inv) { return std::round(v * inv) / inv; }

inline int draw_level(int dominant, int levels, double off_rate, RandomSource& rng) {
  if (levels < 2 || rng.uniform01() >= off_rate) return dominant;
  int pick = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(levels - 1)));
  if (pick >= dominant) ++pick;
  return pick;
}

inline int weighted_level(std::span<const double> weights, RandomSource& rng) {
  double u = rng.uniform01();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  return static_cast<int>(weights.size()) - 1;
}

inline double risk_score(const LabelModel& lm, const std::array<double, kChdFeatureCount>& v) {
  const double s_sbp = (v[4] - 145.0) / 40.0;
  const double s_dbp = (v[5] - 88.0) / 25.0;
  const double s_tc = (v[6] - 235.0) / 80.0;
  const double s_tob = (v[2] - 2.0) / 2.0;
  const double s_lvh = v[7] - 0.5;
  return lm.intercept + lm.c_sbp * s_sbp + lm.c_dbp * s_dbp + lm.c_tc * s_tc +
         lm.c_tobacco * s_tob + lm.c_lvh * s_lvh;
}

// Returns the record plus its mixture component: -1 for the diffuse
// high-risk pool, otherwise the archetype index.
inline std::pair<RawRecord, int> draw_record(const DatasetSpec& spec, RandomSource& rng) {
  RawRecord rec;
  int component = -1;
  if (rng.uniform01() < 0.54) {
    // Compact low-risk cluster member: fixed categorical profile, small
    // spread around the continuous means.
    const auto& table = low_risk_archetypes();
    const std::size_t pick = rng.uniform_index(table.size());
    const Archetype& arch = table[pick];
    component = static_cast<int>(pick);
    rec.values[0] = draw_level(arch.origin, 2, 0.005, rng);
    rec.values[1] = draw_level(arch.educate, 4, 0.005, rng);
    rec.values[2] = draw_level(arch.tobacco, 5, 0.005, rng);
    rec.values[7] = draw_level(arch.lvh, 2, 0.005, rng);
    rec.values[3] = round_to_inv(clamp(rng.normal(arch.alcohol, 3.0), 1.0, 300.0), 10.0);
    rec.values[4] = round_to_inv(clamp(rng.normal(arch.sbp, 1.2), 90.0, 260.0), 1.0);
    rec.values[5] = round_to_inv(clamp(rng.normal(arch.dbp, 1.0), 55.0, 150.0), 1.0);
    rec.values[6] = round_to_inv(clamp(rng.normal(arch.tc, 3.0), 110.0, 500.0), 1.0);
  } else {
    // Heterogeneous high-risk profile: broad ranges that fully overlap the
    // low-risk clusters in every single coordinate.
    static constexpr double tobacco_weights[] = {0.15, 0.15, 0.2, 0.25, 0.25};
    rec.values[0] = rng.bernoulli(0.5) ? 1 : 0;
    rec.values[1] = static_cast<double>(rng.uniform_index(4));
    rec.values[2] = weighted_level(tobacco_weights, rng);
    rec.values[7] = rng.bernoulli(0.5) ? 1 : 0;
    rec.values[3] = round_to_inv(rng.uniform(1.0, 300.0), 10.0);
    rec.values[4] = round_to_inv(rng.uniform(92.0, 245.0), 1.0);
    rec.values[5] = round_to_inv(rng.uniform(56.0, 148.0), 1.0);
    rec.values[6] = round_to_inv(rng.uniform(115.0, 490.0), 1.0);
  }

  const double p = 1.0 / (1.0 + std::exp(-risk_score(spec.label_model, rec.values)));
  int label = rng.bernoulli(p) ? 1 : 0;
  if (rng.bernoulli(spec.label_model.noise_rate)) label = 1 - label;
  rec.label = label;
  return {rec, component};
}

}  // namespace detail

// Draws records until both class counts are filled exactly (surplus labels
// are rejected). Records are ordered diffuse pool first, then the archetype
// clusters, and numbered sequentially. Deterministic per seed.
inline std::vector<RawRecord> generate(const DatasetSpec& spec) {
  if (!(spec.label_model.noise_rate >= 0.0 && spec.label_model.noise_rate < 0.5))
    throw std::invalid_argument("generate: noise rate must be in [0, 0.5)");
  RandomSource rng(spec.seed);
  std::vector<std::pair<RawRecord, int>> drawn;
  drawn.reserve(spec.n_chd + spec.n_non_chd);
  std::size_t need_chd = spec.n_chd;
  std::size_t need_non = spec.n_non_chd;
  while (need_chd + need_non > 0) {
    auto [rec, component] = detail::draw_record(spec, rng);
    if (rec.label == 1) {
      if (need_chd == 0) continue;
      --need_chd;
    } else {
      if (need_non == 0) continue;
      --need_non;
    }
    drawn.emplace_back(rec, component);
  }
  std::stable_sort(drawn.begin(), drawn.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<RawRecord> out;
  out.reserve(drawn.size());
  for (auto& [rec, component] : drawn) {
    rec.id = out.size() + 1;
    out.push_back(rec);
  }
  return out;
}

// Min-max normalization against the fixed schema bounds (never against the
// data), so train and test share one map.
inline Sample normalize_record(const RawRecord& rec, const FeatureSchema& schema) {
  Sample s;
  s.id = rec.id;
  s.label = rec.label;
  s.features.resize(kChdFeatureCount);
  for (std::size_t i = 0; i < kChdFeatureCount; ++i) {
    const FeatureSpec& f = schema.features[i];
    const double lo = f.lo();
    const double hi = f.hi();
    const double v = rec.values[i];
    if (v < lo || v > hi)
      throw std::out_of_range("normalize: row " + std::to_string(rec.id) + ": " + f.name +
                              " value " + std::to_string(v) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    s.features[i] = (v - lo) / (hi - lo);
  }
  return s;
}

inline std::vector<Sample> normalize(const std::vector<RawRecord>& records,
                                     const FeatureSchema& schema) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const RawRecord& rec : records) out.push_back(normalize_record(rec, schema));
  return out;
}

inline RawRecord denormalize(const Sample& s, const FeatureSchema& schema) {
  if (s.features.size() != kChdFeatureCount)
    throw std::invalid_argument("denormalize: sample dimension mismatch");
  RawRecord rec;
  rec.id = s.id;
  rec.label = s.label;
  for (std::size_t i = 0; i < kChdFeatureCount; ++i) {
    const FeatureSpec& f = schema.features[i];
    rec.values[i] = f.lo() + s.features[i] * (f.hi() - f.lo());
  }
  return rec;
}

inline constexpr const char* kCsvHeader = "ID,CHD,ORIGIN,EDUCATE,TOBACCO,ALCOHOL,SBP,DBP,TC,LVH";

namespace detail {

inline std::string format_value(double v) {
  // Shortest representation that parses back to the same double. Probing
  // starts at six significant digits, which keeps values on the clinical
  // scales in plain fixed notation.
  for (int prec = 6; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_csv_number(const std::string& field, int line_no, std::vector<std::string>& errors) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    errors.push_back("line " + std::to_string(line_no) + ": non-numeric field '" + field + "'");
    return 0.0;
  }
  return v;
}

}  // namespace detail

inline void write_csv_records(const std::vector<RawRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const RawRecord& rec : records) {
    out << rec.id << ',' << rec.label;
    for (double v : rec.values) out << ',' << detail::format_value(v);
    out << '\n';
  }
}

inline void write_csv_records(const std::vector<RawRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // LF endings on every platform
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_csv_records(records, out);
}

// Denormalizes back to the raw scale and writes.
inline void write_csv(const std::vector<Sample>& samples, const std::string& path,
                      const FeatureSchema& schema = FeatureSchema::chd_default()) {
  std::vector<RawRecord> records;
  records.reserve(samples.size());
  for (const Sample& s : samples) records.push_back(denormalize(s, schema));
  write_csv_records(records, path);
}

// Reads raw records, validates against the schema and normalizes. All
// malformed rows are collected and reported together, with line numbers.
inline std::vector<Sample> read_csv(std::istream& in, const std::string& origin,
                                    const FeatureSchema& schema = FeatureSchema::chd_default()) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(origin + ": empty file, header expected");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw std::runtime_error(origin + ":1: unexpected header '" + line + "'");

  std::vector<Sample> out;
  std::vector<std::string> errors;
  std::set<std::uint64_t> seen_ids;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");

    if (fields.size() != 2 + kChdFeatureCount) {
      errors.push_back("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(2 + kChdFeatureCount) + " columns, got " +
                       std::to_string(fields.size()));
      continue;
    }
    const std::size_t errors_before = errors.size();
    RawRecord rec;
    rec.id = static_cast<std::uint64_t>(detail::parse_csv_number(fields[0], line_no, errors));
    const double label = detail::parse_csv_number(fields[1], line_no, errors);
    if (label != 0.0 && label != 1.0)
      errors.push_back("line " + std::to_string(line_no) + ": CHD label must be 0 or 1");
    rec.label = static_cast<int>(label);
    for (std::size_t i = 0; i < kChdFeatureCount; ++i)
      rec.values[i] = detail::parse_csv_number(fields[2 + i], line_no, errors);
    if (errors.size() != errors_before) continue;

    if (!seen_ids.insert(rec.id).second) {
      errors.push_back("line " + std::to_string(line_no) + ": duplicate ID " +
                       std::to_string(rec.id));
      continue;
    }
    try {
      out.push_back(normalize_record(rec, schema));
    } catch (const std::out_of_range& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = origin + ": " + std::to_string(errors.size()) + " bad row(s)";
    for (const std::string& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  return out;
}

inline std::vector<Sample> read_csv(const std::string& path,
                                    const FeatureSchema& schema = FeatureSchema::chd_default()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return read_csv(in, path, schema);
}

// Dataset spec files use the same key=value format as engine configs.
inline DatasetSpec load_dataset_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset spec: " + path);
  DatasetSpec spec;
  auto parse_count = [](const std::string& key, const std::string& value) {
    const long long v = csaim::detail::parse_integer(key, value);
    if (v < 0) throw std::invalid_argument("dataset spec key '" + key + "': must be nonnegative");
    return static_cast<std::size_t>(v);
  };
  for (const auto& [key, value] : parse_key_value_stream(in, path)) {
    if (key == "n_chd") spec.n_chd = parse_count(key, value);
    else if (key == "n_non_chd") spec.n_non_chd = parse_count(key, value);
    else if (key == "noise_rate") spec.label_model.noise_rate = csaim::detail::parse_double(key, value);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(csaim::detail::parse_integer(key, value));
    else if (key == "intercept") spec.label_model.intercept = csaim::detail::parse_double(key, value);
    else if (key == "coef_sbp") spec.label_model.c_sbp = csaim::detail::parse_double(key, value);
    else if (key == "coef_dbp") spec.label_model.c_dbp = csaim::detail::parse_double(key, value);
    else if (key == "coef_tc") spec.label_model.c_tc = csaim::detail::parse_double(key, value);
    else if (key == "coef_tobacco") spec.label_model.c_tobacco = csaim::detail::parse_double(key, value);
    else if (key == "coef_lvh") spec.label_model.c_lvh = csaim::detail::parse_double(key, value);
    else throw std::invalid_argument("unknown dataset spec key '" + key + "'");
  }
  return spec;
}

}  // namespace csaim::dataset
