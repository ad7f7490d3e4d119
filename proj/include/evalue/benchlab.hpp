#pragma once

// Evaluation protocols over pluggable valuers: data removal, point addition,
// rank instability and timing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "evalue/dataset.hpp"
#include "evalue/error.hpp"
#include "evalue/evcore.hpp"
#include "evalue/pca_gap.hpp"
#include "evalue/report.hpp"
#include "evalue/softmax.hpp"
#include "evalue/synth.hpp"
#include "evalue/valuers.hpp"

namespace evalue::benchlab {

using datahub::EmbeddingDataset;

// A valuer by name, optionally combined with EV at weight w.
//   random | knn-shapley | data-oob | ev | index
// "ev" is the EV score alone; "index" scores each point by its position and
// exists for protocol diagnostics.
struct ValuerChoice {
  std::string name = "knn-shapley";
  double weight_w = 0.0;

  std::string label() const {
    if (weight_w <= 0.0 || name == "ev") return name;
    char buf[32];
    std::snprintf(buf, sizeof buf, "+ev(w=%g)", weight_w);
    return name + buf;
  }
};

struct StabilityConfig {
  std::size_t pool = 300;
  std::size_t fixed = 290;
  std::size_t repeats = 5;
};

struct ProtocolConfig {
  std::string valuer = "knn-shapley";
  double weight_w = 0.0;
  double removal_fraction = 0.5;
  std::vector<std::size_t> addition_steps{100, 300, 500};
  StabilityConfig stability;
  // Valuers compared by run_stability; {valuer, weight_w} when empty.
  std::vector<ValuerChoice> comparison;
  std::vector<std::int64_t> seeds{0};
  valuers::TrainConfig classifier{30, 0.01};
  std::size_t knn_k = 1000;  // clamped to the training-set size
  std::size_t num_models = 100;
  int oob_epochs = 10;
  bool ridge = false;

  ValuerChoice primary() const { return {valuer, weight_w}; }

  void validate() const {
    if (!(removal_fraction >= 0.0 && removal_fraction < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "removal_fraction must lie in [0, 1)");
    }
    if (!(weight_w >= 0.0 && weight_w <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "weight_w must lie in [0, 1]");
    }
    if (stability.fixed >= stability.pool) {
      throw Error(ErrorCode::kInvalidArgument, "stability.fixed must be < stability.pool");
    }
    if (stability.repeats < 2) throw Error(ErrorCode::kInvalidArgument, "stability.repeats must be >= 2");
    if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "at least one seed is required");
  }
};

inline Json to_json(const ValuerChoice& v) { return {{"name", v.name}, {"weight_w", v.weight_w}}; }

inline Json to_json(const ProtocolConfig& cfg) {
  Json j;
  j["valuer"] = cfg.valuer;
  j["weight_w"] = cfg.weight_w;
  j["removal_fraction"] = cfg.removal_fraction;
  j["addition_steps"] = cfg.addition_steps;
  j["stability"] = {{"pool", cfg.stability.pool},
                    {"fixed", cfg.stability.fixed},
                    {"repeats", cfg.stability.repeats}};
  Json comparison = Json::array();
  for (const auto& c : cfg.comparison) comparison.push_back(to_json(c));
  j["comparison"] = comparison;
  j["seeds"] = cfg.seeds;
  j["classifier"] = {{"epochs", cfg.classifier.epochs}, {"lr", cfg.classifier.lr}};
  j["knn_k"] = cfg.knn_k;
  j["num_models"] = cfg.num_models;
  j["oob_epochs"] = cfg.oob_epochs;
  j["ridge"] = cfg.ridge;
  return j;
}

// Records what a valuation did beyond producing scores.
struct ValuationNotes {
  std::vector<std::size_t> never_out_of_bag;
  double ridge_applied = 0.0;
  bool degenerate_spectrum = false;
};

// EV scores of a training set; features are re-centered first because a
// subset of a centered pool is not itself centered.
inline ValueVector ev_values(const EmbeddingDataset& train, bool ridge,
                             ValuationNotes* notes = nullptr) {
  Matrix rows = train.features;
  datahub::center_columns(rows);
  evcore::EvOptions opts;
  opts.ridge = ridge;
  evcore::EvDiagnostics diag;
  auto out = evcore::ev_scores(rows, opts, &diag);
  if (notes != nullptr) {
    notes->ridge_applied = diag.ridge_applied;
    notes->degenerate_spectrum = diag.degenerate;
  }
  return out;
}

inline bool needs_validation(const std::string& name) { return name == "knn-shapley"; }

inline ValueVector compute_values(const EmbeddingDataset& train, const EmbeddingDataset* val,
                                  const ValuerChoice& choice, const ProtocolConfig& cfg,
                                  std::int64_t seed, ValuationNotes* notes = nullptr) {
  ValueVector base;
  if (choice.name == "ev") {
    auto ev = ev_values(train, cfg.ridge, notes);
    ev.seed = seed;
    return ev;
  } else if (choice.name == "random") {
    base = valuers::random_valuer(train.size(), seed);
  } else if (choice.name == "index") {
    base.method = "index";
    base.scores.resize(train.size());
    std::iota(base.scores.begin(), base.scores.end(), 0.0);
  } else if (choice.name == "knn-shapley") {
    if (val == nullptr || val->size() == 0) {
      throw Error(ErrorCode::kEmptyValidation, "knn-shapley needs a validation set");
    }
    valuers::ShapleyConfig sc;
    sc.k_neighbors = std::min(cfg.knn_k, train.size());
    base = valuers::knn_shapley(train, *val, sc);
  } else if (choice.name == "data-oob") {
    valuers::DataOobConfig oc;
    oc.num_models = cfg.num_models;
    oc.trainer = {cfg.oob_epochs, cfg.classifier.lr};
    auto result = valuers::data_oob(train, oc, seed);
    if (notes != nullptr) notes->never_out_of_bag = result.never_out_of_bag;
    base = std::move(result.values);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown valuer '" + choice.name + "'");
  }
  base.seed = seed;
  if (choice.weight_w <= 0.0) return base;
  const auto ev = ev_values(train, cfg.ridge, notes);
  return evcore::combine(base, ev, choice.weight_w);
}

namespace detail {

inline ExperimentReport new_report(const std::string& protocol, const ProtocolConfig& cfg) {
  ExperimentReport report;
  report.protocol = protocol;
  report.config = to_json(cfg);
  report.generator = datahub::kGeneratorIdentity;
  report.notes["tie_break"] = "ascending point index";
  report.notes["aggregate_std"] = "sample standard deviation (divisor k-1)";
  return report;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::vector<std::size_t> complement_sorted(std::size_t n, std::span<const std::size_t> drop) {
  std::vector<std::uint8_t> dropped(n, 0);
  for (auto i : drop) dropped[i] = 1;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) keep.push_back(i);
  }
  return keep;
}

}  // namespace detail

// Values the training set, drops the highest-valued removal_fraction (ties by
// index), retrains on the rest and reports OOD accuracy. Lower is better.
inline ExperimentReport run_removal(const EmbeddingDataset& train, const EmbeddingDataset& val,
                                    const EmbeddingDataset& ood_test, const ProtocolConfig& cfg) {
  cfg.validate();
  auto report = detail::new_report("removal", cfg);
  const std::size_t n = train.size();
  const auto drop_count =
      static_cast<std::size_t>(std::floor(cfg.removal_fraction * static_cast<double>(n)));
  if (drop_count >= n) throw Error(ErrorCode::kInvalidArgument, "removal would drop every point");
  for (const auto seed : cfg.seeds) {
    SeedEntry entry;
    entry.seed = seed;
    ValuationNotes notes;
    const auto start = std::chrono::steady_clock::now();
    const auto values = compute_values(train, &val, cfg.primary(), cfg, seed, &notes);
    entry.metrics["time_valuation_s"] = detail::seconds_since(start);
    const auto order = datahub::rank_by_score(values.scores);
    const auto keep =
        detail::complement_sorted(n, std::span<const std::size_t>(order).first(drop_count));
    const auto model = valuers::train_softmax(datahub::subset(train, keep), cfg.classifier);
    entry.metrics["ood_accuracy"] = valuers::evaluate(model, ood_test);
    entry.metrics["val_accuracy"] = valuers::evaluate(model, val);
    entry.metrics["kept"] = static_cast<double>(keep.size());
    entry.metrics["never_out_of_bag"] = static_cast<double>(notes.never_out_of_bag.size());
    entry.rows.push_back({0, "ood_accuracy", entry.metrics["ood_accuracy"]});
    report.per_seed.push_back(std::move(entry));
  }
  report.notes["valuer"] = cfg.primary().label();
  report.finalize();
  report.validate();
  return report;
}

// Values the pool (the initial set serves as validation data), then trains on
// initial + the top-valued prefix of the pool at each configured step count.
inline ExperimentReport run_addition(const EmbeddingDataset& initial, const EmbeddingDataset& pool,
                                     const EmbeddingDataset& ood_test, const ProtocolConfig& cfg) {
  cfg.validate();
  for (const auto step : cfg.addition_steps) {
    if (step > pool.size()) {
      throw Error(ErrorCode::kStepExceedsPool, "step " + std::to_string(step) + " exceeds pool of " +
                                                   std::to_string(pool.size()));
    }
  }
  auto report = detail::new_report("addition", cfg);
  for (const auto seed : cfg.seeds) {
    SeedEntry entry;
    entry.seed = seed;
    ValuationNotes notes;
    const auto start = std::chrono::steady_clock::now();
    const auto values = compute_values(pool, &initial, cfg.primary(), cfg, seed, &notes);
    entry.metrics["time_valuation_s"] = detail::seconds_since(start);
    const auto order = datahub::rank_by_score(values.scores);
    double total = 0.0;
    for (const auto step : cfg.addition_steps) {
      const auto added = datahub::subset(pool, std::span<const std::size_t>(order).first(step));
      const auto model = valuers::train_softmax(datahub::concat(initial, added), cfg.classifier);
      const double acc = valuers::evaluate(model, ood_test);
      entry.rows.push_back({static_cast<std::int64_t>(step), "ood_accuracy", acc});
      entry.metrics["ood_accuracy@" + std::to_string(step)] = acc;
      total += acc;
    }
    if (!cfg.addition_steps.empty()) {
      entry.metrics["mean_ood_accuracy"] = total / static_cast<double>(cfg.addition_steps.size());
    }
    report.per_seed.push_back(std::move(entry));
  }
  report.notes["valuer"] = cfg.primary().label();
  report.notes["validation_set"] = "initial training set";
  report.finalize();
  report.validate();
  return report;
}

// Ranks (1 = highest score) of every point, ties by ascending index.
inline std::vector<std::size_t> score_ranks(std::span<const double> scores) {
  const auto order = datahub::rank_by_score(scores);
  std::vector<std::size_t> rank(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos + 1;
  return rank;
}

// Sample standard deviation across repeats of a fixed point's rank.
inline double rank_std(std::span<const double> ranks) {
  double mean = 0.0;
  for (double r : ranks) mean += r;
  mean /= static_cast<double>(ranks.size());
  double ss = 0.0;
  for (double r : ranks) ss += (r - mean) * (r - mean);
  return std::sqrt(ss / static_cast<double>(ranks.size() - 1));
}

// Per meta-seed: shuffle the source, keep `fixed` points, and for each repeat
// append a fresh block of replacement points (never reused across repeats).
// Points left over after the replacement blocks form the validation set.
inline ExperimentReport run_stability(const EmbeddingDataset& source, const ProtocolConfig& cfg) {
  cfg.validate();
  const auto& st = cfg.stability;
  const std::size_t varied = st.pool - st.fixed;
  const std::size_t required = st.pool + varied * st.repeats;
  if (source.size() < required) {
    throw Error(ErrorCode::kInsufficientSource,
                "stability needs " + std::to_string(required) + " source points, got " +
                    std::to_string(source.size()));
  }
  auto comparison = cfg.comparison;
  if (comparison.empty()) comparison.push_back(cfg.primary());
  auto report = detail::new_report("stability", cfg);
  report.notes["replacement_draw"] = "without reuse across repeats";
  report.notes["rank"] = "ordinal rank by descending score, ties by ascending index";
  report.notes["rank_std"] = "sample standard deviation across repeats";

  for (const auto seed : cfg.seeds) {
    std::vector<std::size_t> perm(source.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::span<const std::size_t> all(perm);
    const auto fixed = all.first(st.fixed);
    const std::size_t val_begin = st.fixed + varied * st.repeats;
    const auto val_idx = all.subspan(val_begin);
    const auto val = datahub::subset(source, val_idx);

    SeedEntry entry;
    entry.seed = seed;
    for (const auto& choice : comparison) {
      if (needs_validation(choice.name) && val.size() == 0) {
        throw Error(ErrorCode::kInsufficientSource, choice.name + " needs leftover validation points");
      }
      // ranks[r][i]: rank of fixed point i in repeat r
      std::vector<Vector> ranks(st.fixed, Vector(st.repeats));
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t r = 0; r < st.repeats; ++r) {
        std::vector<std::size_t> members(fixed.begin(), fixed.end());
        const auto block = all.subspan(st.fixed + r * varied, varied);
        members.insert(members.end(), block.begin(), block.end());
        const auto subset = datahub::subset(source, members);
        const std::int64_t repeat_seed = seed * 1000003 + static_cast<std::int64_t>(r);
        const auto values = compute_values(subset, &val, choice, cfg, repeat_seed);
        const auto rank = score_ranks(values.scores);
        for (std::size_t i = 0; i < st.fixed; ++i) ranks[i][r] = static_cast<double>(rank[i]);
      }
      const std::string label = choice.label();
      Vector stds(st.fixed);
      for (std::size_t i = 0; i < st.fixed; ++i) {
        stds[i] = rank_std(ranks[i]);
        entry.rows.push_back({static_cast<std::int64_t>(i), "rank_std/" + label, stds[i]});
      }
      entry.metrics["mean_rank_std/" + label] =
          std::accumulate(stds.begin(), stds.end(), 0.0) / static_cast<double>(st.fixed);
      entry.metrics["time_" + label + "_s"] = detail::seconds_since(start);
    }
    report.per_seed.push_back(std::move(entry));
  }
  report.finalize();
  report.validate();
  return report;
}

struct TimingConfig {
  int warmup = 3;
  int measured = 5;
  std::vector<std::string> baselines{"random", "knn-shapley", "data-oob"};
  bool include_exact = true;
};

inline double median(Vector v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Median wall-clock of `fn` over `measured` runs after `warmup` runs.
inline double time_median(const std::function<void()>& fn, int warmup, int measured) {
  for (int i = 0; i < warmup; ++i) fn();
  Vector times;
  for (int i = 0; i < measured; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    times.push_back(detail::seconds_since(start));
  }
  return median(std::move(times));
}

inline ExperimentReport run_timing(const EmbeddingDataset& train, const ProtocolConfig& cfg = {},
                                   const TimingConfig& timing = {}) {
  if (train.size() < 100) throw Error(ErrorCode::kInvalidArgument, "timing needs n >= 100");
  if (timing.measured < 1) throw Error(ErrorCode::kInvalidArgument, "need >= 1 measured run");
  auto report = detail::new_report("timing", cfg);
  report.notes["clock"] = "std::chrono::steady_clock";
  report.notes["warmup"] = timing.warmup;
  report.notes["measured"] = timing.measured;
  report.notes["statistic"] = "median";
  report.notes["n"] = train.size();
  report.notes["d"] = train.dim();
  report.notes["threads"] = max_threads();

  Matrix rows = train.features;
  datahub::center_columns(rows);
  evcore::EvOptions opts;
  opts.ridge = cfg.ridge;
  SeedEntry entry;
  entry.seed = cfg.seeds.front();
  const double approx = time_median([&] { (void)evcore::ev_scores(rows, opts); }, timing.warmup,
                                    timing.measured);
  entry.metrics["time_ev_approx_s"] = approx;
  if (timing.include_exact) {
    const double exact = time_median([&] { (void)evcore::ev_scores_exact(rows, opts); },
                                     timing.warmup, timing.measured);
    entry.metrics["time_ev_exact_s"] = exact;
    entry.metrics["time_ratio_exact_over_approx"] = exact / approx;
  }
  for (const auto& name : timing.baselines) {
    const ValuerChoice choice{name, 0.0};
    const double t = time_median(
        [&] { (void)compute_values(train, &train, choice, cfg, entry.seed); }, timing.warmup,
        timing.measured);
    entry.metrics["time_" + name + "_s"] = t;
  }
  for (const auto& [name, value] : entry.metrics) entry.rows.push_back({0, name, value});
  report.per_seed.push_back(std::move(entry));
  report.finalize();
  report.validate();
  return report;
}

// PCA variance gap of the top and bottom valued groups, as a report.
inline ExperimentReport run_pca_gap(const EmbeddingDataset& train, const EmbeddingDataset* val,
                                    const ProtocolConfig& cfg, double top_fraction) {
  cfg.validate();
  auto report = detail::new_report("pca-gap", cfg);
  report.notes["top_fraction"] = top_fraction;
  report.notes["components"] = 3;
  for (const auto seed : cfg.seeds) {
    const auto values = compute_values(train, val, cfg.primary(), cfg, seed);
    const auto gap = datahub::pca_variance_gap(train, values, top_fraction);
    SeedEntry entry;
    entry.seed = seed;
    entry.metrics["var_top"] = gap.var_top;
    entry.metrics["var_bottom"] = gap.var_bottom;
    entry.rows.push_back({0, "var_top", gap.var_top});
    entry.rows.push_back({0, "var_bottom", gap.var_bottom});
    report.per_seed.push_back(std::move(entry));
  }
  report.notes["valuer"] = cfg.primary().label();
  report.finalize();
  report.validate();
  return report;
}

}  // namespace evalue::benchlab
