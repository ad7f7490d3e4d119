#include "evalue/benchlab.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "evalue/synth.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace evalue::benchlab {
namespace {

using datahub::EmbeddingDataset;

struct Split {
  EmbeddingDataset train, val, ood;
};

Split small_shift(std::uint64_t seed, std::size_t n_train = 200, std::size_t n_val = 100) {
  datahub::ShiftSpec spec;
  spec.n_id = n_train + n_val;
  spec.n_ood = 200;
  spec.d = 8;
  spec.num_classes = 3;
  spec.seed = seed;
  auto pair = datahub::synth_shift_pair(spec);
  std::vector<std::size_t> a(n_train), b(n_val);
  std::iota(a.begin(), a.end(), std::size_t{0});
  std::iota(b.begin(), b.end(), n_train);
  return {datahub::subset(pair.id_set, a), datahub::subset(pair.id_set, b), pair.ood_set};
}

TEST(Removal, ZeroFractionIsFullTraining) {
  const auto s = small_shift(1);
  ProtocolConfig cfg;
  cfg.removal_fraction = 0.0;
  cfg.seeds = {0, 1};
  const auto report = run_removal(s.train, s.val, s.ood, cfg);
  const auto full = valuers::train_softmax(s.train, cfg.classifier);
  for (const auto& entry : report.per_seed) {
    EXPECT_EQ(entry.metrics.at("ood_accuracy"), valuers::evaluate(full, s.ood));
    EXPECT_EQ(entry.metrics.at("kept"), 200.0);
  }
}

TEST(Removal, DropsHighestScores) {
  const auto s = small_shift(2);
  ProtocolConfig cfg;
  cfg.valuer = "index";
  const auto report = run_removal(s.train, s.val, s.ood, cfg);
  std::vector<std::size_t> low(100);
  std::iota(low.begin(), low.end(), std::size_t{0});
  const auto model = valuers::train_softmax(datahub::subset(s.train, low), cfg.classifier);
  EXPECT_EQ(report.per_seed[0].metrics.at("ood_accuracy"), valuers::evaluate(model, s.ood));
  EXPECT_EQ(report.per_seed[0].metrics.at("kept"), 100.0);
}

TEST(Removal, RandomValuerMatchesRandomHalf) {
  const auto s = small_shift(3, 400, 100);
  ProtocolConfig cfg;
  cfg.valuer = "random";
  cfg.seeds.clear();
  for (std::int64_t seed = 0; seed < 20; ++seed) cfg.seeds.push_back(seed);
  const auto report = run_removal(s.train, s.val, s.ood, cfg);
  double direct = 0.0;
  for (std::int64_t seed = 100; seed < 120; ++seed) {
    std::vector<std::size_t> perm(400);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(200);
    direct += valuers::evaluate(valuers::train_softmax(datahub::subset(s.train, perm)), s.ood);
  }
  EXPECT_NEAR(report.aggregate.at("ood_accuracy").mean, direct / 20.0, 0.03);
  EXPECT_EQ(report.aggregate.at("ood_accuracy").count, 20u);
}

TEST(Removal, EvCombinationRunsAndIsRecorded) {
  const auto s = small_shift(4);
  ProtocolConfig cfg;
  cfg.valuer = "knn-shapley";
  cfg.weight_w = 0.5;
  const auto report = run_removal(s.train, s.val, s.ood, cfg);
  EXPECT_EQ(report.notes.at("valuer"), "knn-shapley+ev(w=0.5)");
  EXPECT_EQ(report.config.at("weight_w"), 0.5);
}

TEST(Addition, EndpointsReduceToPlainTraining) {
  const auto s = small_shift(5);
  ProtocolConfig cfg;
  cfg.addition_steps = {0, 200};
  cfg.valuer = "data-oob";
  cfg.num_models = 10;
  const auto report = run_addition(s.val, s.train, s.ood, cfg);
  const auto& m = report.per_seed[0].metrics;
  EXPECT_EQ(m.at("ood_accuracy@0"), valuers::evaluate(valuers::train_softmax(s.val), s.ood));
  const auto everything = datahub::concat(s.val, s.train);
  const double all_acc = valuers::evaluate(valuers::train_softmax(everything), s.ood);
  EXPECT_EQ(m.at("ood_accuracy@200"), all_acc);

  // Removal with fraction 0 on the union agrees with the full-pool addition.
  ProtocolConfig removal;
  removal.removal_fraction = 0.0;
  const auto r = run_removal(everything, s.val, s.ood, removal);
  EXPECT_EQ(r.per_seed[0].metrics.at("ood_accuracy"), all_acc);
}

TEST(Addition, StepExceedsPool) {
  const auto s = small_shift(6);
  ProtocolConfig cfg;
  cfg.addition_steps = {100, 201};
  try {
    run_addition(s.val, s.train, s.ood, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStepExceedsPool);
  }
}

TEST(Stability, IndexValuerIsPerfectlyStable) {
  std::mt19937_64 rng(81);
  const auto source = testing::random_dataset(400, 4, 2, rng);
  ProtocolConfig cfg;
  cfg.comparison = {{"index", 0.0}};
  const auto report = run_stability(source, cfg);
  EXPECT_EQ(report.aggregate.at("mean_rank_std/index").mean, 0.0);
}

TEST(Stability, RandomValuerMatchesUniformRankSpread) {
  std::mt19937_64 rng(82);
  const auto source = testing::random_dataset(400, 4, 2, rng);
  ProtocolConfig cfg;
  cfg.comparison = {{"random", 0.0}};
  cfg.seeds = {0, 1, 2};
  const auto report = run_stability(source, cfg);
  const double expected = std::sqrt((300.0 * 300.0 - 1.0) / 12.0);
  EXPECT_NEAR(report.aggregate.at("mean_rank_std/random").mean, expected, 0.15 * expected);
}

TEST(Stability, InsufficientSource) {
  std::mt19937_64 rng(83);
  ProtocolConfig cfg;
  try {
    run_stability(testing::random_dataset(349, 4, 2, rng), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSource);
  }
}

TEST(Stability, RankHelpers) {
  const Vector scores{0.2, 0.9, 0.2};
  EXPECT_EQ(score_ranks(scores), (std::vector<std::size_t>{2, 1, 3}));
  const Vector ranks{1, 3};
  EXPECT_NEAR(rank_std(ranks), std::sqrt(2.0), 1e-15);
}

TEST(Report, DeterministicExceptTiming) {
  const auto s = small_shift(7);
  ProtocolConfig cfg;
  cfg.valuer = "data-oob";
  cfg.weight_w = 0.25;
  cfg.num_models = 10;
  cfg.seeds = {0, 1, 2};
  auto a = run_removal(s.train, s.val, s.ood, cfg).to_json();
  auto b = run_removal(s.train, s.val, s.ood, cfg).to_json();
  auto strip = [](Json& j) {
    for (auto& e : j["per_seed"]) e["metrics"].erase("time_valuation_s");
    j["aggregate"].erase("time_valuation_s");
  };
  strip(a);
  strip(b);
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Report, AggregatesAndRoundTrip) {
  ExperimentReport r;
  r.protocol = "removal";
  r.generator = "test";
  r.config = {{"seeds", {0, 1, 2}}};
  for (int s = 0; s < 3; ++s) {
    SeedEntry e;
    e.seed = s;
    e.metrics["ood_accuracy"] = 0.5 + 0.1 * s;
    e.rows.push_back({0, "ood_accuracy", 0.5 + 0.1 * s});
    r.per_seed.push_back(e);
  }
  r.finalize();
  EXPECT_NEAR(r.aggregate.at("ood_accuracy").mean, 0.6, 1e-15);
  EXPECT_NEAR(r.aggregate.at("ood_accuracy").std, 0.1, 1e-15);
  const auto dir = std::filesystem::temp_directory_path();
  r.write(dir / "evalue_report.json", dir / "evalue_report.csv");
  const auto back = ExperimentReport::read(dir / "evalue_report.json");
  EXPECT_EQ(back.to_json(), r.to_json());
  std::filesystem::remove(dir / "evalue_report.json");
  std::filesystem::remove(dir / "evalue_report.csv");
  EXPECT_EQ(r.csv_table().substr(0, 31), "seed,step_or_repeat,metric,valu");
  r.aggregate["ood_accuracy"].mean = 0.7;
  EXPECT_THROW(r.validate(), Error);
}

TEST(Timing, ProducesMedians) {
  std::mt19937_64 rng(84);
  auto data = testing::random_dataset(120, 6, 2, rng);
  TimingConfig timing;
  timing.warmup = 1;
  timing.measured = 3;
  timing.baselines = {"random"};
  ProtocolConfig cfg;
  cfg.knn_k = 10;
  const auto report = run_timing(data, cfg, timing);
  const auto& m = report.per_seed[0].metrics;
  EXPECT_GT(m.at("time_ev_approx_s"), 0.0);
  EXPECT_GT(m.at("time_ev_exact_s"), 0.0);
  EXPECT_TRUE(m.contains("time_random_s"));
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(PcaGapReport, RunsWithEv) {
  const auto s = small_shift(8);
  ProtocolConfig cfg;
  cfg.valuer = "ev";
  const auto report = run_pca_gap(s.train, nullptr, cfg, 0.25);
  EXPECT_GT(report.aggregate.at("var_top").mean, 0.0);
  EXPECT_GT(report.aggregate.at("var_bottom").mean, 0.0);
}

TEST(Config, Validation) {
  const auto s = small_shift(9);
  ProtocolConfig cfg;
  cfg.removal_fraction = 1.0;
  EXPECT_THROW(run_removal(s.train, s.val, s.ood, cfg), Error);
  cfg = {};
  cfg.weight_w = 1.5;
  EXPECT_THROW(run_removal(s.train, s.val, s.ood, cfg), Error);
  cfg = {};
  cfg.valuer = "bogus";
  EXPECT_THROW(run_removal(s.train, s.val, s.ood, cfg), Error);
}

}  // namespace
}  // namespace evalue::benchlab
