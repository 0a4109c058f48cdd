#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"

using namespace presel;

namespace {

std::map<std::string, double> scores_of(std::vector<double> s) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < s.size(); ++i) m["t" + std::to_string(100 + i)] = s[i];
  return m;
}

std::vector<std::size_t> values(const std::map<std::string, std::size_t>& m) {
  std::vector<std::size_t> v;
  for (const auto& [k, x] : m) v.push_back(x);
  return v;
}

std::map<std::string, std::size_t> quotas(std::vector<double> w, std::size_t total, std::vector<std::size_t> pools) {
  std::map<std::string, double> wm;
  std::map<std::string, std::size_t> pm;
  for (std::size_t i = 0; i < w.size(); ++i) {
    wm["t" + std::to_string(i)] = w[i];
    pm["t" + std::to_string(i)] = pools[i];
  }
  return task_quotas(wm, total, pm);
}

}  // namespace

TEST(TaskScores, MeansAndRefCounts) {
  auto m = DatasetManifest::from_records(
      {{"a", {"A"}, true, false}, {"b", {"B"}, true, false}, {"c", {"B"}, true, false}, {"d", {"A"}, false, false}});
  std::vector<IrsRecord> r{{"a", 1, 1, 1.0}, {"b", 1, 2, 0.5}, {"c", 3, 2, 1.5}};
  auto s = task_scores(r, m);
  EXPECT_EQ(s.at("A").score, 1.0);
  EXPECT_EQ(s.at("A").ref_count, 1u);
  EXPECT_EQ(s.at("B").score, 1.0);
  EXPECT_EQ(s.at("B").ref_count, 2u);
  EXPECT_FALSE(s.at("B").fallback);
}

TEST(TaskScores, MultiTaskReferenceCountsTowardEveryTask) {
  auto m = DatasetManifest::from_records({{"a", {"A", "B"}, true, false}, {"b", {"B"}, true, false}});
  std::vector<IrsRecord> r{{"a", 1, 1, 0.4}, {"b", 1, 1, 0.8}};
  auto s = task_scores(r, m);
  EXPECT_DOUBLE_EQ(s.at("A").score, 0.4);
  EXPECT_DOUBLE_EQ(s.at("B").score, 0.6);
  EXPECT_EQ(s.at("B").ref_count, 2u);
}

TEST(TaskScores, FallbackIsMeanOfObservedScores) {
  auto m = DatasetManifest::from_records({{"a", {"A"}, true, false}, {"b", {"B"}, true, false}, {"c", {"C"}, false, false}});
  std::vector<IrsRecord> r{{"a", 1, 1, 0.5}, {"b", 1, 1, 1.5}};
  auto s = task_scores(r, m);
  EXPECT_TRUE(s.at("C").fallback);
  EXPECT_EQ(s.at("C").ref_count, 0u);
  EXPECT_DOUBLE_EQ(s.at("C").score, 1.0);
}

TEST(TaskScores, GroupbyOracleThreeTasksFiftyRecords) {
  std::mt19937_64 rng(3);
  std::vector<SampleRecord> recs;
  std::vector<IrsRecord> irs;
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 50; ++i) {
      std::string id = "t" + std::to_string(t) + "_" + std::to_string(i);
      recs.push_back({id, {"T" + std::to_string(t)}, true, false});
      irs.push_back({id, 0, 0, u(rng)});
    }
  std::shuffle(irs.begin(), irs.end(), rng);
  auto m = DatasetManifest::from_records(recs);
  auto s = task_scores(irs, m);
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : irs) {
    auto& a = acc["T" + r.sample_id.substr(1, 1)];
    a.first += r.irs;
    a.second += 1;
  }
  for (const auto& [t, a] : acc) {
    double mean = a.first / a.second;
    EXPECT_LE(std::abs(s.at(t).score - mean), 1e-12 * mean);
    EXPECT_EQ(s.at(t).ref_count, 50u);
  }
}

TEST(TaskWeights, Examples) {
  auto w1 = task_weights(scores_of({3.7}));
  EXPECT_EQ(w1.begin()->second, 1.0);
  for (const auto& [t, w] : task_weights(scores_of({1, 1, 1, 1}))) EXPECT_DOUBLE_EQ(w, 0.25);
  auto w2 = task_weights(scores_of({0.0, std::log(3.0)}), 1.0);
  EXPECT_NEAR(w2.at("t100"), 0.75, 1e-15);
  EXPECT_NEAR(w2.at("t101"), 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(resolve_tau(4, std::nullopt), 0.5);
}

TEST(TaskWeights, NonFiniteScoreRejected) {
  try {
    (void)task_weights(scores_of({1.0, NAN}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidScore);
  }
}

TEST(TaskWeights, ShiftInvarianceAndAntiMonotone) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t m = 1 + rng() % 60;
    std::vector<double> s(m);
    for (double& x : s) x = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    double c = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
    std::vector<double> shifted = s;
    for (double& x : shifted) x += c;
    auto w = task_weights(scores_of(s));
    auto ws = task_weights(scores_of(shifted));
    double sum = 0.0;
    for (const auto& [t, v] : w) {
      sum += v;
      EXPECT_NEAR(v, ws.at(t), 1e-9);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    auto sm = scores_of(s);
    for (const auto& [a, sa] : sm)
      for (const auto& [b, sb] : sm)
        if (sa < sb) {
          EXPECT_GT(w.at(a), w.at(b));
        }
  }
}

TEST(TaskWeights, TemperatureExtremes) {
  auto s = scores_of({0.9, 0.3, 1.7, 0.31});
  auto hot = task_weights(s, 1e6);
  double lo = 1, hi = 0;
  for (const auto& [t, w] : hot) {
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  EXPECT_LT(hi - lo, 1e-3);
  auto cold = task_weights(s, 1e-6);
  EXPECT_GT(cold.at("t101"), 0.999);
}

TEST(LargestRemainder, TiesGoToLowerIndex) {
  std::vector<double> shares{10.0 / 3, 10.0 / 3, 10.0 / 3};
  EXPECT_EQ(largest_remainder(shares, 10), (std::vector<std::size_t>{4, 3, 3}));
}

TEST(TaskQuotas, Examples) {
  EXPECT_EQ(values(quotas({0.5, 0.5}, 10, {100, 100})), (std::vector<std::size_t>{5, 5}));
  EXPECT_EQ(values(quotas({1.0 / 3, 1.0 / 3, 1.0 / 3}, 10, {100, 100, 100})), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(values(quotas({0.9, 0.1}, 10, {3, 100})), (std::vector<std::size_t>{3, 7}));
}

TEST(TaskQuotas, InfeasibleTotal) {
  try {
    (void)quotas({0.5, 0.5}, 10, {3, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InfeasibleBudget);
  }
}

TEST(TaskQuotas, ConservationOverRandomConfigs) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t m = 1 + rng() % 12;
    std::vector<double> w(m);
    std::vector<std::size_t> pools(m);
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = std::exp(std::normal_distribution<double>(0, 2)(rng));
      z += w[i];
      pools[i] = rng() % 200;
    }
    for (double& x : w) x /= z;
    std::size_t pool_sum = std::accumulate(pools.begin(), pools.end(), std::size_t{0});
    std::size_t total = pool_sum == 0 ? 0 : rng() % (pool_sum + 1);
    auto q = quotas(w, total, pools);
    std::size_t sum = 0;
    for (const auto& [t, v] : q) {
      EXPECT_LE(v, pools[std::stoul(t.substr(1))]);
      sum += v;
    }
    EXPECT_EQ(sum, std::min(total, pool_sum));
  }
}

TEST(BudgetPlan, TargetExcludesReferencesAndRoundTrips) {
  std::vector<SampleRecord> recs;
  for (int i = 0; i < 1000; ++i) recs.push_back({"s" + std::to_string(i), {i % 2 ? "A" : "B"}, i < 50, false});
  auto m = DatasetManifest::from_records(recs);
  std::vector<IrsRecord> irs;
  for (int i = 0; i < 50; ++i) irs.push_back({"s" + std::to_string(i), 1, 1, i % 2 ? 0.5 : 1.5});
  auto plan = plan_budget(m, irs, 0.15);
  EXPECT_EQ(plan.total_size, 150u);
  EXPECT_EQ(plan.ref_count, 50u);
  EXPECT_EQ(plan.target_total, 100u);
  EXPECT_GT(plan.task("A").quota, plan.task("B").quota);
  EXPECT_EQ(plan.task("A").quota + plan.task("B").quota, 100u);
  auto text = serialize_budget_plan(plan);
  std::vector<std::string> lines;
  std::stringstream ss(text);
  for (std::string l; std::getline(ss, l);) lines.push_back(l);
  EXPECT_EQ(serialize_budget_plan(parse_budget_plan(lines)), text);
}

TEST(BudgetPlan, ReferencesLargerThanTotalInfeasible) {
  std::vector<SampleRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back({"s" + std::to_string(i), {"A"}, i < 5, false});
  auto m = DatasetManifest::from_records(recs);
  EXPECT_THROW((void)plan_budget(m, {}, 0.15), Error);
}
