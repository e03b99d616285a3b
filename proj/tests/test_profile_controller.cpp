#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "sead/profile_controller.hpp"
#include "support.hpp"

namespace sead {
namespace {

using O = DialogueOutcome;

CompletionStats with_counts(int index, int attempts, int successes) {
  CompletionStats s;
  s.set_counts(index, attempts, successes);
  return s;
}

TEST(ProfileController, UpdateStatsExamples) {
  CompletionStats s = update_stats(CompletionStats{}, 7, O::Success);
  EXPECT_EQ(s.at(7).attempts(), 1);
  EXPECT_EQ(s.at(7).successes(), 1);
  EXPECT_DOUBLE_EQ(*s.cr(7), 1.0);

  CompletionStats t = update_stats(with_counts(3, 4, 2), 3, O::Refusal);
  EXPECT_EQ(t.at(3).attempts(), 5);
  EXPECT_EQ(t.at(3).successes(), 2);
  EXPECT_DOUBLE_EQ(*t.cr(3), 0.4);

  EXPECT_THROW(update_stats(CompletionStats{}, 0, O::Ongoing), ContractViolation);
  EXPECT_THROW(update_stats(CompletionStats{}, 120, O::Success), ContractViolation);
  EXPECT_FALSE(CompletionStats{}.cr(0).has_value());
}

TEST(ProfileController, WindowKeepsTheLatestOutcomes) {
  CompletionStats s(kNumStates, 200);
  for (int i = 0; i < 100; ++i) s.record(0, O::Success);
  for (int i = 0; i < 200; ++i) s.record(0, O::Timeout);
  EXPECT_EQ(s.at(0).attempts(), 200);
  EXPECT_EQ(s.at(0).successes(), 0);
  EXPECT_EQ(s.at(0).attempts_total, 300);
  EXPECT_EQ(s.at(0).successes_total, 100);
}

TEST(ProfileController, ClassifyThresholds) {
  EXPECT_EQ(classify(0.7), DifficultyClass::TooEasy);
  EXPECT_EQ(classify(0.4), DifficultyClass::Ideal);
  EXPECT_EQ(classify(0.35), DifficultyClass::TooDifficult);
  EXPECT_EQ(classify(0.6), DifficultyClass::Ideal);
  EXPECT_EQ(classify(0.61), DifficultyClass::TooEasy);
  EXPECT_EQ(classify(0.0), DifficultyClass::TooDifficult);
  EXPECT_EQ(classify(1.0), DifficultyClass::TooEasy);
}

TEST(ProfileController, ClassifyPartitionsEveryReachableRate) {
  for (int a = 1; a <= 50; ++a)
    for (int s = 0; s <= a; ++s) {
      // Integer comparisons avoid any rounding in the oracle.
      const bool easy = 10 * s > 6 * a;
      const bool hard = 10 * s < 4 * a;
      const DifficultyClass expected =
          easy ? DifficultyClass::TooEasy : (hard ? DifficultyClass::TooDifficult : DifficultyClass::Ideal);
      EXPECT_EQ(classify(static_cast<double>(s) / a), expected) << s << "/" << a;
    }
}

TEST(ProfileController, RawWeightExamplesAndSymmetry) {
  EXPECT_EQ(raw_weight(0.5), 1.0);
  EXPECT_EQ(raw_weight(0.0), 0.5);
  EXPECT_EQ(raw_weight(1.0), 0.5);
  for (int i = 0; i <= 1000; ++i) {
    const double x = 0.5 * i / 1000.0;
    EXPECT_NEAR(raw_weight(0.5 + x), raw_weight(0.5 - x), 1e-15);
  }
  const std::array<double, 3> crs = {0.5, 0.3, 0.9};
  const auto w = normalized_weights(crs);
  EXPECT_NEAR(raw_weight(0.3), 0.8, 1e-15);
  EXPECT_NEAR(raw_weight(0.9), 0.6, 1e-15);
  EXPECT_NEAR(w[0], 0.41667, 5e-6);
  EXPECT_NEAR(w[1], 0.33333, 5e-6);
  EXPECT_NEAR(w[2], 0.25, 1e-12);
}

TEST(ProfileController, SamplingWeightsAreAProbabilityVector) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    CompletionStats s;
    for (int i = 0; i < kNumStates; ++i) {
      const int a = static_cast<int>(rng.below(12));
      s.set_counts(i, a, a == 0 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(a) + 1)));
    }
    const auto w = sampling_weights(s);
    double total = 0.0;
    for (double x : w) {
      EXPECT_GT(x, 0.0);
      EXPECT_LE(x, 1.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  const auto uniform = sampling_weights(CompletionStats{});
  for (double x : uniform) EXPECT_NEAR(x, 1.0 / 120.0, 1e-15);
}

TEST(ProfileController, LaplaceSmoothingBelowFiveAttempts) {
  EXPECT_DOUBLE_EQ(with_counts(0, 0, 0).estimated_cr(0), 0.5);
  EXPECT_DOUBLE_EQ(with_counts(0, 1, 1).estimated_cr(0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(with_counts(0, 4, 0).estimated_cr(0), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(with_counts(0, 5, 0).estimated_cr(0), 0.0);
}

TEST(ProfileController, SuccessNeverRaisesTheWeightOfAnEasyState) {
  for (int a = 0; a <= 50; ++a)
    for (int s = 0; s <= a; ++s) {
      const CompletionStats before = with_counts(0, a, s);
      const CompletionStats after = update_stats(before, 0, O::Success);
      if (before.cr(0) && *before.cr(0) >= 0.5) {
        EXPECT_LE(raw_weight(*after.cr(0)), raw_weight(*before.cr(0)));
      }
      if (before.estimated_cr(0) >= 0.5) {
        EXPECT_LE(raw_weight(after.estimated_cr(0)), raw_weight(before.estimated_cr(0)));
      }
    }
}

TEST(ProfileController, EmptyStatsSampleUniformStates) {
  Rng rng(derive_stream(17, StreamPurpose::Sampling, {0}));
  std::vector<std::size_t> counts(kNumStates, 0);
  const CompletionStats empty;
  for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(state_index(sample_batch(empty, 1, rng)[0].initial))];
  const std::vector<double> p(kNumStates, 1.0 / kNumStates);
  EXPECT_GT(testing::chi_square_p(counts, p), 0.01);
}

TEST(ProfileController, ConcentratedStatsFollowTheNormalizedWeights) {
  const int k = 57;
  CompletionStats stats;
  for (int i = 0; i < kNumStates; ++i) stats.set_counts(i, 10, i == k ? 5 : (i % 2 == 0 ? 0 : 10));
  // Oracle: state k has raw weight 1, every other state 0.5.
  std::vector<double> p(kNumStates, 0.5 / (1.0 + 119 * 0.5));
  p[k] = 1.0 / (1.0 + 119 * 0.5);
  EXPECT_NEAR(p[k], 0.0165, 5e-5);
  const auto w = sampling_weights(stats);
  for (int i = 0; i < kNumStates; ++i) EXPECT_NEAR(w[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i)], 1e-15);
  Rng rng(99);
  std::vector<std::size_t> counts(kNumStates, 0);
  for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(state_index(sample_batch(stats, 1, rng)[0].initial))];
  EXPECT_GT(testing::chi_square_p(counts, p), 0.01);
}

TEST(ProfileController, BatchesAreUniqueAndConsistent) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    CompletionStats stats;
    for (int i = 0; i < kNumStates; ++i) {
      const int a = static_cast<int>(rng.below(20));
      stats.set_counts(i, a, a == 0 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(a) + 1)));
    }
    const auto batch = sample_batch(stats, 60, rng);
    ASSERT_EQ(batch.size(), 60u);
    std::set<ProfileId> ids;
    for (const UserProfile& p : batch) {
      EXPECT_TRUE(is_consistent(p));
      EXPECT_EQ(p.profile_id, profile_hash(p.initial, p.traits));
      ids.insert(p.profile_id);
    }
    EXPECT_EQ(ids.size(), batch.size());
  }
  const auto one = sample_batch(CompletionStats{}, 1, rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(is_consistent(one[0]));
  EXPECT_THROW(sample_batch(CompletionStats{}, 0, rng), ContractViolation);
}

TEST(ProfileController, PerStateCapBindsTheBatch) {
  std::vector<double> w(kNumStates, 0.0);
  w[static_cast<std::size_t>(state_index({4, 3, 5}))] = 1.0;  // 4 consistent subsets
  Rng rng(1);
  EXPECT_EQ(sample_batch_from_weights(w, 10, rng).size(), 4u);
  EXPECT_EQ(sample_batch_from_weights(w, 10, rng, {2}).size(), 2u);

  std::vector<double> two(kNumStates, 0.0);
  two[0] = 1.0;
  two[1] = 1.0;
  const auto batch = sample_batch_from_weights(two, 60, rng, {3});
  EXPECT_EQ(batch.size(), 6u);
}

TEST(ProfileController, UniverseSamplingIsUniformOverConsistentProfiles) {
  const auto universe = consistent_universe();
  std::vector<std::size_t> state_counts(kNumStates, 0);
  std::vector<double> state_p(kNumStates, 0.0);
  for (const UserProfile& p : universe) state_p[static_cast<std::size_t>(state_index(p.initial))] += 1.0 / universe.size();
  Rng rng(8);
  for (const UserProfile& p : sample_universe(100000, rng)) {
    EXPECT_TRUE(is_consistent(p));
    ++state_counts[static_cast<std::size_t>(state_index(p.initial))];
  }
  EXPECT_GT(testing::chi_square_p(state_counts, state_p), 0.01);
}

TEST(ProfileController, CsvTableRoundTrip) {
  CompletionStats s;
  s.set_counts(0, 10, 7);
  s.set_counts(5, 3, 1);
  s.set_counts(119, 200, 100);
  const std::string csv = stats_to_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,c,e,tr,attempts,successes,cr,class,weight");
  EXPECT_NE(csv.find("\n0,0,0,0,10,7,0.700000,too_easy,"), std::string::npos);
  EXPECT_NE(csv.find("\n1,0,0,1,0,0,,unvisited,"), std::string::npos);
  EXPECT_NE(csv.find("\n119,4,3,5,200,100,0.500000,ideal,"), std::string::npos);
  const CompletionStats back = stats_from_csv(csv);
  for (int i = 0; i < kNumStates; ++i) {
    EXPECT_EQ(back.at(i).attempts(), s.at(i).attempts());
    EXPECT_EQ(back.at(i).successes(), s.at(i).successes());
  }
  EXPECT_EQ(stats_to_csv(back), csv);
  EXPECT_THROW(stats_from_csv("nope\n"), ParseError);
  EXPECT_THROW(stats_from_csv("index,c\n0,0,0,0,1,2\n"), ParseError);
}

}  // namespace
}  // namespace sead
