// Copyright 2026 The advdetect Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "advdetect/correction.hpp"
#include "support.hpp"

namespace advdetect {
namespace {

Top5 tuple(std::array<Label, 5> labels) {
  Top5 t;
  t.labels = labels;
  return t;
}

LabelTrace from_posts(std::vector<Top5> posts) {
  LabelTrace t;
  t.base = tuple({90, 91, 92, 93, 94});
  t.post = std::move(posts);
  return t;
}

// Naive vote: tally in a map, then pick the best remaining label five times.
std::vector<std::pair<Label, int>> brute_vote(const LabelTrace& t, const OperationSubset& s) {
  std::map<Label, std::pair<int, int>> tally;
  for (auto i : s.indices) {
    for (int p = 0; p < kTopK; ++p) {
      tally[t.post[i].labels[p]].first += 1;
      tally[t.post[i].labels[p]].second += p;
    }
  }
  std::vector<std::pair<Label, int>> out;
  while (out.size() < 5 && !tally.empty()) {
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it) {
      const auto [c, ps] = it->second;
      const auto [bc, bps] = best->second;
      const double mean = static_cast<double>(ps) / c, best_mean = static_cast<double>(bps) / bc;
      if (c > bc || (c == bc && mean < best_mean - 1e-12)) best = it;
    }
    out.emplace_back(best->first, best->second.first);
    tally.erase(best);
  }
  return out;
}

TEST(Correction, HandEnumeratedVote) {
  const LabelTrace t = from_posts({tuple({1, 2, 3, 4, 5}), tuple({1, 2, 3, 4, 6}), tuple({1, 2, 3, 5, 6})});
  const auto r = correct_labels(t, full_subset(3));
  EXPECT_EQ(r.corrected, (std::vector<Label>{1, 2, 3, 4, 5}));
  EXPECT_EQ(r.votes, (std::vector<int>{3, 3, 3, 2, 2}));
  EXPECT_TRUE(r.complete);
}

TEST(Correction, UnanimousVoteReproducesTheTuple) {
  const LabelTrace t = from_posts(std::vector<Top5>(38, tuple({7, 3, 9, 1, 4})));
  const auto r = correct_labels(t, canonical_subset("jpeg+scaling"));
  EXPECT_EQ(r.corrected, (std::vector<Label>{7, 3, 9, 1, 4}));
  EXPECT_EQ(r.votes, std::vector<int>(5, 26));
  EXPECT_EQ(r.subset_id, "jpeg+scaling");
}

TEST(Correction, BaseTupleDoesNotVote) {
  LabelTrace t = from_posts({tuple({1, 2, 3, 4, 5})});
  const auto r = correct_labels(t, full_subset(1));
  for (Label l : r.corrected) EXPECT_LT(l, 90);
}

TEST(Correction, EqualCountsAndPositionsFallBackToLabelId) {
  const LabelTrace t = from_posts({tuple({8, 6, 1, 2, 3}), tuple({6, 8, 1, 2, 3})});
  EXPECT_EQ(correct_labels(t, full_subset(2)).corrected, (std::vector<Label>{6, 8, 1, 2, 3}));
}

TEST(Correction, FlagsFewerThanFiveLabels) {
  LabelTrace t;
  t.post = {tuple({1, 2, 3, 4, 5})};
  OperationSubset s{"one", {0}};
  EXPECT_TRUE(correct_labels(t, s).complete);
  // Duplicated labels can only arise from a malformed tuple; voting still
  // reports what it saw.
  t.post = {tuple({1, 2, 1, 2, 1})};
  const auto r = correct_labels(t, s);
  EXPECT_FALSE(r.complete);
  EXPECT_EQ(r.corrected, (std::vector<Label>{1, 2}));
  EXPECT_EQ(r.votes, (std::vector<int>{3, 2}));
  EXPECT_THROW(correct_labels(t, OperationSubset{"none", {}}), Error);
}

TEST(Correction, MatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const LabelTrace t = testing::random_trace(rng, 38, i % 3 ? 12 : 1000, 0.3);
    for (const auto& id : canonical_subset_ids()) {
      const auto s = canonical_subset(id);
      const auto r = correct_labels(t, s);
      const auto expect = brute_vote(t, s);
      ASSERT_EQ(r.corrected.size(), expect.size());
      for (std::size_t k = 0; k < expect.size(); ++k) {
        ASSERT_EQ(r.corrected[k], expect[k].first) << "trace " << i << " subset " << id;
        ASSERT_EQ(r.votes[k], expect[k].second);
      }
      for (std::size_t k = 1; k < r.votes.size(); ++k) ASSERT_LE(r.votes[k], r.votes[k - 1]);
    }
  }
}

TEST(CorrectionRate, Fixtures) {
  const auto ref = tuple({1, 2, 3, 4, 5});
  CorrectionResult hit{{9, 8, 1, 7, 6}, {5, 4, 3, 2, 1}, "x"};
  CorrectionResult miss{{9, 8, 7, 6, 0}, {5, 4, 3, 2, 1}, "x"};
  EXPECT_DOUBLE_EQ(correction_rate({hit, hit}, {ref, ref}), 100.0);
  EXPECT_DOUBLE_EQ(correction_rate({miss, miss}, {ref, ref}), 0.0);
  EXPECT_DOUBLE_EQ(correction_rate({hit, hit, miss, hit}, {ref, ref, ref, ref}), 75.0);
  EXPECT_DOUBLE_EQ(correction_rate({hit}, {ref}, CorrectionMatch::Top1Equal), 0.0);
  CorrectionResult exact{{1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}, "x"};
  EXPECT_DOUBLE_EQ(correction_rate({exact}, {ref}, CorrectionMatch::TupleEqual), 100.0);
  EXPECT_DOUBLE_EQ(correction_rate({exact}, {ref}, CorrectionMatch::Top1Equal), 100.0);
  EXPECT_THROW(correction_rate({hit}, {}), Error);
  for (auto m : {CorrectionMatch::Top1InTop5, CorrectionMatch::Top1Equal, CorrectionMatch::TupleEqual}) {
    EXPECT_EQ(parse_correction_match(to_string(m)), m);
  }
}

}  // namespace
}  // namespace advdetect
