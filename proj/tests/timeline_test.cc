// tests/timeline_test.cc
//
// Copyright 2026  The diar-refine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "diar/timeline.h"
#include "test_util.h"

using namespace diar;

namespace {

ActivitySet Set(std::size_t total, std::initializer_list<FrameIndex> frames) {
  return ActivitySet::FromFrames(total, frames);
}

}  // namespace

TEST_CASE("FrameGrid conversions are consistent") {
  for (int shift : {10, 25, 100, 250}) {
    FrameGrid grid(shift, 500);
    for (FrameIndex t = 0; t < grid.total_frames(); ++t) {
      REQUIRE(grid.FrameOf(grid.TimeOf(t)) == t);
    }
  }
  CHECK_THROWS_AS(FrameGrid(0, 10), std::invalid_argument);
  CHECK_THROWS_AS(FrameGrid(100, 0), std::invalid_argument);
}

TEST_CASE("union identities") {
  const std::size_t T = 8;
  CHECK(Union(Set(T, {1, 2}), Set(T, {2, 3})) == Set(T, {1, 2, 3}));
  ActivitySet a = Set(T, {0, 4, 7});
  CHECK(Union(a, ActivitySet(T)) == a);
  CHECK(Union(a, Complement(a)) == ActivitySet::Full(T));
  CHECK(Union(a, a) == a);
}

TEST_CASE("intersection identities") {
  const std::size_t T = 8;
  ActivitySet a = Set(T, {0, 4, 7});
  CHECK(Intersection(Set(T, {1, 2}), Set(T, {2, 3})) == Set(T, {2}));
  CHECK(Intersection(a, ActivitySet(T)).Empty());
  CHECK(Intersection(a, ActivitySet::Full(T)) == a);
  CHECK(Intersection(a, Complement(a)).Empty());
}

TEST_CASE("difference identities") {
  const std::size_t T = 8;
  ActivitySet a = Set(T, {0, 4, 7});
  CHECK(Difference(Set(T, {1, 2}), Set(T, {2, 3})) == Set(T, {1}));
  CHECK(Difference(a, ActivitySet(T)) == a);
  CHECK(Difference(a, a).Empty());
  CHECK(Difference(ActivitySet::Full(T), a) == Complement(a));
}

TEST_CASE("complement identities") {
  const std::size_t T = 70;  // crosses a word boundary
  ActivitySet a = Set(T, {0, 63, 64, 69});
  CHECK(Complement(Complement(a)) == a);
  CHECK(Complement(ActivitySet(T)) == ActivitySet::Full(T));
  CHECK(Complement(ActivitySet::Full(T)).Empty());
  CHECK(Complement(a).Count() == T - a.Count());
}

TEST_CASE("set operations reject mismatched grids") {
  CHECK_THROWS_AS(Union(ActivitySet(5), ActivitySet(6)), GridMismatchError);
  CHECK_THROWS_AS(Intersection(ActivitySet(5), ActivitySet(6)),
                  GridMismatchError);
  CHECK_THROWS_AS(Difference(ActivitySet(5), ActivitySet(6)),
                  GridMismatchError);
  CHECK_THROWS_AS(ActivitySet(5).Insert(5), std::out_of_range);
}

TEST_CASE("set laws hold on random sets") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t T = 1 + rng() % 200;
    ActivitySet a = testing::RandomSet(rng, T);
    ActivitySet b = testing::RandomSet(rng, T);
    // De Morgan.
    REQUIRE(Complement(Union(a, b)) ==
            Intersection(Complement(a), Complement(b)));
    REQUIRE(Complement(Intersection(a, b)) ==
            Union(Complement(a), Complement(b)));
    // Absorption.
    REQUIRE(Union(a, Intersection(a, b)) == a);
    REQUIRE(Intersection(a, Union(a, b)) == a);
    // Against std::set.
    std::set<FrameIndex> sa, sb;
    for (auto t : a.Frames()) sa.insert(t);
    for (auto t : b.Frames()) sb.insert(t);
    std::size_t common = 0;
    for (auto t : sa) common += sb.count(t);
    REQUIRE(Intersection(a, b).Count() == common);
    REQUIRE(Union(a, b).Count() == sa.size() + sb.size() - common);
    REQUIRE(a.IsSubsetOf(Union(a, b)));
  }
}

TEST_CASE("FramesToSegments examples") {
  FrameGrid grid(100, 10);
  auto segs = FramesToSegments(Set(10, {0, 1, 2, 5}), grid);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].onset == doctest::Approx(0.0));
  CHECK(segs[0].duration == doctest::Approx(0.3));
  CHECK(segs[1].onset == doctest::Approx(0.5));
  CHECK(segs[1].duration == doctest::Approx(0.1));

  CHECK(FramesToSegments(ActivitySet(10), grid).empty());

  auto full = FramesToSegments(ActivitySet::Full(10), grid);
  REQUIRE(full.size() == 1);
  CHECK(full[0].onset == doctest::Approx(0.0));
  CHECK(full[0].duration == doctest::Approx(1.0));
}

TEST_CASE("segments round-trip and are disjoint and non-adjacent") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t T = 1 + rng() % 300;
    int shift = std::array{10, 40, 100}[rng() % 3];
    FrameGrid grid(shift, T);
    ActivitySet a = testing::RandomSet(rng, T, 0.3 + 0.4 * (trial % 2));
    auto segs = FramesToSegments(a, grid);
    REQUIRE(SegmentsToFrames(segs, grid) == a);
    for (std::size_t n = 1; n < segs.size(); ++n) {
      double prev_end = segs[n - 1].onset + segs[n - 1].duration;
      // A zero gap would have been merged into one run.
      REQUIRE(segs[n].onset > prev_end + 1e-9);
    }
  }
}

TEST_CASE("SegmentsToFrames uses frame centers") {
  FrameGrid grid(100, 10);
  std::vector<Segment> segs{{0.0, 0.35}};
  CHECK(SegmentsToFrames(segs, grid) == Set(10, {0, 1, 2}));
  std::vector<Segment> edge{{0.05, 0.1}};  // [0.05, 0.15): center 0.05 only
  CHECK(SegmentsToFrames(edge, grid) == Set(10, {0}));
  std::vector<Segment> tail{{0.95, 5.0}};  // clipped at the grid end
  CHECK(SegmentsToFrames(tail, grid) == Set(10, {9}));
}

TEST_CASE("Diarization invariants") {
  FrameGrid grid(100, 10);
  Diarization d(grid);
  d.AddSpeaker("A", Set(10, {1, 2}));
  d.AddSpeaker("B", Set(10, {3}));
  CHECK(d.IsOverlapFree());
  CHECK_THROWS_AS(d.AddSpeaker("A", ActivitySet(10)), std::invalid_argument);
  CHECK_THROWS_AS(d.AddSpeaker("", ActivitySet(10)), std::invalid_argument);
  CHECK_THROWS_AS(d.AddSpeaker("C", ActivitySet(11)), GridMismatchError);
  CHECK_THROWS_AS(d.Activity("Z"), std::out_of_range);

  d.AddSpeaker("C", Set(10, {2, 9}));
  CHECK_FALSE(d.IsOverlapFree());
  CHECK(d.Speech() == Set(10, {1, 2, 3, 9}));
  auto counts = d.SpeakerCounts();
  CHECK(counts[2] == 2);
  CHECK(counts[0] == 0);

  d.AddSpeaker("D", ActivitySet(10));
  CHECK(d.WithoutEmptySpeakers().NumSpeakers() == 3);
}

TEST_CASE("PosteriorMatrix invariants") {
  CHECK_NOTHROW(PosteriorMatrix({1, 4}, {{0.0, 1.0}, {0.5, 0.5}}));
  CHECK_THROWS_AS(PosteriorMatrix({1, 4}, {{0.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(PosteriorMatrix({4, 4}, {{0.1, 0.1}, {0.1, 0.1}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(PosteriorMatrix({1}, {{1.5, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(PosteriorMatrix({1}, {{std::nan(""), 0.0}}),
                  std::invalid_argument);
  PosteriorMatrix p({2}, {{0.9, 0.1}});
  CHECK(p.Swapped().values()[0] == std::make_pair(0.1, 0.9));
}
