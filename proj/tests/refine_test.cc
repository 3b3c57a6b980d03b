// tests/refine_test.cc
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

#include "diar/refine.h"
#include "diar/simharness.h"
#include "refine_replay.h"
#include "test_util.h"

using namespace diar;

namespace {

ActivitySet Set(std::size_t total, std::initializer_list<FrameIndex> frames) {
  return ActivitySet::FromFrames(total, frames);
}

Diarization Make(std::size_t total,
                 std::vector<std::pair<std::string, ActivitySet>> speakers) {
  Diarization d(FrameGrid(100, total));
  for (auto &[id, a] : speakers) d.AddSpeaker(id, a);
  return d;
}

// Counts |u & v| + |~u & ~v| one frame at a time.
std::size_t NaiveSimilarity(const ActivitySet &u, const ActivitySet &v) {
  std::size_t n = 0;
  for (FrameIndex t = 0; t < u.total_frames(); ++t) {
    n += u.Contains(t) == v.Contains(t);
  }
  return n;
}

RefineConfig NoMinimum() {
  RefineConfig c;
  c.min_pair_frames = 0;
  return c;
}

}  // namespace

TEST_CASE("SelectPairFrames") {
  Diarization two = Make(8, {{"1", Set(8, {0, 1})}, {"2", Set(8, {5})}});
  CHECK(SelectPairFrames(two, "1", "2") == ActivitySet::Full(8));

  Diarization three = Make(8, {{"1", Set(8, {0, 1})},
                               {"2", Set(8, {6})},
                               {"3", Set(8, {4, 5})}});
  CHECK(SelectPairFrames(three, "1", "2") == Set(8, {0, 1, 2, 3, 6, 7}));

  Diarization loud = Make(8, {{"1", Set(8, {0})},
                              {"2", Set(8, {1})},
                              {"3", ActivitySet::Full(8)}});
  CHECK(SelectPairFrames(loud, "1", "2").Empty());

  CHECK_THROWS_AS(SelectPairFrames(three, "1", "9"), std::out_of_range);
  CHECK_THROWS_AS(SelectPairFrames(three, "1", "1"), std::invalid_argument);
}

TEST_CASE("OrderPairs") {
  const std::size_t T = 100;
  Diarization d = Make(T, {{"1", ActivitySet::FromRange(T, 0, 60)},
                           {"2", ActivitySet::FromRange(T, 60, 90)},
                           {"3", ActivitySet::FromRange(T, 90, 100)}});
  REQUIRE(SelectPairFrames(d, "1", "2").Count() == 90);
  REQUIRE(SelectPairFrames(d, "1", "3").Count() == 70);
  REQUIRE(SelectPairFrames(d, "2", "3").Count() == 40);
  using P = std::pair<std::string, std::string>;
  CHECK(OrderPairs(d) == std::vector<P>{{"1", "2"}, {"1", "3"}, {"2", "3"}});

  Diarization two = Make(10, {{"b", Set(10, {1})}, {"a", Set(10, {2})}});
  CHECK(OrderPairs(two) == std::vector<P>{{"a", "b"}});

  Diarization equal = Make(9, {{"c", ActivitySet::FromRange(9, 0, 3)},
                               {"a", ActivitySet::FromRange(9, 3, 6)},
                               {"b", ActivitySet::FromRange(9, 6, 9)}});
  CHECK(OrderPairs(equal) ==
        std::vector<P>{{"a", "b"}, {"a", "c"}, {"b", "c"}});

  CHECK(OrderPairs(Make(5, {{"x", Set(5, {1})}})).empty());
}

TEST_CASE("ThresholdPosteriors") {
  PosteriorMatrix p({2, 5, 7}, {{0.9, 0.1}, {0.4, 0.6}, {0.6, 0.5}});
  auto [q_a, q_b] = ThresholdPosteriors(p, 0.5, 10);
  CHECK(q_a == Set(10, {2, 7}));
  CHECK(q_b == Set(10, {5}));

  PosteriorMatrix half({1, 2}, {{0.5, 0.5}, {0.5, 0.5}});
  auto [h_a, h_b] = ThresholdPosteriors(half, 0.5, 10);
  CHECK(h_a.Empty());
  CHECK(h_b.Empty());

  PosteriorMatrix ones({1, 3}, {{1.0, 1.0}, {1.0, 1.0}});
  auto [o_a, o_b] = ThresholdPosteriors(ones, 0.5, 10);
  CHECK(o_a == Set(10, {1, 3}));
  CHECK(o_b == Set(10, {1, 3}));
}

TEST_CASE("Similarity") {
  const std::size_t T = 10;
  ActivitySet v = Set(T, {0, 3, 9});
  CHECK(Similarity(v, v, T) == T);
  CHECK(Similarity(Complement(v), v, T) == 0);
  CHECK(Similarity(Set(T, {1, 2, 3}), Set(T, {2, 3, 4}), T) == 8);
  CHECK_THROWS_AS(Similarity(v, ActivitySet(11), T), GridMismatchError);

  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng() % 300;
    ActivitySet a = testing::RandomSet(rng, n);
    ActivitySet b = testing::RandomSet(rng, n);
    std::size_t s = Similarity(a, b, n);
    REQUIRE(s == n - SymmetricDifference(a, b).Count());
    REQUIRE(s == NaiveSimilarity(a, b));
  }
}

TEST_CASE("ResolvePermutation") {
  const std::size_t T = 12;
  ActivitySet t_i = Set(T, {0, 1, 2, 3});
  ActivitySet t_j = Set(T, {6, 7, 8});

  Resolved same = ResolvePermutation(t_i, t_j, t_i, t_j, T);
  CHECK(same.permutation == Permutation::kIdentity);
  CHECK(same.score == 2 * T);
  CHECK(same.track_i == t_i);

  Resolved swapped = ResolvePermutation(t_j, t_i, t_i, t_j, T);
  CHECK(swapped.permutation == Permutation::kSwapped);
  CHECK(swapped.track_i == t_i);
  CHECK(swapped.track_j == t_j);

  // Equal scores keep the identity assignment.
  Resolved tie = ResolvePermutation(t_i, t_i, t_i, t_j, T);
  CHECK(tie.permutation == Permutation::kIdentity);

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t n = 1 + rng() % 100;
    ActivitySet qa = testing::RandomSet(rng, n), qb = testing::RandomSet(rng, n);
    ActivitySet ti = testing::RandomSet(rng, n), tj = testing::RandomSet(rng, n);
    std::size_t id = NaiveSimilarity(qa, ti) + NaiveSimilarity(qb, tj);
    std::size_t sw = NaiveSimilarity(qb, ti) + NaiveSimilarity(qa, tj);
    Resolved r = ResolvePermutation(qa, qb, ti, tj, n);
    REQUIRE(r.score == std::max(id, sw));
    REQUIRE(r.permutation ==
            (sw > id ? Permutation::kSwapped : Permutation::kIdentity));
  }
}

TEST_CASE("CheckAcceptance") {
  const std::size_t T = 20;
  ActivitySet sel = ActivitySet::FromRange(T, 0, 15);
  ActivitySet t_i = Set(T, {0, 1, 2, 3, 4, 16});
  ActivitySet t_j = Set(T, {5, 6, 7, 8, 9});

  CHECK(CheckAcceptance(Intersection(t_i, sel), Intersection(t_j, sel), t_i,
                        t_j, sel, 0.5));
  CHECK_FALSE(CheckAcceptance(ActivitySet(T), t_j, t_i, t_j, sel, 0.5));

  // 3 of 5 kept: 0.6 > 0.5.
  ActivitySet keep3 = Set(T, {0, 1, 2, 11});
  CHECK(CheckAcceptance(keep3, t_j, t_i, t_j, sel, 0.5));
  // The ratio must be strictly above alpha.
  CHECK_FALSE(CheckAcceptance(keep3, t_j, t_i, t_j, sel, 0.6));
  // A speaker absent from the selection fails.
  ActivitySet outside_only = Set(T, {17, 18});
  CHECK_FALSE(CheckAcceptance(t_i, t_j, t_i, outside_only, sel, 0.0));
}

TEST_CASE("ApplyUpdate") {
  const std::size_t T = 6;
  Diarization d3 = Make(T, {{"i", Set(T, {1})},
                            {"j", Set(T, {2})},
                            {"k", Set(T, {5})}});
  ActivitySet sel = SelectPairFrames(d3, "i", "j");
  CHECK(ApplyUpdate(d3, "i", "j", Set(T, {1}), Set(T, {2}), sel) == d3);

  Diarization up = ApplyUpdate(d3, "i", "j", Set(T, {1, 3}), Set(T, {2, 3}), sel);
  CHECK(up.Activity("i") == Set(T, {1, 3}));
  CHECK(up.Activity("j") == Set(T, {2, 3}));
  CHECK(up.Activity("k") == d3.Activity("k"));

  Diarization d2 = Make(3, {{"i", Set(3, {0})}, {"j", Set(3, {2})}});
  Diarization full = ApplyUpdate(d2, "i", "j", Set(3, {0, 1}), Set(3, {1, 2}),
                                 ActivitySet::Full(3));
  CHECK(full.Activity("i") == Set(3, {0, 1}));
  CHECK(full.Activity("j") == Set(3, {1, 2}));

  // The two-speaker rule keeps frames outside a restricted selection.
  Diarization part = ApplyUpdate(d2, "i", "j", Set(3, {}), Set(3, {1}),
                                 Set(3, {0, 1}));
  CHECK(part.Activity("i") == Set(3, {2}));
  CHECK(part.Activity("j") == Set(3, {1, 2}));
}

TEST_CASE("RefineConfig validation") {
  RefineConfig c;
  CHECK_NOTHROW(c.Validate());
  c.threshold = 1.0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = RefineConfig{};
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = RefineConfig{};
  c.passes = 0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = RefineConfig{};
  c.k_prime = 3;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
}

TEST_CASE("RefineRecording: single speaker is returned unchanged") {
  Diarization d = Make(10, {{"a", Set(10, {1, 2})}});
  testing::ZeroBackend zero;
  RefineResult r = RefineRecording(d, zero, RefineConfig{});
  CHECK(r.diarization == d);
  CHECK(r.trace.empty());
  CHECK(zero.calls == 0);
}

TEST_CASE("RefineRecording: empty speaker violates the precondition") {
  Diarization d = Make(10, {{"a", Set(10, {1})}, {"b", ActivitySet(10)}});
  testing::ZeroBackend zero;
  CHECK_THROWS_AS(RefineRecording(d, zero, RefineConfig{}),
                  std::invalid_argument);
}

TEST_CASE("RefineRecording: all-zero posteriors are always rejected") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    Diarization d =
        testing::RandomDiarization(rng, 2 + trial % 4, 200).WithoutEmptySpeakers();
    if (d.NumSpeakers() < 2) continue;
    testing::ZeroBackend zero;
    RefineResult r = RefineRecording(d, zero, NoMinimum());
    REQUIRE(r.diarization == d);
    for (const auto &s : r.trace) {
      REQUIRE_FALSE(s.accepted);
      if (s.selected_count > 0) {
        REQUIRE(s.skipped_reason == SkipReason::kGateRejected);
      }
    }
  }
}

TEST_CASE("RefineRecording: small selections are skipped") {
  Diarization d = Make(30, {{"a", ActivitySet::FromRange(30, 0, 10)},
                            {"b", ActivitySet::FromRange(30, 10, 20)}});
  testing::ZeroBackend zero;
  RefineConfig c;
  c.min_pair_frames = 31;
  RefineResult r = RefineRecording(d, zero, c);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].skipped_reason == SkipReason::kTooFewFrames);
  CHECK(zero.calls == 0);
}

namespace {

class FailingBackend : public PosteriorBackend {
 public:
  PosteriorMatrix Infer(const PosteriorRequest &) override {
    throw BackendError("model unavailable");
  }
};

class ShortBackend : public PosteriorBackend {
 public:
  PosteriorMatrix Infer(const PosteriorRequest &req) override {
    std::vector<FrameIndex> frames(req.frames.begin(), req.frames.end() - 1);
    return PosteriorMatrix(frames, std::vector<std::pair<double, double>>(
                                       frames.size(), {1.0, 1.0}));
  }
};

}  // namespace

TEST_CASE("RefineRecording: backend failures skip the pair") {
  Diarization d = Make(100, {{"a", ActivitySet::FromRange(100, 0, 40)},
                             {"b", ActivitySet::FromRange(100, 40, 70)},
                             {"c", ActivitySet::FromRange(100, 70, 100)}});
  FailingBackend failing;
  RefineResult r = RefineRecording(d, failing, NoMinimum());
  CHECK(r.diarization == d);
  REQUIRE(r.trace.size() == 3);
  for (const auto &s : r.trace) {
    CHECK(s.skipped_reason == SkipReason::kBackendError);
    CHECK(s.error.find("model unavailable") != std::string::npos);
  }

  ShortBackend short_backend;
  RefineResult s = RefineRecording(d, short_backend, NoMinimum());
  CHECK(s.diarization == d);
  for (const auto &step : s.trace) {
    CHECK(step.skipped_reason == SkipReason::kBackendError);
  }
}

TEST_CASE("RefineRecording: two speakers with a perfect oracle") {
  SceneSpec spec;
  spec.num_speakers = 2;
  spec.total_duration = 120;
  spec.seed = 3;
  Diarization ref = GenerateScene(spec);
  Diarization init = DegradeToClustering(ref, 0.0, 1);
  OracleBackend oracle(ref, NoiseSpec{}, 5);
  RefineResult r = RefineRecording(init, oracle, RefineConfig{});
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].accepted);
  CHECK(r.diarization == ref);
}

TEST_CASE("RefineRecording: three speakers recover pure two-speaker overlap") {
  for (uint64_t seed : {1, 2, 3, 4, 5}) {
    SceneSpec spec;
    spec.num_speakers = 3;
    spec.total_duration = 300;
    spec.seed = seed;
    Diarization ref = GenerateScene(spec);
    Diarization init = DegradeToClustering(ref, 0.0, seed);
    OracleBackend oracle(ref, NoiseSpec{}, seed);
    RefineResult r = RefineRecording(init, oracle, RefineConfig{});

    // Frame by frame: every reference overlap of exactly {i, j} that no
    // other hypothesized speaker touches must end up with both i and j.
    std::size_t checked = 0;
    for (FrameIndex t = 0; t < ref.total_frames(); ++t) {
      std::vector<std::string> active;
      for (const auto &s : ref.speakers()) {
        if (s.activity.Contains(t)) active.push_back(s.id);
      }
      if (active.size() != 2) continue;
      bool pure = true;
      for (const auto &s : init.speakers()) {
        if (s.id != active[0] && s.id != active[1] && s.activity.Contains(t)) {
          pure = false;
        }
      }
      if (!pure) continue;
      ++checked;
      REQUIRE(r.diarization.Activity(active[0]).Contains(t));
      REQUIRE(r.diarization.Activity(active[1]).Contains(t));
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("RefineRecording invariants on random scenes") {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    SceneSpec spec;
    spec.num_speakers = 2 + static_cast<int>(seed % 4);
    spec.total_duration = 200;
    spec.seed = seed;
    Diarization ref = GenerateScene(spec);
    Diarization init =
        DegradeToClustering(ref, 0.05, seed).WithoutEmptySpeakers();
    NoiseSpec noise;
    noise.p_flip = 0.05;
    noise.jitter = 0.2;
    RefineConfig config;
    config.passes = 1 + static_cast<int>(seed % 2);
    config.min_pair_frames = 20;

    OracleBackend oracle(ref, noise, seed);
    testing::Recorder recorder(oracle);
    RefineResult r = RefineRecording(init, recorder, config);
    auto problems = testing::ReplayRefinement(init, config, recorder, r);
    for (const auto &p : problems) FAIL_CHECK(p);

    // Same ids, same order.
    REQUIRE(r.diarization.NumSpeakers() == init.NumSpeakers());
    for (std::size_t k = 0; k < init.NumSpeakers(); ++k) {
      REQUIRE(r.diarization.speakers()[k].id == init.speakers()[k].id);
    }

    // Determinism.
    OracleBackend again(ref, noise, seed);
    RefineResult r2 = RefineRecording(init, again, config);
    REQUIRE(r2.diarization == r.diarization);
    REQUIRE(r2.trace == r.trace);

    // Swapping the backend's channels changes nothing.
    OracleBackend base(ref, noise, seed);
    testing::SwapChannels swapped(base);
    RefineResult r3 = RefineRecording(init, swapped, config);
    REQUIRE(r3.diarization == r.diarization);
  }
}

TEST_CASE("SelectAdaptationFrames") {
  const std::size_t T = 100;
  ActivitySet a = ActivitySet::FromRange(T, 0, 30);
  ActivitySet b = ActivitySet::FromRange(T, 30, 50);
  ActivitySet c = ActivitySet::FromRange(T, 25, 30);  // overlaps A
  Diarization d = Make(T, {{"C", c}, {"B", b}, {"A", a}});

  AdaptationSelection sel = SelectAdaptationFrames(d, 0, 60);
  CHECK(sel.speaker_1 == "A");
  CHECK(sel.speaker_2 == "B");
  CHECK(sel.frames == Difference(ActivitySet::FromRange(T, 0, 60), c));
  CHECK(sel.frames.Count() == 55);

  Diarization solo = Make(T, {{"A", a}});
  AdaptationSelection one = SelectAdaptationFrames(solo, 10, 40);
  CHECK(one.speaker_1 == "A");
  CHECK_FALSE(one.speaker_2.has_value());
  CHECK(one.frames == ActivitySet::FromRange(T, 10, 40));

  Diarization tie = Make(T, {{"Y", ActivitySet::FromRange(T, 0, 10)},
                             {"X", ActivitySet::FromRange(T, 10, 20)},
                             {"W", ActivitySet::FromRange(T, 20, 30)}});
  AdaptationSelection t = SelectAdaptationFrames(tie, 0, 30);
  CHECK(t.speaker_1 == "W");
  CHECK(t.speaker_2 == "X");

  CHECK_THROWS_AS(SelectAdaptationFrames(d, 40, 40), std::invalid_argument);
  CHECK_THROWS_AS(SelectAdaptationFrames(d, 80, 90), std::invalid_argument);
}
