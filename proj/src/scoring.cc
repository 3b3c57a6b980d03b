// src/scoring.cc
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

#include "diar/scoring.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace diar {

// Shortest augmenting path formulation of the Hungarian method on a square
// cost matrix, O(n^3).
std::vector<int> MaxWeightAssignment(
    const std::vector<std::vector<int64_t>> &weights) {
  const std::size_t rows = weights.size();
  const std::size_t cols = rows == 0 ? 0 : weights.front().size();
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  for (const auto &row : weights) {
    if (row.size() != cols) throw std::invalid_argument("ragged weight matrix");
  }
  const std::size_t n = std::max(rows, cols);
  int64_t max_w = 0;
  for (const auto &row : weights) {
    for (int64_t w : row) {
      if (w < 0) throw std::invalid_argument("negative weight");
      max_w = std::max(max_w, w);
    }
  }
  auto cost = [&](std::size_t r, std::size_t c) -> int64_t {
    if (r < rows && c < cols) return max_w - weights[r][c];
    return max_w;
  };

  const int64_t kInf = std::numeric_limits<int64_t>::max() / 4;
  // 1-based potentials and matching; column 0 is a sentinel.
  std::vector<int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t r = 1; r <= n; ++r) {
    match[0] = r;
    std::size_t c0 = 0;
    std::vector<int64_t> min_v(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[c0] = true;
      std::size_t r0 = match[c0], c1 = 0;
      int64_t delta = kInf;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        int64_t cur = cost(r0 - 1, c - 1) - u[r0] - v[c];
        if (cur < min_v[c]) {
          min_v[c] = cur;
          way[c] = c0;
        }
        if (min_v[c] < delta) {
          delta = min_v[c];
          c1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          min_v[c] -= delta;
        }
      }
      c0 = c1;
    } while (match[c0] != 0);
    do {
      std::size_t c1 = way[c0];
      match[c0] = match[c1];
      c0 = c1;
    } while (c0 != 0);
  }

  std::vector<int> assignment(rows, -1);
  for (std::size_t c = 1; c <= n; ++c) {
    std::size_t r = match[c];
    if (r >= 1 && r <= rows && c <= cols) {
      assignment[r - 1] = static_cast<int>(c - 1);
    }
  }
  return assignment;
}

namespace {

ActivitySet Restrict(const ActivitySet &a, const ActivitySet *scored) {
  return scored ? Intersection(a, *scored) : a;
}

void CheckSameGrid(const Diarization &ref, const Diarization &hyp) {
  if (ref.grid() != hyp.grid()) {
    throw GridMismatchError("reference and hypothesis are on different grids");
  }
}

double Percent(int64_t num, int64_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) /
                              static_cast<double>(den);
}

}  // namespace

SpeakerMapping OptimalMapping(const Diarization &ref, const Diarization &hyp,
                              const ActivitySet *scored) {
  CheckSameGrid(ref, hyp);
  std::vector<ActivitySet> ref_tracks, hyp_tracks;
  for (const auto &s : ref.speakers()) {
    ref_tracks.push_back(Restrict(s.activity, scored));
  }
  for (const auto &s : hyp.speakers()) {
    hyp_tracks.push_back(Restrict(s.activity, scored));
  }
  std::vector<std::vector<int64_t>> overlap(
      ref_tracks.size(), std::vector<int64_t>(hyp_tracks.size(), 0));
  for (std::size_t r = 0; r < ref_tracks.size(); ++r) {
    for (std::size_t h = 0; h < hyp_tracks.size(); ++h) {
      overlap[r][h] = static_cast<int64_t>(
          Intersection(ref_tracks[r], hyp_tracks[h]).Count());
    }
  }
  SpeakerMapping mapping;
  std::vector<int> assignment = MaxWeightAssignment(overlap);
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    int h = assignment[r];
    if (h >= 0 && overlap[r][static_cast<std::size_t>(h)] > 0) {
      mapping.emplace_back(ref.speakers()[r].id,
                           hyp.speakers()[static_cast<std::size_t>(h)].id);
    }
  }
  return mapping;
}

ActivitySet ScoredFrames(const Diarization &ref, double collar_seconds,
                         const std::vector<UemRegion> *uem) {
  if (!(collar_seconds >= 0.0)) {
    throw std::invalid_argument("collar must be non-negative");
  }
  const FrameGrid &grid = ref.grid();
  const std::size_t total = grid.total_frames();
  const int64_t shift_us = grid.shift_micros();

  ActivitySet scored(total);
  if (uem) {
    for (const auto &region : *uem) {
      auto [lo, hi] = CenterFrameRange(SecondsToMicros(region.onset),
                                       SecondsToMicros(region.offset),
                                       shift_us);
      hi = std::min<FrameIndex>(hi, total);
      if (lo < hi) scored.InsertRange(lo, hi);
    }
  } else {
    scored = ActivitySet::Full(total);
  }

  const int64_t collar_us = SecondsToMicros(collar_seconds);
  if (collar_us > 0) {
    ActivitySet excluded(total);
    for (const auto &s : ref.speakers()) {
      for (auto [begin, end] : s.activity.Runs()) {
        for (FrameIndex edge : {begin, end}) {
          int64_t b = static_cast<int64_t>(edge) * shift_us;
          auto [lo, hi] = CenterFrameRange(b - collar_us, b + collar_us + 1,
                                           shift_us);
          for (FrameIndex t = lo; t < std::min<FrameIndex>(hi, total); ++t) {
            int64_t center2 = (2 * static_cast<int64_t>(t) + 1) * shift_us;
            if (std::abs(center2 - 2 * b) < 2 * collar_us) excluded.Insert(t);
          }
        }
      }
    }
    scored -= excluded;
  }
  return scored;
}

ScoreCounts &ScoreCounts::operator+=(const ScoreCounts &other) {
  ref_speech += other.ref_speech;
  miss += other.miss;
  false_alarm += other.false_alarm;
  confusion += other.confusion;
  scored_frames += other.scored_frames;
  return *this;
}

ScoreCounts CountErrors(const Diarization &ref, const Diarization &hyp,
                        const SpeakerMapping &mapping,
                        const ActivitySet &scored) {
  CheckSameGrid(ref, hyp);
  const std::size_t total = ref.total_frames();
  std::vector<int> n_ref = ref.SpeakerCounts();
  std::vector<int> n_hyp = hyp.SpeakerCounts();
  std::vector<int> n_correct(total, 0);
  for (const auto &[r, h] : mapping) {
    ActivitySet both = Intersection(ref.Activity(r), hyp.Activity(h));
    for (FrameIndex t : both.Frames()) ++n_correct[t];
  }

  ScoreCounts c;
  for (FrameIndex t : scored.Frames()) {
    ++c.scored_frames;
    c.ref_speech += n_ref[t];
    c.miss += std::max(0, n_ref[t] - n_hyp[t]);
    c.false_alarm += std::max(0, n_hyp[t] - n_ref[t]);
    c.confusion += std::min(n_ref[t], n_hyp[t]) - n_correct[t];
  }
  return c;
}

std::vector<double> SpeakerJaccardErrors(const Diarization &ref,
                                         const Diarization &hyp,
                                         const SpeakerMapping &mapping,
                                         const ActivitySet *scored) {
  CheckSameGrid(ref, hyp);
  std::vector<double> out;
  for (const auto &s : ref.speakers()) {
    ActivitySet r = Restrict(s.activity, scored);
    if (r.Empty()) continue;
    auto it = std::find_if(mapping.begin(), mapping.end(),
                           [&](const auto &m) { return m.first == s.id; });
    if (it == mapping.end()) {
      out.push_back(1.0);
      continue;
    }
    ActivitySet h = Restrict(hyp.Activity(it->second), scored);
    double inter = static_cast<double>(Intersection(r, h).Count());
    double uni = static_cast<double>(Union(r, h).Count());
    out.push_back(1.0 - inter / uni);
  }
  return out;
}

double ComputeJer(const Diarization &ref, const Diarization &hyp,
                  const SpeakerMapping &mapping, const ActivitySet *scored) {
  auto errors = SpeakerJaccardErrors(ref, hyp, mapping, scored);
  if (errors.empty()) return 0.0;
  return 100.0 * std::accumulate(errors.begin(), errors.end(), 0.0) /
         static_cast<double>(errors.size());
}

namespace {

void FillPercentages(ScoreReport &r) {
  const ScoreCounts &c = r.counts;
  r.der = Percent(c.errors(), c.ref_speech);
  r.miss = Percent(c.miss, c.ref_speech);
  r.false_alarm = Percent(c.false_alarm, c.ref_speech);
  r.confusion = Percent(c.confusion, c.ref_speech);
  r.scored_frames = static_cast<std::size_t>(c.scored_frames);
  r.jer = r.speaker_jer.empty()
              ? 0.0
              : 100.0 *
                    std::accumulate(r.speaker_jer.begin(), r.speaker_jer.end(),
                                    0.0) /
                    static_cast<double>(r.speaker_jer.size());
}

}  // namespace

ScoreReport ComputeDer(const Diarization &ref, const Diarization &hyp,
                       double collar_seconds,
                       const std::vector<UemRegion> *uem) {
  CheckSameGrid(ref, hyp);
  ActivitySet scored = ScoredFrames(ref, collar_seconds, uem);
  ScoreReport report;
  report.mapping = OptimalMapping(ref, hyp, &scored);
  report.counts = CountErrors(ref, hyp, report.mapping, scored);
  if (report.counts.ref_speech == 0) {
    throw std::domain_error("no reference speech in the scored region");
  }
  report.speaker_jer = SpeakerJaccardErrors(ref, hyp, report.mapping, &scored);
  FillPercentages(report);
  return report;
}

ScoreReport Aggregate(const std::vector<ScoreReport> &reports) {
  ScoreReport total;
  for (const auto &r : reports) {
    total.counts += r.counts;
    total.speaker_jer.insert(total.speaker_jer.end(), r.speaker_jer.begin(),
                             r.speaker_jer.end());
  }
  FillPercentages(total);
  return total;
}

std::string FormatKeyValue(const ScoreReport &r, const std::string &recording) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "der=%.2f jer=%.2f miss=%.2f fa=%.2f conf=%.2f "
                "scored_frames=%zu",
                r.der, r.jer, r.miss, r.false_alarm, r.confusion,
                r.scored_frames);
  return recording.empty() ? std::string(buf)
                           : "recording=" + recording + " " + buf;
}

}  // namespace diar
