// src/refine.cc
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

#include "diar/refine.h"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace diar {

void RefineConfig::Validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("threshold must be in (0, 1)");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must be in [0, 1]");
  }
  if (passes < 1) throw std::invalid_argument("passes must be at least 1");
  if (k_prime != 2) {
    throw std::invalid_argument("only two-speaker backends are supported");
  }
}

const char *ToString(Permutation p) {
  return p == Permutation::kIdentity ? "ab" : "ba";
}

const char *ToString(SkipReason r) {
  switch (r) {
    case SkipReason::kTooFewFrames:
      return "too_few_frames";
    case SkipReason::kBackendError:
      return "backend_error";
    case SkipReason::kGateRejected:
      return "gate_rejected";
  }
  return "unknown";
}

ActivitySet SelectPairFrames(const Diarization &d, const std::string &i,
                             const std::string &j) {
  if (i == j) throw std::invalid_argument("pair needs two distinct speakers");
  if (!d.Find(i)) throw std::out_of_range("unknown speaker '" + i + "'");
  if (!d.Find(j)) throw std::out_of_range("unknown speaker '" + j + "'");
  ActivitySet others(d.total_frames());
  for (const auto &s : d.speakers()) {
    if (s.id != i && s.id != j) others |= s.activity;
  }
  return Complement(others);
}

std::vector<std::pair<std::string, std::string>> OrderPairs(
    const Diarization &d) {
  struct Ranked {
    std::size_t size;
    std::string i;
    std::string j;
  };
  std::vector<std::string> ids;
  for (const auto &s : d.speakers()) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());

  std::vector<Ranked> ranked;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      ranked.push_back(
          {SelectPairFrames(d, ids[a], ids[b]).Count(), ids[a], ids[b]});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked &x, const Ranked &y) {
                     if (x.size != y.size) return x.size > y.size;
                     return std::tie(x.i, x.j) < std::tie(y.i, y.j);
                   });
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(ranked.size());
  for (auto &r : ranked) out.emplace_back(std::move(r.i), std::move(r.j));
  return out;
}

std::pair<ActivitySet, ActivitySet> ThresholdPosteriors(
    const PosteriorMatrix &p, double threshold, std::size_t total_frames) {
  ActivitySet q_a(total_frames);
  ActivitySet q_b(total_frames);
  for (std::size_t n = 0; n < p.size(); ++n) {
    FrameIndex t = p.frames()[n];
    if (p.values()[n].first > threshold) q_a.Insert(t);
    if (p.values()[n].second > threshold) q_b.Insert(t);
  }
  return {std::move(q_a), std::move(q_b)};
}

std::size_t Similarity(const ActivitySet &u, const ActivitySet &v,
                       std::size_t total_frames) {
  if (u.total_frames() != total_frames || v.total_frames() != total_frames) {
    throw GridMismatchError("similarity over mismatched grids");
  }
  std::size_t speech = Intersection(u, v).Count();
  std::size_t non_speech = Intersection(Complement(u), Complement(v)).Count();
  return speech + non_speech;
}

Resolved ResolvePermutation(const ActivitySet &q_a, const ActivitySet &q_b,
                            const ActivitySet &t_i, const ActivitySet &t_j,
                            std::size_t total_frames) {
  std::size_t identity = Similarity(q_a, t_i, total_frames) +
                         Similarity(q_b, t_j, total_frames);
  std::size_t swapped = Similarity(q_b, t_i, total_frames) +
                        Similarity(q_a, t_j, total_frames);
  if (swapped > identity) {
    return {q_b, q_a, Permutation::kSwapped, swapped};
  }
  return {q_a, q_b, Permutation::kIdentity, identity};
}

namespace {

bool Retains(const ActivitySet &new_track, const ActivitySet &old_track,
             const ActivitySet &selection, double alpha) {
  ActivitySet old_inside = Intersection(old_track, selection);
  std::size_t denominator = old_inside.Count();
  if (denominator == 0) return false;
  std::size_t kept = Intersection(new_track, old_inside).Count();
  return static_cast<double>(kept) / static_cast<double>(denominator) > alpha;
}

}  // namespace

bool CheckAcceptance(const ActivitySet &new_i, const ActivitySet &new_j,
                     const ActivitySet &t_i, const ActivitySet &t_j,
                     const ActivitySet &selection, double alpha) {
  return Retains(new_i, t_i, selection, alpha) &&
         Retains(new_j, t_j, selection, alpha);
}

Diarization ApplyUpdate(const Diarization &d, const std::string &i,
                        const std::string &j, const ActivitySet &new_i,
                        const ActivitySet &new_j,
                        const ActivitySet &selection) {
  Diarization out = d;
  if (d.NumSpeakers() == 2) {
    ActivitySet outside = Complement(selection);
    out.SetActivity(i, Union(new_i, outside));
    out.SetActivity(j, Union(new_j, outside));
  } else {
    ActivitySet overlap = Intersection(new_i, new_j);
    out.SetActivity(i, Union(d.Activity(i), overlap));
    out.SetActivity(j, Union(d.Activity(j), overlap));
  }
  return out;
}

RefineResult RefineRecording(const Diarization &initial,
                             PosteriorBackend &backend,
                             const RefineConfig &config,
                             const std::string &recording_id) {
  config.Validate();
  for (const auto &s : initial.speakers()) {
    if (s.activity.Empty()) {
      throw std::invalid_argument("speaker '" + s.id +
                                  "' has no active frames");
    }
  }

  RefineResult result{initial, {}};
  if (initial.NumSpeakers() < 2) return result;

  Diarization &current = result.diarization;
  const std::size_t total = current.total_frames();
  for (int pass = 0; pass < config.passes; ++pass) {
    for (const auto &[i, j] : OrderPairs(current)) {
      PairStep step;
      step.pass = pass;
      step.speaker_i = i;
      step.speaker_j = j;

      ActivitySet selection = SelectPairFrames(current, i, j);
      step.selected_count = selection.Count();
      if (step.selected_count == 0 ||
          step.selected_count < config.min_pair_frames) {
        step.skipped_reason = SkipReason::kTooFewFrames;
        result.trace.push_back(std::move(step));
        continue;
      }

      PosteriorRequest req{recording_id, selection.Frames(),
                           current.grid().frame_shift_ms(),
                           std::make_pair(i, j)};
      PosteriorMatrix posteriors;
      try {
        posteriors = backend.Infer(req);
        CheckResponseMatches(req, posteriors);
      } catch (const std::exception &e) {
        step.skipped_reason = SkipReason::kBackendError;
        step.error = e.what();
        result.trace.push_back(std::move(step));
        continue;
      }

      auto [q_a, q_b] = ThresholdPosteriors(posteriors, config.threshold, total);
      const ActivitySet &t_i = current.Activity(i);
      const ActivitySet &t_j = current.Activity(j);
      Resolved resolved = ResolvePermutation(q_a, q_b, t_i, t_j, total);
      step.permutation = resolved.permutation;

      if (!CheckAcceptance(resolved.track_i, resolved.track_j, t_i, t_j,
                           selection, config.alpha)) {
        step.skipped_reason = SkipReason::kGateRejected;
        result.trace.push_back(std::move(step));
        continue;
      }

      Diarization next = ApplyUpdate(current, i, j, resolved.track_i,
                                     resolved.track_j, selection);
      const ActivitySet &next_i = next.Activity(i);
      const ActivitySet &next_j = next.Activity(j);
      step.accepted = true;
      step.frames_added_i = Difference(next_i, t_i).Count();
      step.frames_added_j = Difference(next_j, t_j).Count();
      step.frames_removed_i = Difference(t_i, next_i).Count();
      step.frames_removed_j = Difference(t_j, next_j).Count();
      current = std::move(next);
      result.trace.push_back(std::move(step));
    }
  }
  return result;
}

AdaptationSelection SelectAdaptationFrames(const Diarization &reference,
                                           FrameIndex chunk_begin,
                                           FrameIndex chunk_end) {
  chunk_end = std::min<FrameIndex>(chunk_end, reference.total_frames());
  if (chunk_begin >= chunk_end) {
    throw std::invalid_argument("empty chunk range");
  }
  ActivitySet chunk = ActivitySet::FromRange(reference.total_frames(),
                                             chunk_begin, chunk_end);

  std::vector<std::pair<std::size_t, std::string>> active;
  for (const auto &s : reference.speakers()) {
    std::size_t n = Intersection(s.activity, chunk).Count();
    if (n > 0) active.emplace_back(n, s.id);
  }
  if (active.empty()) {
    throw std::invalid_argument("chunk contains no active frames");
  }
  std::sort(active.begin(), active.end(), [](const auto &a, const auto &b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  AdaptationSelection out{chunk, active[0].second, std::nullopt};
  if (active.size() >= 2) {
    out.speaker_2 = active[1].second;
    out.frames = Intersection(
        chunk, SelectPairFrames(reference, active[0].second, active[1].second));
  }
  return out;
}

}  // namespace diar
