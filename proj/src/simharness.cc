// src/simharness.cc
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

#include "diar/simharness.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "diar/random.h"

namespace diar {

namespace {

struct Turn {
  int speaker;
  FrameIndex begin;
  FrameIndex end;
};

FrameIndex ToFrames(double seconds, int shift_ms) {
  return static_cast<FrameIndex>(std::llround(seconds * 1000.0 / shift_ms));
}

// One candidate conversation for a given overlap probability.
std::vector<Turn> DrawTurns(const SceneSpec &spec, std::size_t total,
                            double p_overlap, std::mt19937_64 &rng) {
  const int shift = spec.frame_shift_ms;
  const FrameIndex min_turn = std::max<FrameIndex>(1, ToFrames(0.5, shift));
  const double extra_turn = std::max(0.0, spec.mean_turn - 0.5);

  std::vector<Turn> turns;
  std::size_t holder = 0;  // turn with the latest end so far
  FrameIndex start = ToFrames(Exponential(rng, spec.mean_gap), shift);
  int previous = -1;
  while (start < total) {
    std::vector<int> candidates;
    for (int k = 0; k < spec.num_speakers; ++k) {
      if (k == previous && spec.num_speakers > 1) continue;
      bool busy = std::any_of(turns.begin(), turns.end(), [&](const Turn &t) {
        return t.speaker == k && t.begin <= start && start < t.end;
      });
      if (!busy) candidates.push_back(k);
    }
    if (candidates.empty()) {
      start = turns[holder].end + ToFrames(Exponential(rng, spec.mean_gap), shift);
      continue;
    }
    int speaker = candidates[UniformIndex(rng, candidates.size())];
    FrameIndex len = min_turn + ToFrames(Exponential(rng, extra_turn), shift);
    FrameIndex end = std::min<FrameIndex>(total, start + len);
    turns.push_back({speaker, start, end});
    if (turns.size() == 1 || end > turns[holder].end) holder = turns.size() - 1;
    previous = speaker;

    const Turn &h = turns[holder];
    double u = UniformUnit(rng);
    double frac = 0.2 + 0.6 * UniformUnit(rng);
    double gap = Exponential(rng, spec.mean_gap);
    if (spec.num_speakers > 1 && u < p_overlap) {
      auto back = static_cast<FrameIndex>(
          std::llround(frac * static_cast<double>(h.end - h.begin)));
      start = std::max(h.begin + 1, h.end - std::max<FrameIndex>(1, back));
    } else {
      start = h.end + ToFrames(gap, shift);
    }
  }
  return turns;
}

Diarization TurnsToDiarization(const std::vector<Turn> &turns,
                               const SceneSpec &spec, std::size_t total) {
  FrameGrid grid(spec.frame_shift_ms, total);
  std::vector<ActivitySet> tracks(spec.num_speakers, ActivitySet(total));
  for (const Turn &t : turns) tracks[t.speaker].InsertRange(t.begin, t.end);
  Diarization d(grid);
  for (int k = 0; k < spec.num_speakers; ++k) {
    d.AddSpeaker(SimSpeakerId(k, spec.num_speakers), std::move(tracks[k]));
  }
  return d;
}

}  // namespace

void SceneSpec::Validate() const {
  if (num_speakers < 1) throw std::invalid_argument("need at least 1 speaker");
  if (!(total_duration > 0.0) || !(mean_turn > 0.0) || !(mean_gap > 0.0)) {
    throw std::invalid_argument("durations must be positive");
  }
  if (!(target_overlap_ratio >= 0.0 && target_overlap_ratio < 1.0)) {
    throw std::invalid_argument("overlap ratio must be in [0, 1)");
  }
  if (frame_shift_ms <= 0) {
    throw std::invalid_argument("frame shift must be positive");
  }
  if (num_speakers == 1 && target_overlap_ratio > 0.0) {
    throw std::invalid_argument("a single speaker cannot overlap");
  }
  if (max_attempts < 1 || !(tolerance >= 0.0)) {
    throw std::invalid_argument("bad attempt budget or tolerance");
  }
}

double OverlapRatio(const Diarization &d) {
  std::size_t speech = 0, overlap = 0;
  for (int n : d.SpeakerCounts()) {
    speech += n >= 1;
    overlap += n >= 2;
  }
  return speech == 0 ? 0.0
                     : static_cast<double>(overlap) /
                           static_cast<double>(speech);
}

std::string SimSpeakerId(int k, int num_speakers) {
  std::string digits = std::to_string(k + 1);
  std::size_t width = std::to_string(num_speakers).size();
  return "spk" + std::string(width - digits.size(), '0') + digits;
}

Diarization GenerateScene(const SceneSpec &spec) {
  spec.Validate();
  const std::size_t total = ToFrames(spec.total_duration, spec.frame_shift_ms);
  if (total == 0) throw std::invalid_argument("scene shorter than one frame");

  std::mt19937_64 rng(spec.seed);
  const double target = spec.target_overlap_ratio;
  double p_overlap = target > 0.0 ? std::min(1.0, 2.0 * target) : 0.0;
  double last_ratio = 0.0;
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    auto turns = DrawTurns(spec, total, p_overlap, rng);
    Diarization d = TurnsToDiarization(turns, spec, total);
    bool all_speak = std::none_of(
        d.speakers().begin(), d.speakers().end(),
        [](const SpeakerActivity &s) { return s.activity.Empty(); });
    last_ratio = OverlapRatio(d);
    if (all_speak && std::abs(last_ratio - target) <= spec.tolerance) return d;
    if (target > 0.0) {
      double scale = last_ratio > 0.0 ? target / last_ratio : 2.0;
      // Damped multiplicative update; realized ratios are noisy per draw.
      p_overlap = std::clamp(p_overlap * std::sqrt(scale), 0.01, 1.0);
    }
  }
  throw std::runtime_error("could not reach overlap ratio " +
                           std::to_string(target) + " (last attempt " +
                           std::to_string(last_ratio) + ")");
}

Diarization DegradeToClustering(const Diarization &reference,
                                double confusion_rate, uint64_t seed) {
  if (!(confusion_rate >= 0.0 && confusion_rate <= 1.0)) {
    throw std::invalid_argument("confusion rate must be in [0, 1]");
  }
  const std::size_t total = reference.total_frames();
  const std::size_t num = reference.NumSpeakers();

  // Start frame of the run each speaker is in, per frame.
  constexpr FrameIndex kSilent = static_cast<FrameIndex>(-1);
  std::vector<std::vector<FrameIndex>> run_start(
      num, std::vector<FrameIndex>(total, kSilent));
  for (std::size_t k = 0; k < num; ++k) {
    for (auto [begin, end] : reference.speakers()[k].activity.Runs()) {
      for (FrameIndex t = begin; t < end; ++t) run_start[k][t] = begin;
    }
  }

  std::vector<int> label(total, -1);
  for (FrameIndex t = 0; t < total; ++t) {
    for (std::size_t k = 0; k < num; ++k) {
      if (run_start[k][t] == kSilent) continue;
      if (label[t] < 0 ||
          run_start[k][t] < run_start[static_cast<std::size_t>(label[t])][t]) {
        label[t] = static_cast<int>(k);
      }
    }
  }

  std::mt19937_64 rng(seed);
  if (num >= 2 && confusion_rate > 0.0) {
    for (FrameIndex t = 0; t < total; ++t) {
      if (label[t] < 0) continue;
      if (UniformUnit(rng) < confusion_rate) {
        std::size_t other = UniformIndex(rng, num - 1);
        if (other >= static_cast<std::size_t>(label[t])) ++other;
        label[t] = static_cast<int>(other);
      }
    }
  }

  std::vector<ActivitySet> tracks(num, ActivitySet(total));
  for (FrameIndex t = 0; t < total; ++t) {
    if (label[t] >= 0) tracks[static_cast<std::size_t>(label[t])].Insert(t);
  }
  Diarization out(reference.grid());
  for (std::size_t k = 0; k < num; ++k) {
    out.AddSpeaker(reference.speakers()[k].id, std::move(tracks[k]));
  }
  return out;
}

}  // namespace diar
