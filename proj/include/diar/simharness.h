// include/diar/simharness.h
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

#ifndef DIAR_SIMHARNESS_H_
#define DIAR_SIMHARNESS_H_

#include <cstddef>
#include <cstdint>
#include <string>

#include "diar/timeline.h"

namespace diar {

// Overlapped share of speech time in the CALLHOME adaptation set.
inline constexpr double kDefaultOverlapRatio = 0.17;

struct SceneSpec {
  int num_speakers = 2;
  double total_duration = 300.0;  // seconds
  double target_overlap_ratio = kDefaultOverlapRatio;
  double mean_turn = 3.0;  // seconds
  double mean_gap = 0.5;   // seconds
  uint64_t seed = 0;
  int frame_shift_ms = kDefaultFrameShiftMs;
  double tolerance = 0.03;  // accepted |realized - target|
  int max_attempts = 200;

  void Validate() const;
};

/// Frames with two or more speakers over frames with at least one.
double OverlapRatio(const Diarization &d);

/// Speaker id used for speaker k (0-based) of a K-speaker scene.
std::string SimSpeakerId(int k, int num_speakers);

/// Alternating-turn conversation with exponential turn and gap lengths. A
/// new turn overlaps the tail of the running one with a probability that is
/// re-tuned between attempts until the realized overlap ratio is within
/// `tolerance` of the target and every speaker has spoken. Deterministic per
/// seed. Throws std::invalid_argument for an invalid or infeasible spec and
/// std::runtime_error when no attempt lands in tolerance.
Diarization GenerateScene(const SceneSpec &spec);

/// Simulates hard clustering: every overlapped frame keeps only the speaker
/// whose current turn started earliest (ties by speaker order), then each
/// speech frame is relabeled to a uniformly drawn other speaker with
/// probability `confusion_rate`. The output is overlap-free and keeps the
/// input's speakers, some of which may end up empty.
Diarization DegradeToClustering(const Diarization &reference,
                                double confusion_rate, uint64_t seed);

}  // namespace diar

#endif  // DIAR_SIMHARNESS_H_
