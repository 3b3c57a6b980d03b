// include/diar/scoring.h
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

#ifndef DIAR_SCORING_H_
#define DIAR_SCORING_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diar/rttm_io.h"
#include "diar/timeline.h"

namespace diar {

/// Maximum-weight one-to-one assignment on a rows x cols matrix of
/// non-negative weights. Returns, per row, the assigned column or -1.
/// Rectangular inputs are padded to square internally.
std::vector<int> MaxWeightAssignment(
    const std::vector<std::vector<int64_t>> &weights);

/// Reference-to-hypothesis speaker pairs.
using SpeakerMapping = std::vector<std::pair<std::string, std::string>>;

/// Assignment maximizing the total number of co-active frames (restricted to
/// `scored` when given). Pairs with no shared frames are left unmapped.
SpeakerMapping OptimalMapping(const Diarization &ref, const Diarization &hyp,
                              const ActivitySet *scored = nullptr);

/// Frames left after removing the collar around every reference segment
/// boundary and everything outside the UEM regions (when given).
ActivitySet ScoredFrames(const Diarization &ref, double collar_seconds,
                         const std::vector<UemRegion> *uem = nullptr);

struct ScoreCounts {
  int64_t ref_speech = 0;  // sum of reference speakers over scored frames
  int64_t miss = 0;
  int64_t false_alarm = 0;
  int64_t confusion = 0;
  int64_t scored_frames = 0;

  int64_t errors() const { return miss + false_alarm + confusion; }
  ScoreCounts &operator+=(const ScoreCounts &other);
};

struct ScoreReport {
  double der = 0.0;  // percent
  double jer = 0.0;  // percent
  double miss = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  std::size_t scored_frames = 0;
  SpeakerMapping mapping;
  ScoreCounts counts;
  // Per reference speaker (1 - Jaccard); feeds speaker-weighted aggregates.
  std::vector<double> speaker_jer;
};

/// Frame-level error counts over `scored` under `mapping`.
ScoreCounts CountErrors(const Diarization &ref, const Diarization &hyp,
                        const SpeakerMapping &mapping,
                        const ActivitySet &scored);

/// Per reference speaker 1 - |ref & hyp| / |ref | hyp| (1 when unmapped),
/// restricted to `scored` when given.
std::vector<double> SpeakerJaccardErrors(const Diarization &ref,
                                         const Diarization &hyp,
                                         const SpeakerMapping &mapping,
                                         const ActivitySet *scored = nullptr);

/// Mean of SpeakerJaccardErrors, in percent.
double ComputeJer(const Diarization &ref, const Diarization &hyp,
                  const SpeakerMapping &mapping,
                  const ActivitySet *scored = nullptr);

/// Overlap-inclusive DER with optional collar and UEM, plus JER under the
/// same mapping. Throws std::domain_error when no reference speech is
/// scored.
ScoreReport ComputeDer(const Diarization &ref, const Diarization &hyp,
                       double collar_seconds,
                       const std::vector<UemRegion> *uem = nullptr);

/// Frame-weighted DER over several recordings and speaker-weighted JER.
ScoreReport Aggregate(const std::vector<ScoreReport> &reports);

/// "der=… jer=… miss=… fa=… conf=… scored_frames=…", optionally prefixed
/// with "recording=<id> ".
std::string FormatKeyValue(const ScoreReport &r, const std::string &recording);

}  // namespace diar

#endif  // DIAR_SCORING_H_
