// include/diar/refine.h
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

#ifndef DIAR_REFINE_H_
#define DIAR_REFINE_H_

// Pairwise refinement of a clustering-style diarization with a two-speaker
// posterior model.
//
// For every speaker pair (i, j) the frames where no other speaker is active
// are handed to the backend. Its two output channels are thresholded, matched
// to (i, j) by speech/non-speech agreement, and accepted only if each new
// track keeps more than `alpha` of that speaker's previous frames inside the
// selection. With two speakers the selection is replaced outright; with three
// or more, both speakers gain only the frames the model marks as overlapped.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diar/backends.h"
#include "diar/timeline.h"

namespace diar {

struct RefineConfig {
  double threshold = 0.5;
  double alpha = 0.5;
  std::size_t min_pair_frames = 50;
  int passes = 1;
  int k_prime = 2;  // speakers per backend call; only 2 is supported

  /// Throws std::invalid_argument when out of range.
  void Validate() const;
};

enum class Permutation { kIdentity, kSwapped };  // (a->i, b->j) / (b->i, a->j)
enum class SkipReason { kTooFewFrames, kBackendError, kGateRejected };

const char *ToString(Permutation p);
const char *ToString(SkipReason r);

/// Audit record of one pair step.
struct PairStep {
  int pass = 0;
  std::string speaker_i;
  std::string speaker_j;
  std::size_t selected_count = 0;
  std::optional<Permutation> permutation;
  bool accepted = false;
  std::size_t frames_added_i = 0;
  std::size_t frames_added_j = 0;
  // Non-zero only on the two-speaker path, which replaces the selection.
  std::size_t frames_removed_i = 0;
  std::size_t frames_removed_j = 0;
  std::optional<SkipReason> skipped_reason;
  std::string error;  // backend message when skipped_reason is kBackendError

  bool operator==(const PairStep &other) const = default;
};

using RefineTrace = std::vector<PairStep>;

struct RefineResult {
  Diarization diarization;
  RefineTrace trace;
};

/// [T] minus every frame where a speaker other than i and j is active.
ActivitySet SelectPairFrames(const Diarization &d, const std::string &i,
                             const std::string &j);

/// All unordered pairs, by decreasing selection size, ties by (id_i, id_j).
/// Within a pair the ids are in lexicographic order.
std::vector<std::pair<std::string, std::string>> OrderPairs(
    const Diarization &d);

/// Frames whose posterior is strictly above `threshold`, per channel.
std::pair<ActivitySet, ActivitySet> ThresholdPosteriors(
    const PosteriorMatrix &p, double threshold, std::size_t total_frames);

/// |u & v| + |~u & ~v| over a grid of `total_frames`.
std::size_t Similarity(const ActivitySet &u, const ActivitySet &v,
                       std::size_t total_frames);

struct Resolved {
  ActivitySet track_i;
  ActivitySet track_j;
  Permutation permutation = Permutation::kIdentity;
  std::size_t score = 0;
};

/// Assigns the channels to (i, j) maximizing total similarity; ties keep the
/// identity assignment.
Resolved ResolvePermutation(const ActivitySet &q_a, const ActivitySet &q_b,
                            const ActivitySet &t_i, const ActivitySet &t_j,
                            std::size_t total_frames);

/// True iff both new tracks keep strictly more than `alpha` of the previous
/// frames inside the selection. A speaker with no previous frames inside the
/// selection fails the check.
bool CheckAcceptance(const ActivitySet &new_i, const ActivitySet &new_j,
                     const ActivitySet &t_i, const ActivitySet &t_j,
                     const ActivitySet &selection, double alpha);

/// Applies an accepted step. With two speakers both tracks become
/// new | ~selection; with more, both gain new_i & new_j.
Diarization ApplyUpdate(const Diarization &d, const std::string &i,
                        const std::string &j, const ActivitySet &new_i,
                        const ActivitySet &new_j,
                        const ActivitySet &selection);

/// Runs `config.passes` sweeps over all speaker pairs. Pair order is fixed at
/// the start of each pass; the selection is recomputed before every step.
/// Backend failures skip the pair. Throws std::invalid_argument for an
/// invalid config or a speaker with no active frames.
RefineResult RefineRecording(const Diarization &initial,
                             PosteriorBackend &backend,
                             const RefineConfig &config,
                             const std::string &recording_id = "rec");

struct AdaptationSelection {
  ActivitySet frames;
  std::optional<std::string> speaker_1;
  std::optional<std::string> speaker_2;
};

/// Training-data selection for a two-speaker model: the two speakers with the
/// most frames in [chunk_begin, chunk_end) (ties by id) and the chunk frames
/// where no other speaker is active. With fewer than two active speakers the
/// whole chunk is returned. Throws std::invalid_argument for an empty chunk
/// or one without speech.
AdaptationSelection SelectAdaptationFrames(const Diarization &reference,
                                           FrameIndex chunk_begin,
                                           FrameIndex chunk_end);

}  // namespace diar

#endif  // DIAR_REFINE_H_
