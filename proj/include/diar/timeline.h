// include/diar/timeline.h
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

#ifndef DIAR_TIMELINE_H_
#define DIAR_TIMELINE_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diar {

using FrameIndex = std::size_t;

inline constexpr int kDefaultFrameShiftMs = 100;

class GridMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Converts a time in seconds to integer microseconds, rounding to nearest.
// All boundary arithmetic is done on this integer scale.
int64_t SecondsToMicros(double seconds);

/// Discrete time axis: frame t covers [t * shift, (t + 1) * shift) and is
/// represented by its center (t + 0.5) * shift.
class FrameGrid {
 public:
  FrameGrid(int frame_shift_ms, std::size_t total_frames);

  int frame_shift_ms() const { return frame_shift_ms_; }
  std::size_t total_frames() const { return total_frames_; }

  int64_t shift_micros() const { return int64_t{frame_shift_ms_} * 1000; }

  /// Onset of frame t in seconds.
  double TimeOf(FrameIndex t) const;

  /// Frame containing the given time (floor). May be >= total_frames.
  FrameIndex FrameOf(double seconds) const;

  bool operator==(const FrameGrid &other) const = default;

 private:
  int frame_shift_ms_;
  std::size_t total_frames_;
};

/// Set of active frame indices in [0, T), stored as a bitset of length T.
class ActivitySet {
 public:
  ActivitySet() = default;
  explicit ActivitySet(std::size_t total_frames);

  static ActivitySet FromFrames(std::size_t total_frames,
                                std::span<const FrameIndex> frames);
  static ActivitySet FromFrames(std::size_t total_frames,
                                std::initializer_list<FrameIndex> frames);
  /// Frames [begin, end).
  static ActivitySet FromRange(std::size_t total_frames, FrameIndex begin,
                               FrameIndex end);
  static ActivitySet Full(std::size_t total_frames);

  std::size_t total_frames() const { return total_frames_; }
  std::size_t Count() const;
  bool Empty() const { return Count() == 0; }
  bool Contains(FrameIndex t) const;

  void Insert(FrameIndex t);
  void Erase(FrameIndex t);
  void InsertRange(FrameIndex begin, FrameIndex end);

  /// Active frames in ascending order.
  std::vector<FrameIndex> Frames() const;

  /// Maximal runs of consecutive active frames as [begin, end) pairs.
  std::vector<std::pair<FrameIndex, FrameIndex>> Runs() const;

  bool IsSubsetOf(const ActivitySet &other) const;

  ActivitySet &operator|=(const ActivitySet &other);
  ActivitySet &operator&=(const ActivitySet &other);
  ActivitySet &operator-=(const ActivitySet &other);

  bool operator==(const ActivitySet &other) const = default;

 private:
  void CheckSameGrid(const ActivitySet &other) const;
  void CheckIndex(FrameIndex t) const;

  std::size_t total_frames_ = 0;
  std::vector<uint64_t> words_;
};

ActivitySet Union(const ActivitySet &a, const ActivitySet &b);
ActivitySet Intersection(const ActivitySet &a, const ActivitySet &b);
ActivitySet Difference(const ActivitySet &a, const ActivitySet &b);
ActivitySet SymmetricDifference(const ActivitySet &a, const ActivitySet &b);
/// [T] \ a.
ActivitySet Complement(const ActivitySet &a);

inline ActivitySet operator|(const ActivitySet &a, const ActivitySet &b) {
  return Union(a, b);
}
inline ActivitySet operator&(const ActivitySet &a, const ActivitySet &b) {
  return Intersection(a, b);
}
inline ActivitySet operator-(const ActivitySet &a, const ActivitySet &b) {
  return Difference(a, b);
}
inline ActivitySet operator~(const ActivitySet &a) { return Complement(a); }

struct Segment {
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds
  bool operator==(const Segment &other) const = default;
};

/// Maximal runs of `a` as (onset, duration) pairs in seconds, sorted by onset.
std::vector<Segment> FramesToSegments(const ActivitySet &a,
                                      const FrameGrid &grid);

/// Rasterizes segments by the frame-center rule: frame t is active iff its
/// center lies in [onset, onset + duration). Frames past the grid are dropped.
ActivitySet SegmentsToFrames(std::span<const Segment> segments,
                             const FrameGrid &grid);

/// Frame range [begin, end) whose centers lie in [onset_us, offset_us).
std::pair<FrameIndex, FrameIndex> CenterFrameRange(int64_t onset_us,
                                                   int64_t offset_us,
                                                   int64_t shift_us);

struct SpeakerActivity {
  std::string id;
  ActivitySet activity;
  bool operator==(const SpeakerActivity &other) const = default;
};

/// K named speakers on a common grid. Speakers may overlap.
class Diarization {
 public:
  explicit Diarization(FrameGrid grid);
  Diarization(FrameGrid grid, std::vector<SpeakerActivity> speakers);

  const FrameGrid &grid() const { return grid_; }
  std::size_t total_frames() const { return grid_.total_frames(); }
  const std::vector<SpeakerActivity> &speakers() const { return speakers_; }
  std::size_t NumSpeakers() const { return speakers_.size(); }

  void AddSpeaker(std::string id, ActivitySet activity);

  /// Index of the speaker, or nullopt.
  std::optional<std::size_t> Find(const std::string &id) const;
  /// Throws std::out_of_range for an unknown id.
  const ActivitySet &Activity(const std::string &id) const;
  void SetActivity(const std::string &id, ActivitySet activity);

  bool IsOverlapFree() const;

  /// Frames where at least one speaker is active.
  ActivitySet Speech() const;
  /// Number of active speakers per frame.
  std::vector<int> SpeakerCounts() const;

  /// Copy with speakers whose activity is empty removed.
  Diarization WithoutEmptySpeakers() const;

  bool operator==(const Diarization &other) const = default;

 private:
  void Validate(const SpeakerActivity &s) const;

  FrameGrid grid_;
  std::vector<SpeakerActivity> speakers_;
};

/// Two-speaker posteriors over a selected, strictly ascending frame list.
class PosteriorMatrix {
 public:
  PosteriorMatrix() = default;
  PosteriorMatrix(std::vector<FrameIndex> frames,
                  std::vector<std::pair<double, double>> values);

  const std::vector<FrameIndex> &frames() const { return frames_; }
  const std::vector<std::pair<double, double>> &values() const {
    return values_;
  }
  std::size_t size() const { return frames_.size(); }

  /// Copy with channels a and b exchanged.
  PosteriorMatrix Swapped() const;

  bool operator==(const PosteriorMatrix &other) const = default;

 private:
  std::vector<FrameIndex> frames_;
  std::vector<std::pair<double, double>> values_;
};

}  // namespace diar

#endif  // DIAR_TIMELINE_H_
