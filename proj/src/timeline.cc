// src/timeline.cc
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

#include "diar/timeline.h"

#include <algorithm>
#include <bit>
#include <cmath>

namespace diar {

namespace {

constexpr std::size_t kWordBits = 64;

std::size_t NumWords(std::size_t bits) {
  return (bits + kWordBits - 1) / kWordBits;
}

// Ceiling division that is correct for negative numerators.
int64_t CeilDiv(int64_t num, int64_t den) {
  int64_t q = num / den;
  if (num % den != 0 && ((num > 0) == (den > 0))) ++q;
  return q;
}

}  // namespace

int64_t SecondsToMicros(double seconds) {
  return static_cast<int64_t>(std::llround(seconds * 1e6));
}

FrameGrid::FrameGrid(int frame_shift_ms, std::size_t total_frames)
    : frame_shift_ms_(frame_shift_ms), total_frames_(total_frames) {
  if (frame_shift_ms <= 0) {
    throw std::invalid_argument("frame shift must be positive, got " +
                                std::to_string(frame_shift_ms));
  }
  if (total_frames == 0) {
    throw std::invalid_argument("total_frames must be positive");
  }
}

double FrameGrid::TimeOf(FrameIndex t) const {
  return static_cast<double>(t) * frame_shift_ms_ / 1000.0;
}

FrameIndex FrameGrid::FrameOf(double seconds) const {
  int64_t us = SecondsToMicros(seconds);
  if (us < 0) throw std::invalid_argument("negative time");
  return static_cast<FrameIndex>(us / shift_micros());
}

// ---------------------------------------------------------------------------
// ActivitySet

ActivitySet::ActivitySet(std::size_t total_frames)
    : total_frames_(total_frames), words_(NumWords(total_frames), 0) {}

ActivitySet ActivitySet::FromFrames(std::size_t total_frames,
                                    std::span<const FrameIndex> frames) {
  ActivitySet s(total_frames);
  for (FrameIndex t : frames) s.Insert(t);
  return s;
}

ActivitySet ActivitySet::FromFrames(std::size_t total_frames,
                                    std::initializer_list<FrameIndex> frames) {
  return FromFrames(total_frames,
                    std::span<const FrameIndex>(frames.begin(), frames.size()));
}

ActivitySet ActivitySet::FromRange(std::size_t total_frames, FrameIndex begin,
                                   FrameIndex end) {
  ActivitySet s(total_frames);
  s.InsertRange(begin, end);
  return s;
}

ActivitySet ActivitySet::Full(std::size_t total_frames) {
  return FromRange(total_frames, 0, total_frames);
}

std::size_t ActivitySet::Count() const {
  std::size_t n = 0;
  for (uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool ActivitySet::Contains(FrameIndex t) const {
  if (t >= total_frames_) return false;
  return (words_[t / kWordBits] >> (t % kWordBits)) & 1u;
}

void ActivitySet::CheckIndex(FrameIndex t) const {
  if (t >= total_frames_) {
    throw std::out_of_range("frame " + std::to_string(t) +
                            " outside grid of " +
                            std::to_string(total_frames_) + " frames");
  }
}

void ActivitySet::Insert(FrameIndex t) {
  CheckIndex(t);
  words_[t / kWordBits] |= uint64_t{1} << (t % kWordBits);
}

void ActivitySet::Erase(FrameIndex t) {
  CheckIndex(t);
  words_[t / kWordBits] &= ~(uint64_t{1} << (t % kWordBits));
}

void ActivitySet::InsertRange(FrameIndex begin, FrameIndex end) {
  if (begin >= end) return;
  CheckIndex(end - 1);
  for (FrameIndex t = begin; t < end;) {
    std::size_t bit = t % kWordBits;
    std::size_t span = std::min(kWordBits - bit, end - t);
    uint64_t mask = span == kWordBits ? ~uint64_t{0}
                                      : ((uint64_t{1} << span) - 1) << bit;
    words_[t / kWordBits] |= mask;
    t += span;
  }
}

std::vector<FrameIndex> ActivitySet::Frames() const {
  std::vector<FrameIndex> out;
  out.reserve(Count());
  for (std::size_t w = 0; w < words_.size(); ++w) {
    uint64_t word = words_[w];
    while (word != 0) {
      int bit = std::countr_zero(word);
      out.push_back(w * kWordBits + static_cast<std::size_t>(bit));
      word &= word - 1;
    }
  }
  return out;
}

std::vector<std::pair<FrameIndex, FrameIndex>> ActivitySet::Runs() const {
  std::vector<std::pair<FrameIndex, FrameIndex>> runs;
  for (FrameIndex t : Frames()) {
    if (!runs.empty() && runs.back().second == t) {
      runs.back().second = t + 1;
    } else {
      runs.emplace_back(t, t + 1);
    }
  }
  return runs;
}

bool ActivitySet::IsSubsetOf(const ActivitySet &other) const {
  CheckSameGrid(other);
  for (std::size_t w = 0; w < words_.size(); ++w) {
    if (words_[w] & ~other.words_[w]) return false;
  }
  return true;
}

void ActivitySet::CheckSameGrid(const ActivitySet &other) const {
  if (total_frames_ != other.total_frames_) {
    throw GridMismatchError("activity sets on different grids (" +
                            std::to_string(total_frames_) + " vs " +
                            std::to_string(other.total_frames_) + " frames)");
  }
}

ActivitySet &ActivitySet::operator|=(const ActivitySet &other) {
  CheckSameGrid(other);
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= other.words_[w];
  return *this;
}

ActivitySet &ActivitySet::operator&=(const ActivitySet &other) {
  CheckSameGrid(other);
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= other.words_[w];
  return *this;
}

ActivitySet &ActivitySet::operator-=(const ActivitySet &other) {
  CheckSameGrid(other);
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= ~other.words_[w];
  return *this;
}

ActivitySet Union(const ActivitySet &a, const ActivitySet &b) {
  ActivitySet r = a;
  r |= b;
  return r;
}

ActivitySet Intersection(const ActivitySet &a, const ActivitySet &b) {
  ActivitySet r = a;
  r &= b;
  return r;
}

ActivitySet Difference(const ActivitySet &a, const ActivitySet &b) {
  ActivitySet r = a;
  r -= b;
  return r;
}

ActivitySet SymmetricDifference(const ActivitySet &a, const ActivitySet &b) {
  return Union(Difference(a, b), Difference(b, a));
}

ActivitySet Complement(const ActivitySet &a) {
  return Difference(ActivitySet::Full(a.total_frames()), a);
}

// ---------------------------------------------------------------------------
// Segments

std::vector<Segment> FramesToSegments(const ActivitySet &a,
                                      const FrameGrid &grid) {
  if (a.total_frames() != grid.total_frames()) {
    throw GridMismatchError("activity set does not match grid");
  }
  std::vector<Segment> out;
  for (auto [begin, end] : a.Runs()) {
    double onset = grid.TimeOf(begin);
    out.push_back({onset, grid.TimeOf(end) - onset});
  }
  return out;
}

std::pair<FrameIndex, FrameIndex> CenterFrameRange(int64_t onset_us,
                                                   int64_t offset_us,
                                                   int64_t shift_us) {
  // center(t) = (2t + 1) * shift / 2; first t with center >= x is
  // ceil((2x - shift) / (2 shift)).
  int64_t lo = std::max<int64_t>(0, CeilDiv(2 * onset_us - shift_us,
                                            2 * shift_us));
  int64_t hi = std::max<int64_t>(0, CeilDiv(2 * offset_us - shift_us,
                                            2 * shift_us));
  if (hi < lo) hi = lo;
  return {static_cast<FrameIndex>(lo), static_cast<FrameIndex>(hi)};
}

ActivitySet SegmentsToFrames(std::span<const Segment> segments,
                             const FrameGrid &grid) {
  ActivitySet s(grid.total_frames());
  for (const Segment &seg : segments) {
    int64_t onset = SecondsToMicros(seg.onset);
    int64_t offset = onset + SecondsToMicros(seg.duration);
    auto [lo, hi] = CenterFrameRange(onset, offset, grid.shift_micros());
    hi = std::min<FrameIndex>(hi, grid.total_frames());
    if (lo < hi) s.InsertRange(lo, hi);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Diarization

Diarization::Diarization(FrameGrid grid) : grid_(grid) {}

Diarization::Diarization(FrameGrid grid, std::vector<SpeakerActivity> speakers)
    : grid_(grid) {
  for (auto &s : speakers) AddSpeaker(std::move(s.id), std::move(s.activity));
}

void Diarization::Validate(const SpeakerActivity &s) const {
  if (s.id.empty()) throw std::invalid_argument("empty speaker id");
  if (s.activity.total_frames() != grid_.total_frames()) {
    throw GridMismatchError("activity of speaker '" + s.id +
                            "' does not match the grid");
  }
}

void Diarization::AddSpeaker(std::string id, ActivitySet activity) {
  SpeakerActivity s{std::move(id), std::move(activity)};
  Validate(s);
  if (Find(s.id)) {
    throw std::invalid_argument("duplicate speaker id '" + s.id + "'");
  }
  speakers_.push_back(std::move(s));
}

std::optional<std::size_t> Diarization::Find(const std::string &id) const {
  for (std::size_t k = 0; k < speakers_.size(); ++k) {
    if (speakers_[k].id == id) return k;
  }
  return std::nullopt;
}

const ActivitySet &Diarization::Activity(const std::string &id) const {
  auto k = Find(id);
  if (!k) throw std::out_of_range("unknown speaker '" + id + "'");
  return speakers_[*k].activity;
}

void Diarization::SetActivity(const std::string &id, ActivitySet activity) {
  auto k = Find(id);
  if (!k) throw std::out_of_range("unknown speaker '" + id + "'");
  SpeakerActivity s{id, std::move(activity)};
  Validate(s);
  speakers_[*k].activity = std::move(s.activity);
}

bool Diarization::IsOverlapFree() const {
  ActivitySet seen(grid_.total_frames());
  for (const auto &s : speakers_) {
    if (!Intersection(seen, s.activity).Empty()) return false;
    seen |= s.activity;
  }
  return true;
}

ActivitySet Diarization::Speech() const {
  ActivitySet speech(grid_.total_frames());
  for (const auto &s : speakers_) speech |= s.activity;
  return speech;
}

std::vector<int> Diarization::SpeakerCounts() const {
  std::vector<int> counts(grid_.total_frames(), 0);
  for (const auto &s : speakers_) {
    for (FrameIndex t : s.activity.Frames()) ++counts[t];
  }
  return counts;
}

Diarization Diarization::WithoutEmptySpeakers() const {
  Diarization out(grid_);
  for (const auto &s : speakers_) {
    if (!s.activity.Empty()) out.speakers_.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PosteriorMatrix

PosteriorMatrix::PosteriorMatrix(std::vector<FrameIndex> frames,
                                 std::vector<std::pair<double, double>> values)
    : frames_(std::move(frames)), values_(std::move(values)) {
  if (frames_.size() != values_.size()) {
    throw std::invalid_argument(
        "posterior matrix has " + std::to_string(values_.size()) +
        " rows for " + std::to_string(frames_.size()) + " frames");
  }
  for (std::size_t n = 1; n < frames_.size(); ++n) {
    if (frames_[n] <= frames_[n - 1]) {
      throw std::invalid_argument("posterior frames not strictly ascending");
    }
  }
  for (const auto &[qa, qb] : values_) {
    // Negated comparisons also reject NaN.
    if (!(qa >= 0.0 && qa <= 1.0) || !(qb >= 0.0 && qb <= 1.0)) {
      throw std::invalid_argument("posterior outside [0, 1]");
    }
  }
}

PosteriorMatrix PosteriorMatrix::Swapped() const {
  PosteriorMatrix out = *this;
  for (auto &[qa, qb] : out.values_) std::swap(qa, qb);
  return out;
}

}  // namespace diar
