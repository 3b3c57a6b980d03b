// include/diar/backends.h
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

#ifndef DIAR_BACKENDS_H_
#define DIAR_BACKENDS_H_

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diar/random.h"
#include "diar/timeline.h"

namespace diar {

/// Any failure to obtain posteriors for a request. The refine engine skips
/// the pair and keeps going.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The provider answered, but not according to the protocol.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

struct PosteriorRequest {
  std::string recording_id;
  // Selected frames, strictly ascending; need not be contiguous.
  std::vector<FrameIndex> frames;
  int frame_shift_ms = kDefaultFrameShiftMs;
  // Speakers of the pair being refined. Only in-process backends see this;
  // it is not part of the wire protocol.
  std::optional<std::pair<std::string, std::string>> pair_hint;
};

/// Throws std::invalid_argument unless the request is non-empty, strictly
/// ascending and (when total_frames is given) inside the grid.
void ValidateRequest(const PosteriorRequest &req,
                     std::optional<std::size_t> total_frames = {});

/// Produces two-speaker posteriors for an arbitrary frame subset. One
/// request in flight per instance; instances are not thread-safe.
class PosteriorBackend {
 public:
  virtual ~PosteriorBackend() = default;
  /// Result frames equal req.frames exactly.
  virtual PosteriorMatrix Infer(const PosteriorRequest &req) = 0;
};

/// Throws ProtocolError if `p` does not answer `req` frame for frame.
void CheckResponseMatches(const PosteriorRequest &req,
                          const PosteriorMatrix &p);

// ---------------------------------------------------------------------------
// Oracle

struct NoiseSpec {
  double p_flip = 0.0;    // per frame and channel
  double jitter = 0.0;    // half-width of the uniform additive jitter
  double epsilon = 0.01;  // q = 1 - epsilon when active, epsilon otherwise
  bool permute_channels = true;
};

/// Posteriors read off a reference diarization.
///
/// The two reference speakers with the most active frames inside the request
/// are chosen (ties by id). Random draws, in order: one for the channel swap
/// (only when permute_channels), then per frame and per output channel
/// (a, then b) a flip draw and a jitter draw. A frame's value starts at
/// 1 - epsilon or epsilon, is mirrored (q -> 1 - q) when the flip draw is
/// below p_flip, gets (2u - 1) * jitter added and is clamped to [0, 1].
PosteriorMatrix OraclePosteriors(const Diarization &reference,
                                 const PosteriorRequest &req,
                                 const NoiseSpec &noise, std::mt19937_64 &rng);

class OracleBackend : public PosteriorBackend {
 public:
  OracleBackend(Diarization reference, NoiseSpec noise, uint64_t seed);
  PosteriorMatrix Infer(const PosteriorRequest &req) override;

 private:
  Diarization reference_;
  NoiseSpec noise_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// File

/// Full-grid posterior pairs as stored on disk:
///   #frames=<T> shift_ms=<s>
///   <frame_index> <q_a> <q_b>     (one line per frame, 0..T-1)
struct PosteriorTrack {
  int frame_shift_ms = kDefaultFrameShiftMs;
  std::vector<std::pair<double, double>> values;
};

PosteriorTrack ReadPosteriorFile(const std::string &path);
/// Values are written with 17 significant digits so they round-trip.
void WritePosteriorFile(const std::string &path, const PosteriorTrack &track);

/// Slices precomputed tracks. For a request with a pair hint (i, j) the file
/// <dir>/<recording>/<i>__<j>.post is used when it exists, otherwise
/// <dir>/<recording>.post.
class FileBackend : public PosteriorBackend {
 public:
  explicit FileBackend(std::string directory);
  PosteriorMatrix Infer(const PosteriorRequest &req) override;

 private:
  const PosteriorTrack &Load(const std::string &path);

  std::string directory_;
  std::map<std::string, PosteriorTrack> cache_;
};

// ---------------------------------------------------------------------------
// Subprocess

/// Talks to a worker process over newline-delimited JSON on its stdin and
/// stdout. The worker must first print {"hello": {"shift_ms": N}} and N must
/// equal the grid's frame shift.
class SubprocessBackend : public PosteriorBackend {
 public:
  /// `command` is run through /bin/sh -c.
  SubprocessBackend(const std::string &command, int frame_shift_ms,
                    std::chrono::milliseconds timeout =
                        std::chrono::milliseconds(30000));
  ~SubprocessBackend() override;

  SubprocessBackend(const SubprocessBackend &) = delete;
  SubprocessBackend &operator=(const SubprocessBackend &) = delete;

  PosteriorMatrix Infer(const PosteriorRequest &req) override;

 private:
  std::optional<std::string> ReadLine();
  void WriteLine(const std::string &line);
  void Shutdown();

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::chrono::milliseconds timeout_;
  int frame_shift_ms_;
  int64_t next_id_ = 0;
};

}  // namespace diar

#endif  // DIAR_BACKENDS_H_
