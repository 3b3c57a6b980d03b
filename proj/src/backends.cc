// src/backends.cc
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

#include "diar/backends.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "diar/protocol.h"

namespace diar {

void ValidateRequest(const PosteriorRequest &req,
                     std::optional<std::size_t> total_frames) {
  if (req.frames.empty()) throw std::invalid_argument("empty frame request");
  if (req.frame_shift_ms <= 0) {
    throw std::invalid_argument("request frame shift must be positive");
  }
  for (std::size_t n = 1; n < req.frames.size(); ++n) {
    if (req.frames[n] <= req.frames[n - 1]) {
      throw std::invalid_argument("request frames not strictly ascending");
    }
  }
  if (total_frames && req.frames.back() >= *total_frames) {
    throw std::invalid_argument("request frame " +
                                std::to_string(req.frames.back()) +
                                " outside grid of " +
                                std::to_string(*total_frames));
  }
}

void CheckResponseMatches(const PosteriorRequest &req,
                          const PosteriorMatrix &p) {
  if (p.frames() != req.frames) {
    throw ProtocolError("backend returned " + std::to_string(p.size()) +
                        " frames for a request of " +
                        std::to_string(req.frames.size()));
  }
}

// ---------------------------------------------------------------------------
// Oracle

PosteriorMatrix OraclePosteriors(const Diarization &reference,
                                 const PosteriorRequest &req,
                                 const NoiseSpec &noise,
                                 std::mt19937_64 &rng) {
  ValidateRequest(req);

  // Pick the two most active reference speakers inside the request.
  std::vector<std::pair<std::size_t, const SpeakerActivity *>> ranked;
  for (const auto &s : reference.speakers()) {
    std::size_t n = 0;
    for (FrameIndex t : req.frames) n += s.activity.Contains(t);
    ranked.emplace_back(n, &s);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  const ActivitySet *first = nullptr;
  const ActivitySet *second = nullptr;
  if (!ranked.empty() && ranked[0].first > 0) first = &ranked[0].second->activity;
  if (ranked.size() > 1 && ranked[1].first > 0) {
    second = &ranked[1].second->activity;
  }

  bool swap = noise.permute_channels && UniformUnit(rng) < 0.5;
  const ActivitySet *channel_a = swap ? second : first;
  const ActivitySet *channel_b = swap ? first : second;

  auto draw = [&](const ActivitySet *track, FrameIndex t) {
    double q = (track != nullptr && track->Contains(t)) ? 1.0 - noise.epsilon
                                                        : noise.epsilon;
    double flip = UniformUnit(rng);
    double jitter = UniformUnit(rng);
    if (flip < noise.p_flip) q = 1.0 - q;
    q += (2.0 * jitter - 1.0) * noise.jitter;
    return std::clamp(q, 0.0, 1.0);
  };

  std::vector<std::pair<double, double>> values;
  values.reserve(req.frames.size());
  for (FrameIndex t : req.frames) {
    double qa = draw(channel_a, t);
    double qb = draw(channel_b, t);
    values.emplace_back(qa, qb);
  }
  return PosteriorMatrix(req.frames, std::move(values));
}

OracleBackend::OracleBackend(Diarization reference, NoiseSpec noise,
                             uint64_t seed)
    : reference_(std::move(reference)), noise_(noise), rng_(seed) {
  if (!(noise.p_flip >= 0.0 && noise.p_flip <= 1.0)) {
    throw std::invalid_argument("p_flip must be in [0, 1]");
  }
  if (!(noise.jitter >= 0.0)) {
    throw std::invalid_argument("jitter must be non-negative");
  }
  if (!(noise.epsilon >= 0.0 && noise.epsilon < 0.5)) {
    throw std::invalid_argument("epsilon must be in [0, 0.5)");
  }
}

PosteriorMatrix OracleBackend::Infer(const PosteriorRequest &req) {
  return OraclePosteriors(reference_, req, noise_, rng_);
}

// ---------------------------------------------------------------------------
// File

PosteriorTrack ReadPosteriorFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot open posterior file '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) {
    throw BackendError("empty posterior file '" + path + "'");
  }
  std::size_t frames = 0;
  PosteriorTrack track;
  if (std::sscanf(header.c_str(), "#frames=%zu shift_ms=%d", &frames,
                  &track.frame_shift_ms) != 2 ||
      track.frame_shift_ms <= 0) {
    throw BackendError("bad posterior header '" + header + "' in '" + path +
                       "'");
  }
  track.values.reserve(frames);
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream fields(line);
    std::size_t index = 0;
    double qa = 0.0, qb = 0.0;
    std::string extra;
    if (!(fields >> index >> qa >> qb) || (fields >> extra)) {
      throw BackendError(path + ":" + std::to_string(line_no) +
                         ": expected '<frame> <q_a> <q_b>'");
    }
    if (index != track.values.size()) {
      throw BackendError(path + ":" + std::to_string(line_no) +
                         ": expected frame " +
                         std::to_string(track.values.size()));
    }
    if (!(qa >= 0.0 && qa <= 1.0 && qb >= 0.0 && qb <= 1.0)) {
      throw BackendError(path + ":" + std::to_string(line_no) +
                         ": posterior outside [0, 1]");
    }
    track.values.emplace_back(qa, qb);
  }
  if (track.values.size() != frames) {
    throw BackendError("'" + path + "' declares " + std::to_string(frames) +
                       " frames but holds " +
                       std::to_string(track.values.size()));
  }
  return track;
}

void WritePosteriorFile(const std::string &path, const PosteriorTrack &track) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "#frames=" << track.values.size()
      << " shift_ms=" << track.frame_shift_ms << "\n";
  char buf[96];
  for (std::size_t t = 0; t < track.values.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu %.17g %.17g\n", t,
                  track.values[t].first, track.values[t].second);
    out << buf;
  }
}

FileBackend::FileBackend(std::string directory)
    : directory_(std::move(directory)) {
  if (!std::filesystem::is_directory(directory_)) {
    throw std::invalid_argument("posterior directory '" + directory_ +
                                "' does not exist");
  }
}

const PosteriorTrack &FileBackend::Load(const std::string &path) {
  auto it = cache_.find(path);
  if (it == cache_.end()) {
    it = cache_.emplace(path, ReadPosteriorFile(path)).first;
  }
  return it->second;
}

PosteriorMatrix FileBackend::Infer(const PosteriorRequest &req) {
  ValidateRequest(req);
  namespace fs = std::filesystem;
  fs::path path = fs::path(directory_) / (req.recording_id + ".post");
  if (req.pair_hint) {
    fs::path pair_path = fs::path(directory_) / req.recording_id /
                         (req.pair_hint->first + "__" +
                          req.pair_hint->second + ".post");
    if (fs::exists(pair_path)) path = pair_path;
  }
  if (!fs::exists(path)) {
    throw BackendError("no posteriors for recording '" + req.recording_id +
                       "' under '" + directory_ + "'");
  }
  const PosteriorTrack &track = Load(path.string());
  if (track.frame_shift_ms != req.frame_shift_ms) {
    throw BackendError("posterior file '" + path.string() + "' uses " +
                       std::to_string(track.frame_shift_ms) +
                       " ms frames, request uses " +
                       std::to_string(req.frame_shift_ms));
  }
  if (req.frames.back() >= track.values.size()) {
    throw BackendError("request reaches frame " +
                       std::to_string(req.frames.back()) + " but '" +
                       path.string() + "' stores " +
                       std::to_string(track.values.size()));
  }
  std::vector<std::pair<double, double>> values;
  values.reserve(req.frames.size());
  for (FrameIndex t : req.frames) values.push_back(track.values[t]);
  return PosteriorMatrix(req.frames, std::move(values));
}

// ---------------------------------------------------------------------------
// Subprocess

namespace {

void IgnoreSigpipeOnce() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

SubprocessBackend::SubprocessBackend(const std::string &command,
                                     int frame_shift_ms,
                                     std::chrono::milliseconds timeout)
    : timeout_(timeout), frame_shift_ms_(frame_shift_ms) {
  IgnoreSigpipeOnce();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
    throw BackendError(std::string("pipe: ") + std::strerror(errno));
  }
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw BackendError(std::string("pipe: ") + std::strerror(errno));
  }
  pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
      ::close(fd);
    }
    throw BackendError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(),
            static_cast<char *>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  try {
    auto hello = ReadLine();
    if (!hello) throw BackendError("worker exited before its hello line");
    int shift = protocol::DecodeHello(*hello);
    if (shift != frame_shift_ms_) {
      throw BackendError("worker frame shift " + std::to_string(shift) +
                         " ms does not match grid shift " +
                         std::to_string(frame_shift_ms_) + " ms");
    }
  } catch (...) {
    Shutdown();
    throw;
  }
}

SubprocessBackend::~SubprocessBackend() { Shutdown(); }

void SubprocessBackend::Shutdown() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    bool reaped = false;
    for (int n = 0; n < 100 && !reaped; ++n) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        reaped = true;
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
    }
    if (!reaped) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
}

void SubprocessBackend::WriteLine(const std::string &line) {
  if (to_child_ < 0) throw BackendError("worker is not running");
  std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(to_child_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("write to worker: ") +
                         std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> SubprocessBackend::ReadLine() {
  using Clock = std::chrono::steady_clock;
  auto deadline = Clock::now() + timeout_;
  while (true) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (from_child_ < 0) return std::nullopt;
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (left.count() <= 0) throw BackendError("worker timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) throw BackendError("worker timed out");
    char chunk[4096];
    ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("read from worker: ") +
                         std::strerror(errno));
    }
    if (n == 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

PosteriorMatrix SubprocessBackend::Infer(const PosteriorRequest &req) {
  ValidateRequest(req);
  if (req.frame_shift_ms != frame_shift_ms_) {
    throw BackendError("request frame shift does not match the worker");
  }
  int64_t id = next_id_++;
  WriteLine(protocol::EncodeRequest(id, req));
  while (true) {
    auto line = ReadLine();
    if (!line) throw BackendError("worker closed its output");
    auto decoded = protocol::DecodeResponse(*line);
    int64_t got = std::visit([](const auto &r) { return r.id; }, decoded);
    // Late answers to requests that already timed out.
    if (got >= 0 && got < id) continue;
    if (got != id) {
      if (auto *err = std::get_if<protocol::ErrorResponse>(&decoded)) {
        throw ProtocolError("worker error for id " + std::to_string(got) +
                            ": " + err->message);
      }
      throw ProtocolError("response id " + std::to_string(got) +
                          " does not match request id " + std::to_string(id));
    }
    if (auto *err = std::get_if<protocol::ErrorResponse>(&decoded)) {
      throw BackendError("worker error: " + err->message);
    }
    auto &resp = std::get<protocol::Response>(decoded);
    if (resp.posteriors.size() != req.frames.size()) {
      throw ProtocolError("worker returned " +
                          std::to_string(resp.posteriors.size()) +
                          " posteriors for " +
                          std::to_string(req.frames.size()) + " frames");
    }
    return PosteriorMatrix(req.frames, std::move(resp.posteriors));
  }
}

}  // namespace diar
