// tools/cli.cc
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

#include "cli.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "diar/backends.h"
#include "diar/protocol.h"
#include "diar/refine.h"
#include "diar/rttm_io.h"
#include "diar/scoring.h"
#include "diar/simharness.h"
#include "json.hpp"
#include "spdlog/sinks/stdout_color_sinks.h"
#include "spdlog/spdlog.h"

namespace diar::cli {

namespace {

struct GlobalOptions {
  int frame_shift_ms = kDefaultFrameShiftMs;
  uint64_t seed = 0;
  std::string log_level = "info";
};

struct RefineOptions {
  std::string init;
  std::string backend = "oracle";
  std::string reference;
  std::string posterior_dir;
  std::string command;
  int timeout_ms = 30000;
  NoiseSpec noise;
  bool no_permute = false;
  RefineConfig config;
  std::string out;
  std::string trace;
  int jobs = 1;
};

struct ScoreOptions {
  std::string ref;
  std::string hyp;
  double collar = 0.0;
  std::string uem;
};

struct SimulateOptions {
  int speakers = 3;
  double duration = 300.0;
  double overlap = kDefaultOverlapRatio;
  double confusion = 0.0;
  double mean_turn = 3.0;
  double mean_gap = 0.5;
  std::string recording = "sim";
  std::string out_ref;
  std::string out_init;
};

struct SelectOptions {
  std::string ref;
  double chunk_start = 0.0;
  double chunk_len = 0.0;
  std::string out;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void SetupLogging(const GlobalOptions &g) {
  auto logger = spdlog::stderr_color_mt("diar-refine");
  logger->set_pattern("%^[%l]%$ %v");
  spdlog::set_default_logger(logger);
  std::string level = g.log_level;
  if (const char *env = std::getenv("DIAR_REFINE_LOG")) level = env;
  spdlog::set_level(spdlog::level::from_str(level));
}

std::size_t FramesFor(const RttmByRecording &rttm, const std::string &rec,
                      int shift_ms) {
  auto it = rttm.find(rec);
  return it == rttm.end() ? 0 : RequiredFrames(it->second, shift_ms);
}

Diarization ToDiarization(const RttmByRecording &rttm, const std::string &rec,
                          const FrameGrid &grid) {
  auto it = rttm.find(rec);
  if (it == rttm.end()) return Diarization(grid);
  return RttmToDiarization(it->second, grid.frame_shift_ms(),
                           grid.total_frames());
}

// ---------------------------------------------------------------------------
// refine

nlohmann::json TraceLine(const std::string &rec, std::size_t index,
                         const PairStep &s) {
  nlohmann::json j;
  j["recording"] = rec;
  j["pass"] = s.pass;
  j["step"] = index;
  j["pair"] = {s.speaker_i, s.speaker_j};
  j["selected"] = s.selected_count;
  j["permutation"] = s.permutation ? nlohmann::json(ToString(*s.permutation))
                                   : nlohmann::json(nullptr);
  j["accepted"] = s.accepted;
  j["frames_added"] = {s.frames_added_i, s.frames_added_j};
  j["frames_removed"] = {s.frames_removed_i, s.frames_removed_j};
  j["skipped_reason"] = s.skipped_reason
                            ? nlohmann::json(ToString(*s.skipped_reason))
                            : nlohmann::json(nullptr);
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

void ValidateRefine(const RefineOptions &o) {
  o.config.Validate();
  if (o.backend == "oracle") {
    if (o.reference.empty()) {
      throw UsageError("--backend oracle requires --reference");
    }
    if (!(o.noise.p_flip >= 0.0 && o.noise.p_flip <= 1.0)) {
      throw UsageError("--p-flip must be in [0, 1]");
    }
    if (!(o.noise.jitter >= 0.0)) throw UsageError("--jitter must be >= 0");
    if (!(o.noise.epsilon >= 0.0 && o.noise.epsilon < 0.5)) {
      throw UsageError("--epsilon must be in [0, 0.5)");
    }
  } else if (o.backend == "file") {
    if (o.posterior_dir.empty()) {
      throw UsageError("--backend file requires --posterior-dir");
    }
  } else if (o.backend == "subprocess") {
    if (o.command.empty()) throw UsageError("--backend subprocess requires --cmd");
    if (o.timeout_ms <= 0) throw UsageError("--timeout-ms must be positive");
  }
  if (o.jobs < 1) throw UsageError("--jobs must be at least 1");
}

struct RecordingOutcome {
  bool ok = false;
  std::string rttm;
  std::string trace;
};

int CmdRefine(const GlobalOptions &g, RefineOptions o) {
  o.noise.permute_channels = !o.no_permute;
  try {
    ValidateRefine(o);
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }

  RttmByRecording init = ReadRttmFile(o.init);
  RttmByRecording reference;
  if (o.backend == "oracle") reference = ReadRttmFile(o.reference);

  std::vector<std::string> recordings;
  for (const auto &[rec, records] : init) recordings.push_back(rec);
  std::vector<RecordingOutcome> outcomes(recordings.size());

  auto process = [&](std::size_t n) {
    const std::string &rec = recordings[n];
    RecordingOutcome &out = outcomes[n];
    try {
      std::size_t frames =
          std::max(FramesFor(init, rec, g.frame_shift_ms),
                   FramesFor(reference, rec, g.frame_shift_ms));
      FrameGrid grid(g.frame_shift_ms, frames);
      Diarization initial = ToDiarization(init, rec, grid);

      std::unique_ptr<PosteriorBackend> backend;
      if (o.backend == "oracle") {
        if (!reference.count(rec)) {
          throw std::runtime_error("no reference for recording '" + rec + "'");
        }
        backend = std::make_unique<OracleBackend>(
            ToDiarization(reference, rec, grid), o.noise, g.seed);
      } else if (o.backend == "file") {
        backend = std::make_unique<FileBackend>(o.posterior_dir);
      } else {
        backend = std::make_unique<SubprocessBackend>(
            o.command, g.frame_shift_ms,
            std::chrono::milliseconds(o.timeout_ms));
      }

      RefineResult result = RefineRecording(initial, *backend, o.config, rec);
      std::size_t accepted = 0;
      for (std::size_t k = 0; k < result.trace.size(); ++k) {
        out.trace += TraceLine(rec, k, result.trace[k]).dump() + "\n";
        accepted += result.trace[k].accepted;
      }
      out.rttm = EmitRttm(result.diarization, rec);
      out.ok = true;
      spdlog::info("{}: {} speakers, {}/{} pair steps accepted", rec,
                   initial.NumSpeakers(), accepted, result.trace.size());
    } catch (const std::exception &e) {
      spdlog::error("{}: {}", rec, e.what());
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t n = next++; n < recordings.size(); n = next++) process(n);
  };
  std::size_t num_threads =
      std::min<std::size_t>(static_cast<std::size_t>(o.jobs), recordings.size());
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < num_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();

  std::string rttm, trace;
  bool all_ok = true;
  for (const auto &out : outcomes) {
    all_ok = all_ok && out.ok;
    rttm += out.rttm;
    trace += out.trace;
  }
  WriteFileAtomically(o.out, rttm);
  if (!o.trace.empty()) WriteFileAtomically(o.trace, trace);
  return all_ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// score

std::string TableRow(const std::string &name, const ScoreReport &r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s %7.2f %7.2f %7.2f %7.2f %7.2f %9zu",
                name.c_str(), r.der, r.jer, r.miss, r.false_alarm, r.confusion,
                r.scored_frames);
  return buf;
}

int CmdScore(const GlobalOptions &g, const ScoreOptions &o) {
  if (!(o.collar >= 0.0)) throw UsageError("--collar must be non-negative");
  RttmByRecording ref = ReadRttmFile(o.ref);
  RttmByRecording hyp = ReadRttmFile(o.hyp);
  std::optional<UemByRecording> uem;
  if (!o.uem.empty()) uem = ReadUemFile(o.uem);

  for (const auto &[rec, records] : hyp) {
    if (!ref.count(rec)) {
      spdlog::warn("{}: in hypothesis but not in reference; ignored", rec);
    }
  }

  std::vector<std::pair<std::string, ScoreReport>> rows;
  for (const auto &[rec, records] : ref) {
    std::size_t frames = std::max(FramesFor(ref, rec, g.frame_shift_ms),
                                  FramesFor(hyp, rec, g.frame_shift_ms));
    FrameGrid grid(g.frame_shift_ms, frames);
    Diarization r = ToDiarization(ref, rec, grid);
    Diarization h = ToDiarization(hyp, rec, grid);
    const std::vector<UemRegion> *regions = nullptr;
    static const std::vector<UemRegion> kNone;
    if (uem) {
      auto it = uem->find(rec);
      regions = it == uem->end() ? &kNone : &it->second;
    }
    try {
      rows.emplace_back(rec, ComputeDer(r, h, o.collar, regions));
    } catch (const std::domain_error &e) {
      spdlog::warn("{}: {}; not scored", rec, e.what());
    }
  }

  std::vector<ScoreReport> reports;
  std::printf("%-24s %7s %7s %7s %7s %7s %9s\n", "recording", "DER", "JER",
              "MISS", "FA", "CONF", "FRAMES");
  for (const auto &[rec, report] : rows) {
    std::printf("%s\n", TableRow(rec, report).c_str());
    reports.push_back(report);
  }
  ScoreReport total = Aggregate(reports);
  std::printf("%s\n", TableRow("*** OVERALL ***", total).c_str());
  for (const auto &[rec, report] : rows) {
    std::printf("%s\n", FormatKeyValue(report, rec).c_str());
  }
  std::printf("%s\n", FormatKeyValue(total, "ALL").c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

int CmdSimulate(const GlobalOptions &g, const SimulateOptions &o) {
  SceneSpec spec;
  spec.num_speakers = o.speakers;
  spec.total_duration = o.duration;
  spec.target_overlap_ratio = o.overlap;
  spec.mean_turn = o.mean_turn;
  spec.mean_gap = o.mean_gap;
  spec.seed = g.seed;
  spec.frame_shift_ms = g.frame_shift_ms;
  try {
    spec.Validate();
    if (!(o.confusion >= 0.0 && o.confusion <= 1.0)) {
      throw std::invalid_argument("--confusion must be in [0, 1]");
    }
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }

  Diarization reference = GenerateScene(spec);
  Diarization initial = DegradeToClustering(reference, o.confusion, g.seed + 1);
  WriteFileAtomically(o.out_ref, EmitRttm(reference, o.recording));
  WriteFileAtomically(o.out_init, EmitRttm(initial, o.recording));
  spdlog::info("{}: {} speakers, {} frames, overlap ratio {:.4f}", o.recording,
               o.speakers, reference.total_frames(), OverlapRatio(reference));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// select-frames

int CmdSelectFrames(const GlobalOptions &g, const SelectOptions &o) {
  if (!(o.chunk_start >= 0.0) || !(o.chunk_len > 0.0)) {
    throw UsageError("--chunk-start must be >= 0 and --chunk-len > 0");
  }
  RttmByRecording ref = ReadRttmFile(o.ref);
  std::string out;
  bool all_ok = true;
  for (const auto &[rec, records] : ref) {
    try {
      Diarization d = RttmToDiarization(records, g.frame_shift_ms);
      FrameIndex begin = d.grid().FrameOf(o.chunk_start);
      FrameIndex len = static_cast<FrameIndex>(
          std::llround(o.chunk_len * 1000.0 / g.frame_shift_ms));
      AdaptationSelection sel = SelectAdaptationFrames(d, begin, begin + len);
      nlohmann::json spans = nlohmann::json::array();
      for (auto [start, n] : protocol::ToSpans(sel.frames.Frames())) {
        spans.push_back({start, n});
      }
      nlohmann::json j;
      j["recording"] = rec;
      j["shift_ms"] = g.frame_shift_ms;
      j["chunk"] = {begin, std::min<FrameIndex>(begin + len, d.total_frames()) -
                               begin};
      nlohmann::json speakers = nlohmann::json::array();
      if (sel.speaker_1) speakers.push_back(*sel.speaker_1);
      if (sel.speaker_2) speakers.push_back(*sel.speaker_2);
      j["speakers"] = std::move(speakers);
      j["frames"] = std::move(spans);
      out += j.dump() + "\n";
    } catch (const std::invalid_argument &e) {
      spdlog::error("{}: {}", rec, e.what());
      all_ok = false;
    }
  }
  WriteFileAtomically(o.out, out);
  return all_ok ? kExitOk : kExitFailure;
}

}  // namespace

int Run(int argc, char **argv) {
  CLI::App app{"Pairwise overlap-aware refinement of speaker diarization"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--frame-shift-ms", g.frame_shift_ms, "Frame grid shift in ms")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--log-level", g.log_level,
                 "trace|debug|info|warn|error|off (DIAR_REFINE_LOG overrides)");

  RefineOptions r;
  auto *refine = app.add_subcommand("refine", "Refine an initial diarization");
  refine->add_option("--init", r.init, "Initial RTTM")->required();
  refine->add_option("--backend", r.backend, "Posterior backend")
      ->check(CLI::IsMember({"oracle", "file", "subprocess"}));
  refine->add_option("--reference", r.reference, "Reference RTTM (oracle)");
  refine->add_option("--posterior-dir", r.posterior_dir,
                     "Directory of .post files (file)");
  refine->add_option("--cmd", r.command, "Worker command line (subprocess)");
  refine->add_option("--timeout-ms", r.timeout_ms, "Worker response timeout");
  refine->add_option("--p-flip", r.noise.p_flip, "Oracle flip probability");
  refine->add_option("--jitter", r.noise.jitter, "Oracle jitter half-width");
  refine->add_option("--epsilon", r.noise.epsilon, "Oracle clean-posterior margin");
  refine->add_flag("--no-permute", r.no_permute, "Oracle keeps channel order");
  refine->add_option("--alpha", r.config.alpha, "Acceptance ratio");
  refine->add_option("--threshold", r.config.threshold, "Posterior threshold");
  refine->add_option("--min-pair-frames", r.config.min_pair_frames,
                     "Skip pairs with fewer selected frames");
  refine->add_option("--passes", r.config.passes, "Sweeps over all pairs");
  refine->add_option("--out", r.out, "Refined RTTM")->required();
  refine->add_option("--trace", r.trace, "Pair-step trace (JSON lines)");
  refine->add_option("--jobs", r.jobs, "Recordings processed in parallel");

  ScoreOptions s;
  auto *score = app.add_subcommand("score", "Overlap-aware DER and JER");
  score->add_option("--ref", s.ref, "Reference RTTM")->required();
  score->add_option("--hyp", s.hyp, "Hypothesis RTTM")->required();
  score->add_option("--collar", s.collar, "Collar in seconds");
  score->add_option("--uem", s.uem, "UEM scoring regions");

  SimulateOptions m;
  auto *simulate = app.add_subcommand("simulate", "Synthetic conversation");
  simulate->add_option("--speakers", m.speakers, "Number of speakers");
  simulate->add_option("--duration", m.duration, "Length in seconds");
  simulate->add_option("--overlap", m.overlap, "Target overlap ratio");
  simulate->add_option("--confusion", m.confusion, "Label confusion rate");
  simulate->add_option("--mean-turn", m.mean_turn, "Mean turn length (s)");
  simulate->add_option("--mean-gap", m.mean_gap, "Mean gap length (s)");
  simulate->add_option("--recording", m.recording, "Recording id");
  simulate->add_option("--out-ref", m.out_ref, "Reference RTTM")->required();
  simulate->add_option("--out-init", m.out_init, "Degraded RTTM")->required();

  SelectOptions f;
  auto *select = app.add_subcommand("select-frames",
                                    "Two-speaker frame selection for a chunk");
  select->add_option("--ref", f.ref, "Reference RTTM")->required();
  select->add_option("--chunk-start", f.chunk_start, "Chunk start (s)");
  select->add_option("--chunk-len", f.chunk_len, "Chunk length (s)")->required();
  select->add_option("--out", f.out, "Output JSON lines")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    SetupLogging(g);
  } catch (const std::exception &e) {
    std::fprintf(stderr, "diar-refine: %s\n", e.what());
    return kExitUsage;
  }

  try {
    if (*refine) return CmdRefine(g, r);
    if (*score) return CmdScore(g, s);
    if (*simulate) return CmdSimulate(g, m);
    if (*select) return CmdSelectFrames(g, f);
  } catch (const UsageError &e) {
    std::fprintf(stderr, "diar-refine: %s\n\n%s", e.what(),
                 app.help().c_str());
    return kExitUsage;
  } catch (const std::exception &e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace diar::cli
