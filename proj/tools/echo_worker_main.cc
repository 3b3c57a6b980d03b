// tools/echo_worker_main.cc
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

// Posterior worker for the subprocess backend. Answers every request with
// oracle posteriors read off a reference RTTM, reproducing the in-process
// oracle backend draw for draw when given the same seed and noise.
//
//   diar-echo-worker --reference ref.rttm --seed 7 --p-flip 0.02

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "diar/backends.h"
#include "diar/protocol.h"
#include "diar/rttm_io.h"

int main(int argc, char **argv) {
  CLI::App app{"Oracle posterior worker (JSON lines on stdin/stdout)"};
  std::string reference_path;
  int shift_ms = diar::kDefaultFrameShiftMs;
  uint64_t seed = 0;
  diar::NoiseSpec noise;
  bool no_permute = false;
  app.add_option("--reference", reference_path, "Reference RTTM")->required();
  app.add_option("--shift-ms", shift_ms, "Frame shift in ms");
  app.add_option("--seed", seed, "Oracle RNG seed");
  app.add_option("--p-flip", noise.p_flip, "Per-frame flip probability");
  app.add_option("--jitter", noise.jitter, "Uniform jitter half-width");
  app.add_option("--epsilon", noise.epsilon, "Distance of clean posteriors from 0/1");
  app.add_flag("--no-permute", no_permute, "Keep channel order fixed");
  CLI11_PARSE(app, argc, argv);
  noise.permute_channels = !no_permute;

  std::map<std::string, std::unique_ptr<diar::OracleBackend>> oracles;
  try {
    for (const auto &[rec, records] : diar::ReadRttmFile(reference_path)) {
      oracles.emplace(rec, std::make_unique<diar::OracleBackend>(
                               diar::RttmToDiarization(records, shift_ms),
                               noise, seed));
    }
  } catch (const std::exception &e) {
    std::fprintf(stderr, "diar-echo-worker: %s\n", e.what());
    return 1;
  }

  namespace protocol = diar::protocol;
  std::cout << protocol::EncodeHello(shift_ms) << std::endl;
  std::string line;
  while (std::getline(std::cin, line)) {
    std::string reply;
    try {
      protocol::Request req = protocol::DecodeRequest(line);
      auto it = oracles.find(req.body.recording_id);
      if (it == oracles.end()) {
        reply = protocol::EncodeError(
            {req.id, "unknown recording '" + req.body.recording_id + "'"});
      } else if (req.body.frame_shift_ms != shift_ms) {
        reply = protocol::EncodeError({req.id, "frame shift mismatch"});
      } else {
        diar::PosteriorMatrix p = it->second->Infer(req.body);
        reply = protocol::EncodeResponse({req.id, p.values()});
      }
    } catch (const std::exception &e) {
      reply = protocol::EncodeError({protocol::PeekId(line), e.what()});
    }
    std::cout << reply << std::endl;
  }
  return 0;
}
