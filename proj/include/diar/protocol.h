// include/diar/protocol.h
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

#ifndef DIAR_PROTOCOL_H_
#define DIAR_PROTOCOL_H_

// Wire format shared with out-of-process posterior workers. One JSON object
// per line:
//
//   request   {"id": 7, "recording": "rec1", "frames": [[0, 40], [52, 10]],
//              "shift_ms": 100}
//   response  {"id": 7, "posteriors": [[0.99, 0.01], ...]}
//   error     {"id": 7, "error": "unknown recording"}
//
// "frames" is run-length encoded as [start, length] spans in ascending order
// and the posterior array has one row per covered frame. A line that cannot
// be decoded is answered with id -1.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "diar/backends.h"
#include "diar/timeline.h"

namespace diar::protocol {

using Span = std::pair<FrameIndex, std::size_t>;

std::vector<Span> ToSpans(const std::vector<FrameIndex> &frames);
/// Throws std::invalid_argument for empty or overlapping/unsorted spans.
std::vector<FrameIndex> FromSpans(const std::vector<Span> &spans);

struct Request {
  int64_t id = 0;
  PosteriorRequest body;
};

struct Response {
  int64_t id = 0;
  std::vector<std::pair<double, double>> posteriors;
};

struct ErrorResponse {
  int64_t id = -1;
  std::string message;
};

std::string EncodeRequest(int64_t id, const PosteriorRequest &req);
std::string EncodeResponse(const Response &resp);
std::string EncodeError(const ErrorResponse &err);
std::string EncodeHello(int frame_shift_ms);

/// Throws ProtocolError on malformed input.
Request DecodeRequest(const std::string &line);
std::variant<Response, ErrorResponse> DecodeResponse(const std::string &line);
/// Returns the announced frame shift.
int DecodeHello(const std::string &line);

/// Best-effort id extraction for error replies; -1 when unavailable.
int64_t PeekId(const std::string &line);

}  // namespace diar::protocol

#endif  // DIAR_PROTOCOL_H_
