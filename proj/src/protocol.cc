// src/protocol.cc
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

#include "diar/protocol.h"

#include <stdexcept>

#include "json.hpp"

namespace diar::protocol {

using nlohmann::json;

namespace {

json Parse(const std::string &line) {
  try {
    return json::parse(line);
  } catch (const json::exception &e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
}

int64_t RequireId(const json &j) {
  auto it = j.find("id");
  if (it == j.end() || !it->is_number_integer()) {
    throw ProtocolError("missing integer \"id\"");
  }
  return it->get<int64_t>();
}

double RequireProbability(const json &v) {
  if (!v.is_number()) throw ProtocolError("posterior is not a number");
  double q = v.get<double>();
  if (!(q >= 0.0 && q <= 1.0)) throw ProtocolError("posterior outside [0, 1]");
  return q;
}

}  // namespace

std::vector<Span> ToSpans(const std::vector<FrameIndex> &frames) {
  std::vector<Span> spans;
  for (FrameIndex t : frames) {
    if (!spans.empty() && spans.back().first + spans.back().second == t) {
      ++spans.back().second;
    } else {
      spans.emplace_back(t, 1);
    }
  }
  return spans;
}

std::vector<FrameIndex> FromSpans(const std::vector<Span> &spans) {
  std::vector<FrameIndex> frames;
  for (auto [start, len] : spans) {
    if (len == 0) throw std::invalid_argument("zero-length span");
    if (!frames.empty() && start <= frames.back()) {
      throw std::invalid_argument("spans not ascending and disjoint");
    }
    for (std::size_t k = 0; k < len; ++k) frames.push_back(start + k);
  }
  return frames;
}

std::string EncodeRequest(int64_t id, const PosteriorRequest &req) {
  json spans = json::array();
  for (auto [start, len] : ToSpans(req.frames)) spans.push_back({start, len});
  json j = {{"id", id},
            {"recording", req.recording_id},
            {"frames", std::move(spans)},
            {"shift_ms", req.frame_shift_ms}};
  return j.dump();
}

std::string EncodeResponse(const Response &resp) {
  json rows = json::array();
  for (auto [qa, qb] : resp.posteriors) rows.push_back({qa, qb});
  json j = {{"id", resp.id}, {"posteriors", std::move(rows)}};
  return j.dump();
}

std::string EncodeError(const ErrorResponse &err) {
  json j = {{"id", err.id}, {"error", err.message}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string EncodeHello(int frame_shift_ms) {
  json j = {{"hello", {{"shift_ms", frame_shift_ms}}}};
  return j.dump();
}

Request DecodeRequest(const std::string &line) {
  json j = Parse(line);
  if (!j.is_object()) throw ProtocolError("request is not an object");
  Request r;
  r.id = RequireId(j);

  auto rec = j.find("recording");
  if (rec == j.end() || !rec->is_string()) {
    throw ProtocolError("missing string \"recording\"");
  }
  r.body.recording_id = rec->get<std::string>();

  auto shift = j.find("shift_ms");
  if (shift == j.end() || !shift->is_number_integer() ||
      shift->get<int64_t>() <= 0) {
    throw ProtocolError("missing positive integer \"shift_ms\"");
  }
  r.body.frame_shift_ms = shift->get<int>();

  auto frames = j.find("frames");
  if (frames == j.end() || !frames->is_array()) {
    throw ProtocolError("missing array \"frames\"");
  }
  std::vector<Span> spans;
  for (const auto &s : *frames) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() ||
        !s[1].is_number_unsigned()) {
      throw ProtocolError("span must be [start, length] with non-negative "
                          "integers");
    }
    spans.emplace_back(s[0].get<FrameIndex>(), s[1].get<std::size_t>());
  }
  try {
    r.body.frames = FromSpans(spans);
  } catch (const std::invalid_argument &e) {
    throw ProtocolError(e.what());
  }
  if (r.body.frames.empty()) throw ProtocolError("empty frame list");
  return r;
}

std::variant<Response, ErrorResponse> DecodeResponse(const std::string &line) {
  json j = Parse(line);
  if (!j.is_object()) throw ProtocolError("response is not an object");
  int64_t id = RequireId(j);
  if (auto err = j.find("error"); err != j.end()) {
    return ErrorResponse{id, err->is_string() ? err->get<std::string>()
                                              : err->dump()};
  }
  auto rows = j.find("posteriors");
  if (rows == j.end() || !rows->is_array()) {
    throw ProtocolError("missing array \"posteriors\"");
  }
  Response resp;
  resp.id = id;
  resp.posteriors.reserve(rows->size());
  for (const auto &row : *rows) {
    if (!row.is_array() || row.size() != 2) {
      throw ProtocolError("posterior row must be [q_a, q_b]");
    }
    resp.posteriors.emplace_back(RequireProbability(row[0]),
                                 RequireProbability(row[1]));
  }
  return resp;
}

int DecodeHello(const std::string &line) {
  json j = Parse(line);
  if (!j.is_object() || !j.contains("hello") || !j["hello"].is_object()) {
    throw ProtocolError("expected a hello line, got '" + line + "'");
  }
  const json &h = j["hello"];
  auto shift = h.find("shift_ms");
  if (shift == h.end() || !shift->is_number_integer() ||
      shift->get<int64_t>() <= 0) {
    throw ProtocolError("hello line lacks a positive \"shift_ms\"");
  }
  return shift->get<int>();
}

int64_t PeekId(const std::string &line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return -1;
  auto it = j.find("id");
  if (it == j.end() || !it->is_number_integer()) return -1;
  return it->get<int64_t>();
}

}  // namespace diar::protocol
