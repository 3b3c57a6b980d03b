// src/rttm_io.cc
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

#include "diar/rttm_io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string_view>
#include <tuple>

namespace diar {

namespace {

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() &&
           (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) {
      ++pos;
    }
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' &&
           line[end] != '\r') {
      ++end;
    }
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

bool IsSkippable(const std::vector<std::string_view> &fields) {
  return fields.empty() || fields.front().front() == ';';
}

double ParseNumber(std::string_view field, std::size_t line_no,
                   const std::string &line, const char *name) {
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(value)) {
    throw ParseError(line_no, line,
                     std::string("invalid ") + name + " '" +
                         std::string(field) + "'");
  }
  return value;
}

int ParseInt(std::string_view field, std::size_t line_no,
             const std::string &line, const char *name) {
  int value = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line_no, line,
                     std::string("invalid ") + name + " '" +
                         std::string(field) + "'");
  }
  return value;
}

std::ifstream OpenOrThrow(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

}  // namespace

ParseError::ParseError(std::size_t line_number, std::string line,
                       const std::string &what)
    : std::runtime_error("line " + std::to_string(line_number) + ": " + what +
                         " in '" + line + "'"),
      line_number_(line_number),
      line_(std::move(line)) {}

RttmByRecording ParseRttm(std::istream &in) {
  RttmByRecording out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = SplitFields(line);
    if (IsSkippable(fields)) continue;
    if (fields.size() != 10) {
      throw ParseError(line_no, line,
                       "expected 10 fields, got " +
                           std::to_string(fields.size()));
    }
    if (fields[0] != "SPEAKER") {
      throw ParseError(line_no, line,
                       "unsupported record type '" + std::string(fields[0]) +
                           "'");
    }
    for (int k : {5, 6, 8, 9}) {
      if (fields[k] != "<NA>") {
        throw ParseError(line_no, line,
                         "field " + std::to_string(k + 1) +
                             " must be <NA>, got '" + std::string(fields[k]) +
                             "'");
      }
    }
    RttmRecord r;
    r.recording_id = std::string(fields[1]);
    r.channel = ParseInt(fields[2], line_no, line, "channel");
    r.onset = ParseNumber(fields[3], line_no, line, "onset");
    r.duration = ParseNumber(fields[4], line_no, line, "duration");
    r.speaker_id = std::string(fields[7]);
    if (r.onset < 0) throw ParseError(line_no, line, "negative onset");
    if (r.duration < 0) throw ParseError(line_no, line, "negative duration");
    if (r.duration == 0) throw ParseError(line_no, line, "zero duration");
    out[r.recording_id].push_back(std::move(r));
  }
  return out;
}

RttmByRecording ParseRttmString(const std::string &text) {
  std::istringstream in(text);
  return ParseRttm(in);
}

RttmByRecording ReadRttmFile(const std::string &path) {
  auto in = OpenOrThrow(path);
  try {
    return ParseRttm(in);
  } catch (const ParseError &e) {
    throw ParseError(e.line_number(), e.line(),
                     std::string(e.what()) + " (" + path + ")");
  }
}

UemByRecording ParseUem(std::istream &in) {
  UemByRecording out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = SplitFields(line);
    if (IsSkippable(fields)) continue;
    if (fields.size() != 4) {
      throw ParseError(line_no, line,
                       "expected 4 fields, got " +
                           std::to_string(fields.size()));
    }
    UemRegion r;
    r.recording_id = std::string(fields[0]);
    r.channel = ParseInt(fields[1], line_no, line, "channel");
    r.onset = ParseNumber(fields[2], line_no, line, "onset");
    r.offset = ParseNumber(fields[3], line_no, line, "offset");
    if (r.onset < 0) throw ParseError(line_no, line, "negative onset");
    if (r.offset <= r.onset) {
      throw ParseError(line_no, line, "offset must exceed onset");
    }
    out[r.recording_id].push_back(std::move(r));
  }
  return out;
}

UemByRecording ReadUemFile(const std::string &path) {
  auto in = OpenOrThrow(path);
  return ParseUem(in);
}

std::size_t RequiredFrames(const std::vector<RttmRecord> &records,
                           int frame_shift_ms) {
  int64_t shift_us = int64_t{frame_shift_ms} * 1000;
  int64_t max_offset = 0;
  for (const auto &r : records) {
    max_offset = std::max(max_offset, SecondsToMicros(r.onset) +
                                          SecondsToMicros(r.duration));
  }
  return static_cast<std::size_t>((max_offset + shift_us - 1) / shift_us);
}

Diarization RttmToDiarization(const std::vector<RttmRecord> &records,
                              int frame_shift_ms,
                              std::optional<std::size_t> total_frames) {
  if (records.empty()) {
    throw std::invalid_argument("cannot rasterize an empty record list");
  }
  const std::string &rec = records.front().recording_id;
  for (const auto &r : records) {
    if (r.recording_id != rec) {
      throw std::invalid_argument("records span recordings '" + rec +
                                  "' and '" + r.recording_id + "'");
    }
  }
  std::size_t needed = RequiredFrames(records, frame_shift_ms);
  std::size_t frames = total_frames.value_or(needed);
  if (frames < needed) {
    throw std::invalid_argument(
        "grid of " + std::to_string(frames) + " frames cannot hold '" + rec +
        "', which needs " + std::to_string(needed));
  }
  FrameGrid grid(frame_shift_ms, std::max<std::size_t>(frames, 1));

  std::map<std::string, std::vector<Segment>> by_speaker;
  for (const auto &r : records) {
    by_speaker[r.speaker_id].push_back({r.onset, r.duration});
  }
  Diarization d(grid);
  for (const auto &[id, segments] : by_speaker) {
    d.AddSpeaker(id, SegmentsToFrames(segments, grid));
  }
  return d;
}

std::string EmitRttm(const Diarization &d, const std::string &recording_id) {
  struct Line {
    FrameIndex begin;
    FrameIndex end;
    const std::string *speaker;
  };
  std::vector<Line> lines;
  for (const auto &s : d.speakers()) {
    for (auto [begin, end] : s.activity.Runs()) {
      lines.push_back({begin, end, &s.id});
    }
  }
  std::sort(lines.begin(), lines.end(), [](const Line &a, const Line &b) {
    return std::tie(a.begin, *a.speaker) < std::tie(b.begin, *b.speaker);
  });

  const FrameGrid &grid = d.grid();
  std::string out;
  char buf[64];
  for (const Line &l : lines) {
    double onset = grid.TimeOf(l.begin);
    double duration = grid.TimeOf(l.end) - onset;
    out += "SPEAKER ";
    out += recording_id;
    std::snprintf(buf, sizeof(buf), " 1 %.3f %.3f <NA> <NA> ", onset,
                  duration);
    out += buf;
    out += *l.speaker;
    out += " <NA> <NA>\n";
  }
  return out;
}

void WriteFileAtomically(const std::string &path, const std::string &content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) {
      throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target);
}

}  // namespace diar
