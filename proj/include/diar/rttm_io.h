// include/diar/rttm_io.h
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

#ifndef DIAR_RTTM_IO_H_
#define DIAR_RTTM_IO_H_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diar/timeline.h"

namespace diar {

/// One SPEAKER line of an RTTM file:
///   SPEAKER <rec> <chan> <onset> <dur> <NA> <NA> <spk> <NA> <NA>
struct RttmRecord {
  std::string type_tag = "SPEAKER";
  std::string recording_id;
  int channel = 1;
  double onset = 0.0;
  double duration = 0.0;
  std::string speaker_id;
};

/// One line of a UEM file: <rec> <chan> <onset> <offset>.
struct UemRegion {
  std::string recording_id;
  int channel = 1;
  double onset = 0.0;
  double offset = 0.0;
};

/// Raised for malformed input; carries the 1-based line number and the line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line_number, std::string line, const std::string &what);

  std::size_t line_number() const { return line_number_; }
  const std::string &line() const { return line_; }

 private:
  std::size_t line_number_;
  std::string line_;
};

using RttmByRecording = std::map<std::string, std::vector<RttmRecord>>;
using UemByRecording = std::map<std::string, std::vector<UemRegion>>;

/// Blank lines and lines starting with ';' are skipped. Records keep their
/// file order within each recording.
RttmByRecording ParseRttm(std::istream &in);
RttmByRecording ParseRttmString(const std::string &text);
RttmByRecording ReadRttmFile(const std::string &path);

UemByRecording ParseUem(std::istream &in);
UemByRecording ReadUemFile(const std::string &path);

/// ceil(max offset / frame shift); 0 for no records.
std::size_t RequiredFrames(const std::vector<RttmRecord> &records,
                           int frame_shift_ms);

/// Rasterizes the records of one recording with the frame-center rule.
/// Speakers are ordered by id. When `total_frames` is given it must cover
/// every record; otherwise it is RequiredFrames().
Diarization RttmToDiarization(const std::vector<RttmRecord> &records,
                              int frame_shift_ms,
                              std::optional<std::size_t> total_frames = {});

/// One line per maximal segment per speaker, sorted by (onset, speaker id),
/// times printed with three decimals.
std::string EmitRttm(const Diarization &d, const std::string &recording_id);

/// Writes `content` to `path` through a temporary file and rename.
void WriteFileAtomically(const std::string &path, const std::string &content);

}  // namespace diar

#endif  // DIAR_RTTM_IO_H_
