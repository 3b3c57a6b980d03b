// include/diar/random.h
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

#ifndef DIAR_RANDOM_H_
#define DIAR_RANDOM_H_

// Distribution helpers over std::mt19937_64 whose engine output is fixed by
// the standard. The std:: distributions are implementation-defined, so these
// are spelled out to keep seeded streams identical across toolchains.

#include <cmath>
#include <cstddef>
#include <random>

namespace diar {

/// Uniform in [0, 1) from the top 53 bits of one draw.
inline double UniformUnit(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
inline std::size_t UniformIndex(std::mt19937_64 &rng, std::size_t n) {
  auto k = static_cast<std::size_t>(UniformUnit(rng) * static_cast<double>(n));
  return k < n ? k : n - 1;
}

inline double Exponential(std::mt19937_64 &rng, double mean) {
  return -mean * std::log1p(-UniformUnit(rng));
}

}  // namespace diar

#endif  // DIAR_RANDOM_H_
