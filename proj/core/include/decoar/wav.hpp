// Copyright 2026 The decoar authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>
#include <string>
#include <vector>

namespace decoar {

struct WavData {
  std::vector<double> samples;  // in [-1, 1]
  std::size_t sample_rate = 0;
};

// Reads a 16-bit PCM mono RIFF/WAV file. Anything else (float encoding,
// multi-channel, 8/24-bit) is rejected with an error naming the problem.
WavData read_wav(const std::string& path);

// Writes 16-bit PCM mono; samples are clamped to [-1, 1].
void write_wav(const std::string& path, std::span<const double> samples,
               std::size_t sample_rate);

}  // namespace decoar
