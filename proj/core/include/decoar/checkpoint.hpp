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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "decoar/tensor.hpp"

namespace decoar {

// Flat binary parameter container. Round-trips are bit-exact.
//
// Layout (all integers and floats little-endian):
//   magic   4 bytes  "DCKP"
//   version u32      currently 1
//   count   u64      number of entries
//   entry (repeated count times):
//     path_len u32, path bytes (UTF-8)
//     ndim     u32, dims u64[ndim]
//     payload  f64[prod(dims)]
//
// Entries are written in the order given; load preserves file order.
void save_checkpoint(const std::string& file,
                     const std::vector<std::pair<std::string, Tensor>>& entries);

std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::string& file);

std::map<std::string, Tensor> load_checkpoint_map(const std::string& file);

}  // namespace decoar
