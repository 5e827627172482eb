// Copyright 2026 The Hybridize Authors
// SPDX-License-Identifier: Apache-2.0
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

#ifndef HYBRIDIZE_SERIALIZE_H_
#define HYBRIDIZE_SERIALIZE_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybridize/tensor.h"

namespace hybridize {

// Named tensors plus free-form metadata. On disk:
//
//   line 1   "HYBRIDIZE-TENSORS 1"
//   line 2   compact JSON manifest:
//            {"metadata": {...},
//             "tensors": [{"name", "shape", "dtype": "f64", "offset"}, ...]}
//   payload  little-endian IEEE-754 binary64 values, tensors back to back in
//            manifest order; "offset" counts bytes from the payload start.
struct TensorArchive {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(std::string name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

std::string encode_archive(const TensorArchive& archive);
TensorArchive decode_archive(const std::string& bytes);

void write_archive(const std::filesystem::path& path,
                   const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

// Whole-file helpers that throw IoError.
void write_text_file(const std::filesystem::path& path,
                     const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace hybridize

#endif  // HYBRIDIZE_SERIALIZE_H_
