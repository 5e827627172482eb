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

#include "hybridize/serialize.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "hybridize/errors.h"

namespace hybridize {
namespace {

constexpr const char* kMagic = "HYBRIDIZE-TENSORS 1";

void put_le64(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

double get_le64(const std::string& in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b]))
            << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void TensorArchive::add(std::string name, Tensor t) {
  if (contains(name)) throw ArgumentError("duplicate tensor name " + name);
  tensors.emplace_back(std::move(name), std::move(t));
}

const Tensor& TensorArchive::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw CheckpointError("archive has no tensor named " + name);
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

std::string encode_archive(const TensorArchive& archive) {
  nlohmann::json manifest;
  manifest["metadata"] = archive.metadata;
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    manifest["tensors"].push_back({{"name", name},
                                   {"shape", t.shape()},
                                   {"dtype", "f64"},
                                   {"offset", offset}});
    offset += 8 * t.size();
  }
  std::string out = std::string(kMagic) + "\n" + manifest.dump() + "\n";
  out.reserve(out.size() + offset);
  for (const auto& entry : archive.tensors) {
    for (double x : entry.second.data()) put_le64(out, x);
  }
  return out;
}

TensorArchive decode_archive(const std::string& bytes) {
  const std::size_t first = bytes.find('\n');
  if (first == std::string::npos || bytes.compare(0, first, kMagic) != 0) {
    throw CheckpointError("not a tensor archive (bad magic line)");
  }
  const std::size_t second = bytes.find('\n', first + 1);
  if (second == std::string::npos) {
    throw CheckpointError("tensor archive manifest is truncated");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(first + 1, second - first - 1));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("tensor archive manifest: ") + e.what());
  }
  const std::size_t payload = second + 1;
  TensorArchive archive;
  archive.metadata = manifest.value("metadata", nlohmann::json::object());
  try {
    for (const auto& rec : manifest.at("tensors")) {
      if (rec.at("dtype") != "f64") {
        throw CheckpointError("unsupported dtype " + rec.at("dtype").dump());
      }
      Shape shape = rec.at("shape").get<Shape>();
      const std::size_t offset = rec.at("offset").get<std::size_t>();
      const std::size_t count = shape_size(shape);
      if (payload + offset + 8 * count > bytes.size()) {
        throw CheckpointError("tensor archive payload is truncated");
      }
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i) {
        data[i] = get_le64(bytes, payload + offset + 8 * i);
      }
      archive.add(rec.at("name").get<std::string>(),
                  Tensor(std::move(shape), std::move(data)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("tensor archive manifest: ") + e.what());
  }
  return archive;
}

void write_archive(const std::filesystem::path& path,
                   const TensorArchive& archive) {
  write_text_file(path, encode_archive(archive));
}

TensorArchive read_archive(const std::filesystem::path& path) {
  return decode_archive(read_text_file(path));
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace hybridize
