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

#include "hybridize/student.h"

#include <numeric>

#include "hybridize/errors.h"
#include "hybridize/numerics.h"

namespace hybridize {

using nlohmann::json;

namespace {

std::string pair_name(std::size_t block, int rate) {
  return "(block " + std::to_string(block) + ", rate " + std::to_string(rate) +
         ")";
}

json describe_map(const FeatureMap& m) {
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back({l.in_dim(), l.out_dim()});
  return {{"degree", m.degree}, {"slice_width", m.slice_width},
          {"layers", layers}};
}

// Empty map with the shapes recorded by describe_map.
FeatureMap skeleton_map(const json& j) {
  FeatureMap m;
  m.degree = j.at("degree").get<int>();
  m.slice_width = j.at("slice_width").get<std::size_t>();
  for (const auto& shape : j.at("layers")) {
    const auto in = shape.at(0).get<std::size_t>();
    const auto out = shape.at(1).get<std::size_t>();
    m.layers.push_back({Tensor({in, out}), Tensor({1, out})});
  }
  return m;
}

json describe_pair(const FeatureMapPair& phi) {
  json q = json::array(), k = json::array();
  for (const auto& m : phi.query) q.push_back(describe_map(m));
  for (const auto& m : phi.key) k.push_back(describe_map(m));
  return {{"heads", phi.query.size()}, {"query", q}, {"key", k}};
}

FeatureMapPair skeleton_pair(const json& j) {
  FeatureMapPair phi;
  for (const auto& m : j.at("query")) phi.query.push_back(skeleton_map(m));
  for (const auto& m : j.at("key")) phi.key.push_back(skeleton_map(m));
  if (phi.query.size() != j.at("heads").get<std::size_t>() ||
      phi.key.size() != phi.query.size()) {
    throw CheckpointError("feature-map manifest head count is inconsistent");
  }
  return phi;
}

template <class T>
void pack(TensorArchive& archive, const T& params) {
  std::size_t i = 0;
  visit_tensors(params, [&](const Tensor& t) {
    archive.add("p" + std::to_string(i++), t);
  });
}

template <class T>
void unpack(const TensorArchive& archive, T& params) {
  std::size_t i = 0;
  visit_tensors(params, [&](Tensor& t) {
    const std::string name = "p" + std::to_string(i++);
    if (!archive.contains(name)) {
      throw CheckpointError("checkpoint lacks tensor " + name);
    }
    const Tensor& src = archive.get(name);
    if (src.shape() != t.shape()) {
      throw CheckpointError("checkpoint tensor " + name + " has shape " +
                            shape_string(src.shape()) + ", expected " +
                            shape_string(t.shape()));
    }
    t = src;
  });
  if (i != archive.tensors.size()) {
    throw CheckpointError("checkpoint holds " +
                          std::to_string(archive.tensors.size()) +
                          " tensors, expected " + std::to_string(i));
  }
}

const char* kind_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::kSoftmax: return "softmax";
    case AttentionKind::kLinear: return "linear";
    case AttentionKind::kHybrid: return "hybrid";
  }
  return "?";
}

AttentionKind parse_kind(const std::string& s) {
  if (s == "softmax") return AttentionKind::kSoftmax;
  if (s == "linear") return AttentionKind::kLinear;
  if (s == "hybrid") return AttentionKind::kHybrid;
  throw CheckpointError("unknown block kind '" + s + "'");
}

}  // namespace

TensorArchive encode_phi(const FeatureMapPair& phi, std::size_t block,
                         int rate) {
  TensorArchive a;
  a.metadata = {{"kind", "phi"}, {"block", block}, {"rate", rate},
                {"maps", describe_pair(phi)}};
  pack(a, phi);
  return a;
}

FeatureMapPair decode_phi(const TensorArchive& archive) {
  try {
    if (archive.metadata.value("kind", "") != "phi") {
      throw CheckpointError("archive is not a feature-map checkpoint");
    }
    FeatureMapPair phi = skeleton_pair(archive.metadata.at("maps"));
    unpack(archive, phi);
    for (const auto* maps : {&phi.query, &phi.key}) {
      for (const auto& m : *maps) validate(m);
    }
    return phi;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed feature-map manifest: ") +
                          e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("bad feature-map checkpoint: ") +
                          e.what());
  }
}

std::filesystem::path phi_checkpoint_path(const std::filesystem::path& dir,
                                          std::size_t block, int rate) {
  return dir / ("phi_b" + std::to_string(block) + "_r" + std::to_string(rate) +
                ".bin");
}

void save_phi_checkpoints(const std::filesystem::path& dir,
                          const PhiCheckpoints& checkpoints) {
  for (const auto& [key, phi] : checkpoints) {
    write_archive(phi_checkpoint_path(dir, key.first, key.second),
                  encode_phi(phi, key.first, key.second));
  }
}

PhiCheckpoints load_phi_checkpoints(const std::filesystem::path& dir,
                                    const RatePlan& plan) {
  PhiCheckpoints out;
  for (std::size_t b = 0; b < plan.rates.size(); ++b) {
    const int r = plan.rates[b];
    if (r == 1) continue;
    const auto path = phi_checkpoint_path(dir, b, r);
    if (!std::filesystem::exists(path)) {
      throw CheckpointError("missing feature-map checkpoint for " +
                            pair_name(b, r) + " at " + path.string());
    }
    TensorArchive a;
    try {
      a = read_archive(path);
    } catch (const Error& e) {
      throw CheckpointError("unreadable checkpoint for " + pair_name(b, r) +
                            ": " + e.what());
    }
    if (a.metadata.value("block", -1) != static_cast<long>(b) ||
        a.metadata.value("rate", -1) != r) {
      throw CheckpointError("checkpoint " + path.string() +
                            " does not belong to " + pair_name(b, r));
    }
    out.emplace(std::make_pair(b, r), decode_phi(a));
  }
  return out;
}

ToyModel assemble_student(const ToyModel& teacher, const RatePlan& plan,
                          const PhiCheckpoints& checkpoints,
                          Stabilizer mode) {
  validate(teacher);
  if (plan.rates.size() != teacher.blocks.size()) {
    throw ArgumentError("plan has " + std::to_string(plan.rates.size()) +
                        " rates for " + std::to_string(teacher.blocks.size()) +
                        " blocks");
  }
  ToyModel student = teacher;
  for (std::size_t b = 0; b < plan.rates.size(); ++b) {
    const int r = plan.rates[b];
    BlockParams& block = student.blocks[b];
    if (r < 1) throw ArgumentError("plan rate must be >= 1");
    if (r == 1) {
      block.kernel = KernelConfig::softmax();
      block.phi.reset();
      continue;
    }
    const auto it = checkpoints.find({b, r});
    if (it == checkpoints.end()) {
      throw CheckpointError("no feature maps for " + pair_name(b, r));
    }
    block.kernel = KernelConfig::hybrid(r, mode);
    block.phi = it->second;
    try {
      validate(block);
      if (block.phi->query.front().output_dim() !=
          block.phi->key.front().output_dim()) {
        throw DimensionError("query and key feature widths differ");
      }
    } catch (const Error& e) {
      throw CheckpointError("feature maps for " + pair_name(b, r) +
                            " do not fit the model: " + e.what());
    }
  }
  return student;
}

std::vector<SyntheticSample> teacher_labelled(
    const ToyModel& teacher, std::span<const SyntheticSample> samples) {
  std::vector<SyntheticSample> out(samples.begin(), samples.end());
  for (auto& s : out) s.noise = denoise(teacher, s.noised, s.timestep);
  return out;
}

TrainConfig finetune_defaults() {
  TrainConfig c;
  c.iters = 200;
  c.learning_rate = 1e-5;
  return c;
}

ToyModel finetune_student(ToyModel student,
                          std::span<const SyntheticSample> data,
                          const TrainConfig& config) {
  return train_model(std::move(student), data, config);
}

double FidelityMetrics::attention_l1_mean() const {
  if (attention_l1.empty()) return 0.0;
  return std::accumulate(attention_l1.begin(), attention_l1.end(), 0.0) /
         static_cast<double>(attention_l1.size());
}

FidelityMetrics evaluate_fidelity(const ToyModel& student,
                                  const ToyModel& teacher,
                                  std::span<const std::uint64_t> seeds,
                                  std::span<const int> timesteps) {
  validate(student);
  validate(teacher);
  if (student.blocks.size() != teacher.blocks.size() ||
      student.dims.tokens != teacher.dims.tokens ||
      student.dims.width != teacher.dims.width) {
    throw DimensionError("student and teacher dims differ");
  }
  if (seeds.empty() || timesteps.empty()) {
    throw ArgumentError("evaluate_fidelity needs seeds and timesteps");
  }
  const std::size_t nb = teacher.blocks.size();
  const double inv_t = 1.0 / static_cast<double>(timesteps.size());
  const TrajectoryCache cache =
      cache_teacher_trajectory(teacher, seeds, timesteps);

  FidelityMetrics m;
  m.attention_l1.assign(nb, 0.0);
  std::size_t e = 0;
  for (std::uint64_t seed : seeds) {
    SeedFidelity s{seed, 0.0, std::vector<double>(nb, 0.0)};
    SeededRng rng(seed);
    const Tensor clean = render_clean(rng, teacher.dims);
    const Tensor noise =
        gaussian(rng, {teacher.dims.tokens, teacher.dims.width});
    for (int t : timesteps) {
      const TrajectoryEntry& entry = cache.entries[e++];
      const Tensor x = noise_input(clean, noise, t, teacher.dims.timesteps);
      s.output_l1 += inv_t * loss_value_distill(denoise(teacher, x, t),
                                                denoise(student, x, t));
      for (std::size_t b = 0; b < nb; ++b) {
        s.attention_l1[b] +=
            inv_t * loss_value_distill(
                        entry.attention_outputs[b],
                        block_attention(student.blocks[b], entry.block_inputs[b]));
      }
    }
    m.output_l1 += s.output_l1;
    for (std::size_t b = 0; b < nb; ++b) m.attention_l1[b] += s.attention_l1[b];
    m.per_seed.push_back(std::move(s));
  }
  const double inv_s = 1.0 / static_cast<double>(seeds.size());
  m.output_l1 *= inv_s;
  for (double& v : m.attention_l1) v *= inv_s;
  return m;
}

TensorArchive encode_model(const ToyModel& model,
                           const std::optional<RatePlan>& plan) {
  validate(model);
  const ModelDims& d = model.dims;
  json blocks = json::array();
  for (const auto& b : model.blocks) {
    json jb = {{"kind", kind_name(b.kernel.kind)},
               {"rate", b.kernel.rate},
               {"stabilizer",
                b.kernel.stabilizer == Stabilizer::kLiteral ? "literal"
                                                            : "consistent"}};
    if (b.phi) jb["maps"] = describe_pair(*b.phi);
    blocks.push_back(std::move(jb));
  }
  TensorArchive a;
  a.metadata = {{"kind", "model"},
                {"dims",
                 {{"blocks", d.blocks},
                  {"tokens", d.tokens},
                  {"width", d.width},
                  {"heads", d.heads},
                  {"qk_dim", d.qk_dim},
                  {"v_dim", d.v_dim},
                  {"mlp_hidden", d.mlp_hidden},
                  {"timesteps", d.timesteps}}},
                {"blocks", blocks},
                {"plan", plan ? to_json(*plan) : json(nullptr)}};
  pack(a, model);
  return a;
}

ToyModel decode_model(const TensorArchive& archive) {
  try {
    if (archive.metadata.value("kind", "") != "model") {
      throw CheckpointError("archive is not a model checkpoint");
    }
    const json& jd = archive.metadata.at("dims");
    ModelDims d;
    d.blocks = jd.at("blocks").get<std::size_t>();
    d.tokens = jd.at("tokens").get<std::size_t>();
    d.width = jd.at("width").get<std::size_t>();
    d.heads = jd.at("heads").get<std::size_t>();
    d.qk_dim = jd.at("qk_dim").get<std::size_t>();
    d.v_dim = jd.at("v_dim").get<std::size_t>();
    d.mlp_hidden = jd.at("mlp_hidden").get<std::size_t>();
    d.timesteps = jd.at("timesteps").get<int>();
    ToyModel model = make_teacher(d, 0);
    const json& jb = archive.metadata.at("blocks");
    if (jb.size() != model.blocks.size()) {
      throw CheckpointError("model manifest block count mismatch");
    }
    for (std::size_t b = 0; b < jb.size(); ++b) {
      KernelConfig& k = model.blocks[b].kernel;
      k.kind = parse_kind(jb[b].at("kind").get<std::string>());
      k.rate = jb[b].at("rate").get<int>();
      k.stabilizer = jb[b].at("stabilizer").get<std::string>() == "consistent"
                         ? Stabilizer::kConsistent
                         : Stabilizer::kLiteral;
      if (jb[b].contains("maps")) {
        model.blocks[b].phi = skeleton_pair(jb[b].at("maps"));
      }
    }
    unpack(archive, model);
    validate(model);
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed model manifest: ") + e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("bad model checkpoint: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ToyModel& model,
                const std::optional<RatePlan>& plan) {
  write_archive(path, encode_model(model, plan));
}

ToyModel load_model(const std::filesystem::path& path) {
  return decode_model(read_archive(path));
}

}  // namespace hybridize
