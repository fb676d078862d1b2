#pragma once

// Named parameter registry, Adam with bias correction, and the single-file
// checkpoint format (JSON manifest + raw little-endian values).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "argex/errors.hpp"
#include "argex/rng.hpp"
#include "argex/tensor.hpp"
#include <json.hpp>

namespace argex {

class ParameterStore {
 public:
  Parameter& add(const std::string& name, Shape shape) {
    if (map_.count(name)) throw ValueError("duplicate parameter: " + name);
    Parameter p;
    p.name = name;
    p.shape = std::move(shape);
    p.value.assign(shape_numel(p.shape), Scalar(0));
    return map_.emplace(name, std::move(p)).first->second;
  }

  template <typename InitFn>
  Parameter& add(const std::string& name, Shape shape, InitFn&& init) {
    Parameter& p = add(name, std::move(shape));
    for (Scalar& v : p.value) v = init();
    return p;
  }

  Parameter& at(const std::string& name) {
    auto it = map_.find(name);
    if (it == map_.end()) throw ValueError("unknown parameter: " + name);
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) throw ValueError("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return map_.count(name) > 0; }
  std::size_t size() const { return map_.size(); }

  void ensure_grads() {
    for (auto& [_, p] : map_) p.ensure_grad();
  }
  void zero_grads() {
    for (auto& [_, p] : map_) p.zero_grad();
  }

  auto begin() { return map_.begin(); }
  auto end() { return map_.end(); }
  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

  using Snapshot = std::map<std::string, std::vector<Scalar>>;
  Snapshot snapshot() const {
    Snapshot s;
    for (const auto& [name, p] : map_) s.emplace(name, p.value);
    return s;
  }
  void restore(const Snapshot& s) {
    for (const auto& [name, values] : s) {
      Parameter& p = at(name);
      if (p.value.size() != values.size())
        throw ValueError("snapshot size mismatch for " + name);
      p.value = values;
    }
  }

 private:
  // std::map keeps iteration order stable and addresses valid across inserts.
  std::map<std::string, Parameter> map_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update over every parameter in the store; zeroes grads afterwards.
  void step(ParameterStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : params) {
      if (!p.has_grad())
        throw MissingGradError("adam step: no gradient for parameter " +
                               name);
      auto& [m, v] = moments_[name];
      if (m.empty()) {
        m.assign(p.value.size(), Scalar(0));
        v.assign(p.value.size(), Scalar(0));
      }
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p.value[i] -=
            static_cast<Scalar>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
      p.zero_grad();
    }
  }

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      moments_;
};

// ---------------------------------------------------------------------------
// Initialization helpers
// ---------------------------------------------------------------------------

namespace init {

// Uniform Glorot range for a [fan_in x fan_out] matrix.
inline Parameter& glorot(ParameterStore& ps, const std::string& name,
                         std::size_t fan_in, std::size_t fan_out, Rng& rng,
                         double scale = 1.0) {
  const double s =
      scale * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return ps.add(name, Shape{fan_in, fan_out},
                [&] { return static_cast<Scalar>(rng.uniform(-s, s)); });
}

inline Parameter& gaussian_table(ParameterStore& ps, const std::string& name,
                                 std::size_t rows, std::size_t cols, Rng& rng,
                                 double stddev = 0.1) {
  return ps.add(name, Shape{rows, cols},
                [&] { return static_cast<Scalar>(rng.normal(0.0, stddev)); });
}

inline Parameter& zeros(ParameterStore& ps, const std::string& name,
                        Shape shape) {
  return ps.add(name, std::move(shape));
}

inline Parameter& ones(ParameterStore& ps, const std::string& name,
                       Shape shape) {
  Parameter& p = ps.add(name, std::move(shape));
  std::fill(p.value.begin(), p.value.end(), Scalar(1));
  return p;
}

}  // namespace init

// ---------------------------------------------------------------------------
// Checkpoint file: magic, manifest length, JSON manifest, raw values.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[] = "ARGEXCKP1\n";

inline void save_checkpoint(const ParameterStore& params,
                            const std::string& path) {
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, p] : params) {
    manifest.push_back({{"name", name},
                        {"shape", p.shape},
                        {"dtype", sizeof(Scalar) == 8 ? "f64" : "f32"},
                        {"offset", offset}});
    offset += p.value.size() * sizeof(Scalar);
  }
  const std::string mtext = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  const std::uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& [name, p] : params)
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(Scalar)));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

// Loads values into an existing store; every manifest entry must match the
// store's shape for that name exactly.
inline void load_checkpoint(ParameterStore& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw CheckpointError("bad checkpoint magic in " + path);
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw CheckpointError("truncated checkpoint manifest in " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtext);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("unreadable manifest: ") + e.what());
  }
  const std::string want_dtype = sizeof(Scalar) == 8 ? "f64" : "f32";
  const std::streampos data_start = in.tellg();
  for (const auto& entry : manifest) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    const std::string dtype = entry.at("dtype").get<std::string>();
    if (!params.contains(name))
      throw CheckpointError("checkpoint parameter not in current config: " +
                            name);
    Parameter& p = params.at(name);
    if (p.shape != shape)
      throw CheckpointError("shape mismatch for " + name + ": checkpoint " +
                            shape_str(shape) + " vs config " +
                            shape_str(p.shape));
    if (dtype != want_dtype)
      throw CheckpointError("dtype mismatch for " + name + ": " + dtype);
    const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
    in.seekg(data_start + static_cast<std::streamoff>(off));
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(Scalar)));
    if (!in) throw CheckpointError("truncated values for " + name);
  }
}

}  // namespace argex
