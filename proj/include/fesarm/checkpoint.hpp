#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fesarm/errors.hpp"
#include "fesarm/mlp.hpp"
#include "fesarm/sac.hpp"

namespace fesarm {

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic{'F', 'E', 'S', 'A', 'R', 'M', 'C', 'K'};

/// Trained networks plus what is needed to turn an observation into their input.
///
/// Binary layout, all numbers little-endian:
///
///   magic          8 bytes  "FESARMCK"
///   version        u32      1
///   obs_dim        u32      raw environment observation size (3 x DOFs)
///   action_dim     u32      number of channels
///   encoder flags  u32      bit 0: tracking error appended, bit 1: previous action appended
///   velocity_scale f64
///   log_alpha      f64
///   network count  u32      5: actor, critic 1, critic 2, target 1, target 2
///   per network    u32 layer-size count (4), then that many u32 sizes
///   parameters     f64      every network in the order above; within a
///                           network layer by layer, the weight matrix
///                           (outputs x inputs, column-major) then the bias
///
/// A JSON sidecar (`<file>.json`) carries the config hash and step counts.
struct Checkpoint {
  int obs_dim = 0;
  int action_dim = 0;
  ObservationEncoder encoder;
  AgentNets<double> nets;

  GreedyPolicy<double> policy() const { return GreedyPolicy<double>(nets.actor, encoder, SacConfig{}); }
};

struct CheckpointInfo {
  std::string config_hash;
  long training_steps = 0;
  long gradient_updates = 0;
  int episodes = 0;
  std::uint64_t seed = 0;
  std::string variant;
};

namespace detail {

template <class S>
Mlp<double> to_double(const Mlp<S>& n) {
  Mlp<double> d(n.sizes());
  d.params() = n.params().template cast<double>();
  return d;
}

class LeWriter {
public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  std::vector<char> bytes;
};

class LeReader {
public:
  explicit LeReader(std::vector<char> b) : bytes_(std::move(b)) {}
  std::uint64_t raw(int n) {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  double f64() { return std::bit_cast<double>(raw(8)); }
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint is truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <class S>
Checkpoint make_checkpoint(const SacAgent<S>& agent) {
  Checkpoint c;
  c.obs_dim = agent.observation_dim();
  c.action_dim = agent.nets().action_dim();
  c.encoder = agent.encoder();
  const AgentNets<S>& n = agent.nets();
  c.nets.actor = detail::to_double(n.actor);
  c.nets.critic1 = detail::to_double(n.critic1);
  c.nets.critic2 = detail::to_double(n.critic2);
  c.nets.target1 = detail::to_double(n.target1);
  c.nets.target2 = detail::to_double(n.target2);
  c.nets.log_alpha = n.log_alpha;
  return c;
}

inline std::vector<char> serialize_checkpoint(const Checkpoint& c) {
  detail::LeWriter w;
  w.bytes.insert(w.bytes.end(), kCheckpointMagic.begin(), kCheckpointMagic.end());
  w.u32(kCheckpointFormatVersion);
  w.u32(static_cast<std::uint32_t>(c.obs_dim));
  w.u32(static_cast<std::uint32_t>(c.action_dim));
  w.u32((c.encoder.append_error ? 1u : 0u) | (c.encoder.append_previous_action ? 2u : 0u));
  w.f64(c.encoder.velocity_scale);
  w.f64(c.nets.log_alpha);
  const std::array<const Mlp<double>*, 5> nets{&c.nets.actor, &c.nets.critic1, &c.nets.critic2, &c.nets.target1,
                                               &c.nets.target2};
  w.u32(nets.size());
  for (const Mlp<double>* n : nets) {
    w.u32(n->sizes().size());
    for (int s : n->sizes()) w.u32(static_cast<std::uint32_t>(s));
  }
  for (const Mlp<double>* n : nets)
    for (Eigen::Index i = 0; i < n->parameter_count(); ++i) w.f64(n->params()[i]);
  return w.bytes;
}

inline Checkpoint deserialize_checkpoint(std::vector<char> bytes) {
  detail::LeReader r(std::move(bytes));
  if (std::memcmp(r.take(kCheckpointMagic.size()), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointFormatVersion)
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
  Checkpoint c;
  c.obs_dim = static_cast<int>(r.u32());
  c.action_dim = static_cast<int>(r.u32());
  const std::uint32_t flags = r.u32();
  if (flags > 3) throw CheckpointError("unknown encoder flags");
  c.encoder.append_error = flags & 1u;
  c.encoder.append_previous_action = flags & 2u;
  c.encoder.velocity_scale = r.f64();
  c.nets.log_alpha = r.f64();
  if (r.u32() != 5) throw CheckpointError("checkpoint must hold 5 networks");
  std::array<Mlp<double>*, 5> nets{&c.nets.actor, &c.nets.critic1, &c.nets.critic2, &c.nets.target1, &c.nets.target2};
  for (Mlp<double>* n : nets) {
    if (r.u32() != 4) throw CheckpointError("networks must have 4 layer sizes");
    Mlp<double>::Sizes sizes{};
    for (int& s : sizes) {
      const std::uint32_t v = r.u32();
      if (v == 0 || v > (1u << 20)) throw CheckpointError("implausible layer size");
      s = static_cast<int>(v);
    }
    *n = Mlp<double>(sizes);
  }
  const int in = c.encoder.input_dim(c.obs_dim, c.action_dim);
  if (c.obs_dim <= 0 || c.obs_dim % 3 != 0 || c.action_dim <= 0 || c.nets.actor.input_dim() != in ||
      c.nets.actor.output_dim() != 2 * c.action_dim || c.nets.critic1.input_dim() != in + c.action_dim ||
      c.nets.critic1.output_dim() != 1 || c.nets.critic2.sizes() != c.nets.critic1.sizes() ||
      c.nets.target1.sizes() != c.nets.critic1.sizes() || c.nets.target2.sizes() != c.nets.critic1.sizes())
    throw CheckpointError("checkpoint layer table does not match its dimensions");
  for (Mlp<double>* n : nets)
    for (Eigen::Index i = 0; i < n->parameter_count(); ++i) n->params()[i] = r.f64();
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint parameters");
  return c;
}

inline std::string checkpoint_sidecar_path(const std::string& path) { return path + ".json"; }

inline void save_checkpoint(const std::string& path, const Checkpoint& c, const CheckpointInfo& info) {
  const std::vector<char> bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  nlohmann::ordered_json j;
  j["checkpoint_format_version"] = kCheckpointFormatVersion;
  j["config_hash"] = info.config_hash;
  j["training_steps"] = info.training_steps;
  j["gradient_updates"] = info.gradient_updates;
  j["episodes"] = info.episodes;
  j["seed"] = info.seed;
  j["variant"] = info.variant;
  std::ofstream side(checkpoint_sidecar_path(path));
  if (!side) throw CheckpointError("cannot write '" + checkpoint_sidecar_path(path) + "'");
  side << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::move(bytes));
}

inline CheckpointInfo load_checkpoint_info(const std::string& path) {
  std::ifstream in(checkpoint_sidecar_path(path));
  if (!in) throw CheckpointError("cannot open checkpoint sidecar for '" + path + "'");
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("checkpoint_format_version").get<int>() != kCheckpointFormatVersion)
      throw CheckpointError("unsupported checkpoint sidecar version");
    CheckpointInfo info;
    info.config_hash = j.at("config_hash").get<std::string>();
    info.training_steps = j.at("training_steps").get<long>();
    info.gradient_updates = j.at("gradient_updates").get<long>();
    info.episodes = j.at("episodes").get<int>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.variant = j.at("variant").get<std::string>();
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint sidecar: " + std::string(e.what()));
  }
}

}  // namespace fesarm
