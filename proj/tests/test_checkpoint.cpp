#include <gtest/gtest.h>

#include <fstream>
#include <vector>

#include "fesarm/checkpoint.hpp"
#include "test_support.hpp"

using namespace fesarm;

namespace {

SacConfig tiny() {
  SacConfig c;
  c.hidden = 8;
  c.batch_size = 4;
  c.warmup_steps = 5;
  c.buffer_capacity = 100;
  return c;
}

template <class S>
SacAgent<S> trained_agent(bool previous_action) {
  ObservationEncoder enc;
  enc.append_previous_action = previous_action;
  SacAgent<S> agent(6, 4, tiny(), 3, enc);
  Observation o{DofVector::Zero(2), DofVector::Zero(2), DofVector::Ones(2)};
  for (int k = 0; k < 12; ++k) {
    const Action a = agent.explore(o);
    Observation o2 = o;
    o2.theta = a.head(2);
    agent.observe({o, a, -a.sum(), o2, k == 11});
    o = o2;
  }
  return agent;
}

std::vector<char> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Checkpoint, RoundTripKeepsEveryParameter) {
  const auto agent = trained_agent<double>(true);
  const Checkpoint c = make_checkpoint(agent);
  const auto path = fesarm::testing::temp_dir("ckpt") / "agent.bin";
  save_checkpoint(path.string(), c, {"abc123", 12, 8, 1, 3, "planar"});
  const Checkpoint back = load_checkpoint(path.string());
  EXPECT_EQ(back.obs_dim, 6);
  EXPECT_EQ(back.action_dim, 4);
  EXPECT_TRUE(back.encoder.append_previous_action);
  EXPECT_EQ(back.nets.log_alpha, agent.nets().log_alpha);
  EXPECT_EQ(back.nets.actor.params(), agent.nets().actor.params());
  EXPECT_EQ(back.nets.critic1.params(), agent.nets().critic1.params());
  EXPECT_EQ(back.nets.critic2.params(), agent.nets().critic2.params());
  EXPECT_EQ(back.nets.target1.params(), agent.nets().target1.params());
  EXPECT_EQ(back.nets.target2.params(), agent.nets().target2.params());
  EXPECT_EQ(serialize_checkpoint(back), read_all(path));
}

TEST(Checkpoint, RestoredPolicyActsLikeTheAgent) {
  const auto agent = trained_agent<double>(true);
  auto live = agent.greedy();
  auto restored = make_checkpoint(agent).policy();
  Observation o{DofVector::Zero(2), DofVector::Zero(2), DofVector::Ones(2)};
  for (int k = 0; k < 5; ++k) {
    const Action a = live(o);
    EXPECT_EQ(a, restored(o));
    o.theta = a.head(2);
  }
}

TEST(Checkpoint, FloatAgentsAreStoredExactly) {
  const auto agent = trained_agent<float>(false);
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(make_checkpoint(agent)));
  EXPECT_EQ(back.nets.actor.params(), agent.nets().actor.params().cast<double>());
  EXPECT_FALSE(back.encoder.append_previous_action);
}

TEST(Checkpoint, BinaryLayoutIsLittleEndianWithLayerTable) {
  Checkpoint c = make_checkpoint(trained_agent<double>(false));
  c.nets.log_alpha = 1.0;
  c.nets.actor.params()[0] = -2.0;
  const std::vector<char> b = serialize_checkpoint(c);
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(b[i]); };
  EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "FESARMCK");
  EXPECT_EQ(byte(8), 1);  // version
  EXPECT_EQ(byte(9) | byte(10) | byte(11), 0);
  EXPECT_EQ(byte(12), 6);  // obs_dim
  EXPECT_EQ(byte(16), 4);  // action_dim
  EXPECT_EQ(byte(20), 1);  // only the tracking error is appended
  // log_alpha = 1.0 is 0x3FF0000000000000.
  for (int i = 0; i < 6; ++i) EXPECT_EQ(byte(32 + i), 0);
  EXPECT_EQ(byte(38), 0xF0);
  EXPECT_EQ(byte(39), 0x3F);
  EXPECT_EQ(byte(40), 5);  // network count
  // Actor sizes {8, 8, 8, 8}: encoded input 6 + 2 error terms, two hidden layers of 8, mean and log-std for 4 channels.
  for (int k = 0; k < 4; ++k) EXPECT_EQ(byte(48 + 4 * k), 8);
  const std::size_t header = 8 + 4 * 4 + 8 + 8 + 4 + 5 * (4 + 4 * 4);
  // First actor weight = -2.0 = 0xC000000000000000.
  EXPECT_EQ(byte(header + 7), 0xC0);
  const long actor = 8 * 8 + 8 + 8 * 8 + 8 + 8 * 8 + 8;
  const long critic = 12 * 8 + 8 + 8 * 8 + 8 + 8 * 1 + 1;
  EXPECT_EQ(static_cast<long>(b.size()), static_cast<long>(header) + 8 * (actor + 4 * critic));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const std::vector<char> good = serialize_checkpoint(make_checkpoint(trained_agent<double>(false)));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), CheckpointError);
  auto bad_version = good;
  bad_version[8] = 2;
  EXPECT_THROW(deserialize_checkpoint(bad_version), CheckpointError);
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_THROW(deserialize_checkpoint(truncated), CheckpointError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(trailing), CheckpointError);
  auto bad_table = good;
  bad_table[48] = 9;  // actor input no longer matches obs_dim
  EXPECT_THROW(deserialize_checkpoint(bad_table), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/agent.bin"), CheckpointError);
}

TEST(Checkpoint, SidecarCarriesHashAndSteps) {
  const auto path = fesarm::testing::temp_dir("ckpt_info") / "agent.bin";
  save_checkpoint(path.string(), make_checkpoint(trained_agent<double>(false)), {"deadbeef", 30000, 29001, 300, 7, "3d"});
  const CheckpointInfo info = load_checkpoint_info(path.string());
  EXPECT_EQ(info.config_hash, "deadbeef");
  EXPECT_EQ(info.training_steps, 30000);
  EXPECT_EQ(info.gradient_updates, 29001);
  EXPECT_EQ(info.episodes, 300);
  EXPECT_EQ(info.seed, 7u);
  EXPECT_EQ(info.variant, "3d");
  std::ofstream(checkpoint_sidecar_path(path.string())) << "{\"config_hash\": 1}";
  EXPECT_THROW(load_checkpoint_info(path.string()), CheckpointError);
}
