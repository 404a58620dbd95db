#include <gtest/gtest.h>

#include <fstream>

#include "fesarm/default_models.hpp"
#include "fesarm/model_io.hpp"
#include "test_support.hpp"

using namespace fesarm;

TEST(ModelIo, RoundTripPreservesGeometryAndDynamics) {
  for (Variant v : {Variant::Planar, Variant::ThreeD}) {
    const ArmModel& m = fesarm::testing::calibrated(v);
    const auto dir = fesarm::testing::temp_dir("model_io");
    const auto path = (dir / "model.json").string();
    save_model(m, path);
    const ArmModel back = load_model(path);
    EXPECT_EQ(to_json(back).dump(), to_json(m).dump());
    EXPECT_TRUE(back.calibrated);
    Pcg32 rng(1);
    for (int k = 0; k < 20; ++k) {
      const DofVector q = fesarm::testing::random_posture(m, rng);
      for (int i = 0; i < m.muscle_count(); ++i) {
        EXPECT_EQ(mtu_length(back, q, i), mtu_length(m, q, i));
        EXPECT_EQ(moment_arm(back, q, i, 0), moment_arm(m, q, i, 0));
      }
      EXPECT_EQ(mass_matrix(back, q), mass_matrix(m, q));
    }
  }
}

TEST(ModelIo, RejectsUnknownVersionAndBadFields) {
  Json j = to_json(default_model(Variant::Planar));
  j["model_format_version"] = 99;
  EXPECT_THROW(model_from_json(j), ModelConfigError);
  j = to_json(default_model(Variant::Planar));
  j["muscles"][0]["f_max"] = -3.0;
  EXPECT_THROW(model_from_json(j), ModelConfigError);
  j = to_json(default_model(Variant::Planar));
  j["dofs"].erase(0);
  EXPECT_THROW(model_from_json(j), ModelConfigError);
  j = to_json(default_model(Variant::Planar));
  j["muscles"][0]["path"][1]["wrap"] = "no_such_surface";
  EXPECT_THROW(model_from_json(j), ModelConfigError);
}

TEST(ModelIo, MissingOrMalformedFileIsConfigError) {
  EXPECT_THROW(load_model("/nonexistent/model.json"), ModelConfigError);
  const auto dir = fesarm::testing::temp_dir("model_io_bad");
  std::ofstream((dir / "bad.json").string()) << "{ not json";
  EXPECT_THROW(load_model((dir / "bad.json").string()), ModelConfigError);
}
