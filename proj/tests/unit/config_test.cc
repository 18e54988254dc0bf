#include <gtest/gtest.h>

#include "treg/config.h"
#include "treg/errors.h"

namespace treg {
namespace {

RunConfig for_command(const std::string& c) {
  RunConfig cfg;
  cfg.command = c;
  return cfg;
}

TEST(AllowedKeys, PerCommand) {
  for (const char* c : {"gen", "train", "track", "eval", "ablate", "dump-attn"}) {
    EXPECT_FALSE(allowed_keys(c).empty()) << c;
  }
  EXPECT_THROW(allowed_keys("serve"), ConfigError);
}

TEST(ApplyJson, SetsValues) {
  RunConfig cfg = for_command("train");
  apply_json(cfg, R"({"seed": 7, "iterations": 30, "learning_rate": 0.01, "tat_cls": true,
                      "milestones": [0.25], "fusion": "dwcorr"})");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.train.iterations, 30);
  EXPECT_EQ(cfg.train.learning_rate, 0.01);
  EXPECT_TRUE(cfg.tat_cls);
  EXPECT_EQ(cfg.train.milestones, std::vector<double>{0.25});
  EXPECT_EQ(cfg.fusion, FusionKind::DepthwiseCorrelation);
}

TEST(ApplyJson, RejectsUnknownAndForeignKeys) {
  RunConfig cfg = for_command("gen");
  EXPECT_THROW(apply_json(cfg, R"({"learning_rate": 0.1})"), ConfigError);
  EXPECT_THROW(apply_json(cfg, R"({"colour": "red"})"), ConfigError);
}

TEST(ApplyJson, RejectsBadValues) {
  RunConfig cfg = for_command("train");
  EXPECT_THROW(apply_json(cfg, "{"), ConfigError);
  EXPECT_THROW(apply_json(cfg, "[1, 2]"), ConfigError);
  EXPECT_THROW(apply_json(cfg, R"({"iterations": "many"})"), ConfigError);
  EXPECT_THROW(apply_json(cfg, R"({"batch_size": 0})"), ConfigError);
  EXPECT_THROW(apply_json(cfg, R"({"fusion": "softmax"})"), ConfigError);
  RunConfig track = for_command("track");
  EXPECT_THROW(apply_json(track, R"({"queue": "static2"})"), ConfigError);
  EXPECT_THROW(apply_json(track, R"({"infer": "median"})"), ConfigError);
}

TEST(ApplyJson, CommandKeyMustMatch) {
  RunConfig cfg = for_command("gen");
  EXPECT_NO_THROW(apply_json(cfg, R"({"command": "gen"})"));
  EXPECT_THROW(apply_json(cfg, R"({"command": "train"})"), ConfigError);
}

TEST(ToJson, EchoIsAFixedPoint) {
  for (const char* c : {"gen", "train", "track", "eval", "ablate", "dump-attn"}) {
    RunConfig cfg = for_command(c);
    cfg.seed = 12345678901234ULL;
    cfg.out = "out_dir";
    const std::string echo = to_json(cfg);
    RunConfig again = for_command(c);
    apply_json(again, echo);
    EXPECT_EQ(to_json(again), echo) << c;
  }
}

TEST(ToJson, OnlyRelevantKeys) {
  const std::string gen = to_json(for_command("gen"));
  EXPECT_NE(gen.find("\"suite\""), std::string::npos);
  EXPECT_EQ(gen.find("learning_rate"), std::string::npos);
  const std::string track = to_json(for_command("track"));
  EXPECT_NE(track.find("\"infer\": \"average\""), std::string::npos);
}

TEST(InferModeNames, RoundTrip) {
  for (head::InferMode m : {head::InferMode::Argmax, head::InferMode::NeighborhoodAverage}) {
    EXPECT_EQ(parse_infer_mode(infer_mode_name(m)), m);
  }
}

}  // namespace
}  // namespace treg
