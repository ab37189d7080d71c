#include <gtest/gtest.h>

#include "pcrowd/config.hpp"
#include "test_support.hpp"

using namespace pcrowd;

TEST(Config, DefaultsAreValid) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.study1.num_crowds * c.study1.crowd_size, 1000u);
  EXPECT_EQ(c.stats.alpha_variance, 0.001);
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
  const auto c = parse_config(R"(
# comment
[experiment]
name = "demo"
output_dir = out

[data]
personas = personas.jsonl
multi_label = /abs/ml.csv

[simulator]
persona_bias_scale = 0.8
group_effects = black:aae=-1.0, conservative:anti_black=0.5

[study1]
num_crowds = 3
crowd_size = 20
tie_rule = negative

[study2]
persona_algorithm = kmeans

[stats]
levene_center = median
)",
                              "/base");
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.output_dir, "/base/out");
  EXPECT_EQ(c.data.personas, "/base/personas.jsonl");
  EXPECT_EQ(c.data.multi_label, "/abs/ml.csv");
  EXPECT_EQ(c.simulator.persona_bias_scale, 0.8);
  EXPECT_EQ(c.simulator.group_effects.at("black").at(SubsetTag::aae), -1.0);
  EXPECT_EQ(c.simulator.group_effects.at("conservative").at(SubsetTag::anti_black), 0.5);
  EXPECT_EQ(c.study1.num_crowds, 3u);
  EXPECT_EQ(c.study1.tie_rule.mode, TieMode::negative);
  EXPECT_EQ(c.study2.persona_algorithm, ClusterAlgorithm::kmeans);
  EXPECT_EQ(c.stats.levene_center, LeveneCenter::median);
}

// Parsing rejects malformed input; range checks run in validate() so that
// overrides can be applied first.
TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("[study1]\nbogus = 1\n"), ValidationError);
  EXPECT_THROW(parse_config("[nowhere]\nx = 1\n"), ValidationError);
  EXPECT_THROW(parse_config("[study1]\nnum_crowds = many\n"), ValidationError);
  EXPECT_THROW(parse_config("[study1]\nnum_crowds = 0\n").validate(), ValidationError);
  EXPECT_THROW(parse_config("[study2]\ncluster_threshold = 1.5\n").validate(), ValidationError);
  EXPECT_THROW(parse_config("[stats]\nalpha_shift = 0\n").validate(), ValidationError);
  EXPECT_THROW(parse_config("[embedding]\nkind = http\n").validate(), ValidationError);
  EXPECT_THROW(parse_group_effects("black=-1"), ValidationError);
}

TEST(Config, OverridesApply) {
  ExperimentConfig c;
  apply_override(c, "seeds.partition=99");
  apply_override(c, "study2.top_k_diff = 4");
  EXPECT_EQ(c.seeds.partition, 99u);
  EXPECT_EQ(c.study2.top_k_diff, 4u);
  EXPECT_THROW(apply_override(c, "nodot=1"), ValidationError);
  EXPECT_THROW(apply_override(c, "seeds.partition"), ValidationError);
  EXPECT_THROW(apply_override(c, "seeds.unknown=1"), ValidationError);
}

TEST(Config, LoadFromFile) {
  TempDir dir;
  write_file(dir.file("c.ini"), "[experiment]\nname = x\noutput_dir = results\n");
  const auto c = load_config(dir.file("c.ini"));
  EXPECT_EQ(c.name, "x");
  EXPECT_EQ(c.output_dir, dir.file("results"));
  try {
    load_config(dir.file("missing.ini"));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.ini"), std::string::npos);
  }
}

TEST(Config, SnapshotRecordsSeedsAndParameters) {
  ExperimentConfig c;
  c.seeds.kmeans = 77;
  const auto j = c.snapshot();
  EXPECT_EQ(j["seeds"]["kmeans"], 77);
  EXPECT_EQ(j["study1"]["crowd_size"], 100);
  EXPECT_EQ(j.dump(), c.snapshot().dump());
}
