#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "pcrowd/cli.hpp"
#include "pcrowd/csv.hpp"
#include "pcrowd/experiments.hpp"
#include "test_support.hpp"

using namespace pcrowd;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pcrowd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Fresh demo corpus per test; each test owns its output directory.
class DemoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto r = cli({"demo-data", "--out", dir_.path().string(), "--personas", "200",
                        "--instances", "60", "--ml-instances", "30", "--templates", "12"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::string config_path() const { return dir_.file("config.ini"); }
  ExperimentConfig config(std::vector<std::string> overrides = {}) const {
    auto c = load_config(config_path());
    apply_override(c, "study2.n_personas=60");
    for (const auto& o : overrides) apply_override(c, o);
    return c;
  }

  TempDir dir_;
};

}  // namespace

TEST(Cli, MissingConfigIsValidationError) {
  const auto r = cli({"study1", "diversity", "-c", "/nonexistent/cfg.ini"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/cfg.ini"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(cli({"study1", "diversity", "--frobnicate"}).code, 1);
  EXPECT_EQ(cli({"no-such-command"}).code, 1);
}

TEST_F(DemoTest, AnnotateResumeOnCompleteStoreReportsNothingMissing) {
  const std::string set = "--set=study2.n_personas=40";
  auto first = cli({"annotate", "--study", "all", "-c", config_path(), set});
  ASSERT_EQ(first.code, 0) << first.err;
  // A non-empty store without --resume is refused.
  EXPECT_EQ(cli({"annotate", "--study", "1", "-c", config_path(), set}).code, 1);
  const auto again = cli({"annotate", "--study", "all", "--resume", "-c", config_path(), set});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_NE(again.out.find("0 missing"), std::string::npos) << again.out;
  EXPECT_NE(again.out.find("annotated 0 pairs"), std::string::npos) << again.out;
}

TEST_F(DemoTest, NoAnnotateOnEmptyStoreFails) {
  const auto r = cli({"study1", "diversity", "--no-annotate", "-c", config_path()});
  EXPECT_EQ(r.code, 1);
  EXPECT_THROW(study1_diversity(config(), {.annotate = false}), MissingLabelsError);
}

TEST_F(DemoTest, DiversityCsvReparses) {
  const auto c = config();
  const auto d = study1_diversity(c);
  write_diversity(c, d);
  const auto rows = csv::read_file(study_path(c, "study1/diversity_runs.csv")).rows;
  EXPECT_EQ(rows.size(), c.study1.n_personas + c.study1.n_baseline_runs);
  EXPECT_EQ(d.persona.size(), c.study1.n_personas);
  EXPECT_EQ(d.baseline.size(), c.study1.n_baseline_runs);
}

TEST_F(DemoTest, StrataAreDisjointAndOrdered) {
  const auto c = config();
  const auto d = study1_diversity(c);
  const auto strata = select_strata(d, 5);
  ASSERT_EQ(strata.size(), 3u);
  std::set<std::string> ids;
  for (const auto& [name, runs] : strata) {
    EXPECT_EQ(runs.size(), 5u);
    for (const auto* r : runs) ids.insert(*r->persona_id);
  }
  EXPECT_EQ(ids.size(), 15u);
  double low_max = 0, high_min = 1;
  for (const auto* r : strata[0].second) low_max = std::max(low_max, r->report.macro_avg_f1);
  for (const auto* r : strata[2].second) high_min = std::min(high_min, r->report.macro_avg_f1);
  EXPECT_LE(low_max, high_min);
}

TEST_F(DemoTest, NoPersonaOrNoiseEffectGivesIdenticalRuns) {
  const auto c = config({"simulator.persona_bias_scale=0", "simulator.noise_scale=0",
                         "simulator.embedding_bias_scale=0"});
  const auto d = study1_diversity(c);
  EXPECT_NEAR(d.levene.statistic, 0.0, 1e-12);
  EXPECT_NEAR(d.levene.p_value, 1.0, 1e-12);
  EXPECT_FALSE(d.reject);
}

TEST_F(DemoTest, NoiselessRepeatsGivePerfectRankCorrelation) {
  const auto c = config({"simulator.noise_scale=0"});
  const auto d = study1_diversity(c);
  const auto s = study1_stability(c, d);
  ASSERT_TRUE(s.rank_correlation.defined);
  EXPECT_NEAR(s.rank_correlation.rho, 1.0, 1e-12);
  for (const auto& e : s.entries) {
    for (double f : e.repeat_f1) EXPECT_EQ(f, e.first_run_f1);
  }
}

TEST_F(DemoTest, CrowdStudyShapes) {
  const auto c = config();
  const auto r = study1_crowds(c);
  EXPECT_EQ(r.persona_crowds.crowds.size(), c.study1.num_crowds);
  EXPECT_EQ(r.trajectories.size(), 2 * c.study1.num_crowds * c.study1.crowd_size);
  EXPECT_EQ(r.permutations.size(), 2 * c.study1.n_permutations * c.study1.crowd_size);
}

TEST_F(DemoTest, DiffTableIsAntisymmetric) {
  const auto c = config();
  const auto templates = load_templates(c.data.templates);
  const auto m = study2_markers(c, templates);
  ASSERT_FALSE(m.diff_rows.empty());
  // Rebuild the label table from the store for the direct diff_table call.
  const auto store = RunStore::open_read_only(store_path(c, 2));
  LikertTable labels;
  for (const auto& rec : store.records()) {
    if (rec.persona_id) labels[*rec.persona_id][rec.instance_id] = rec.label.as_likert();
  }
  std::vector<PersonaVariantSet> variants;
  for (const auto& t : templates) variants.push_back(expand_variants(t));
  const auto plan = study2_marker_plan(c, templates);
  for (SubsetTag s : {SubsetTag::aae, SubsetTag::anti_black}) {
    const auto fwd = diff_table(variants, plan.instances, labels, s, 1000);
    const auto rev = diff_table(variants, plan.instances, labels, s, 1000, true);
    ASSERT_EQ(fwd.size(), rev.size());
    for (std::size_t i = 0; i < fwd.size(); ++i) {
      EXPECT_EQ(fwd[i].instance_id, rev[i].instance_id);
      EXPECT_EQ(fwd[i].diff, -rev[i].diff);
    }
  }
}
