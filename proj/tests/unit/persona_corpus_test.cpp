#include <gtest/gtest.h>

#include <set>
#include <stdexcept>

#include "pcrowd/persona_corpus.hpp"
#include "pcrowd/synthetic.hpp"
#include "test_support.hpp"

using namespace pcrowd;

TEST(LoadPersonas, JsonlInOrder) {
  const auto p = parse_personas_jsonl(
      "{\"id\":\"p1\",\"description\":\"A nurse\"}\n{\"id\":\"p2\",\"description\":\"A cook\"}\n");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].id, "p1");
  EXPECT_EQ(p[1].description, "A cook");
}

TEST(LoadPersonas, FixtureWithNumericIds) {
  const auto p = load_personas(std::string(PCROWD_FIXTURE_DIR) + "/table1_personas.jsonl",
                               PersonaFormat::jsonl);
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p[0].id, "189476");
  EXPECT_EQ(p[4].id, "73592");
}

TEST(LoadPersonas, DuplicateIdRejected) {
  EXPECT_THROW(parse_personas_jsonl("{\"id\":\"p1\",\"description\":\"a\"}\n"
                                    "{\"id\":\"p1\",\"description\":\"b\"}\n"),
               ValidationError);
}

TEST(LoadPersonas, MalformedLinesReportLineNumber) {
  try {
    parse_personas_jsonl("{\"id\":\"p1\",\"description\":\"a\"}\n{broken\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_personas_jsonl("{\"id\":\"p1\",\"description\":\"  \"}\n"), ValidationError);
}

TEST(LoadPersonas, TsvWithHeaderAndRoundTrip) {
  TempDir dir;
  write_file(dir.file("p.tsv"), "id\tdescription\nx1\tA farmer\nx2\tA pilot\n");
  const auto p = load_personas(dir.file("p.tsv"), PersonaFormat::tsv);
  ASSERT_EQ(p.size(), 2u);
  write_personas_jsonl(dir.file("p.jsonl"), p);
  EXPECT_EQ(load_personas(dir.file("p.jsonl"), PersonaFormat::jsonl), p);
  EXPECT_THROW(load_personas(dir.file("missing.jsonl"), PersonaFormat::jsonl), IoError);
}

namespace {

// Flags anything containing "Ein" as German with high confidence.
class FakeDetector final : public LanguageDetector {
 public:
  LanguageGuess detect(std::string_view text) const override {
    if (text.find("boom") != std::string_view::npos) throw std::runtime_error("detector down");
    if (text.find("Ein") != std::string_view::npos) return {"de", 0.99};
    if (text.find("unsure") != std::string_view::npos) return {"fr", 0.4};
    return {"en", 0.95};
  }
};

}  // namespace

TEST(FilterNonEnglish, ClearCutSplit) {
  const std::vector<Persona> in{{"1", "A retired teacher"}, {"2", "Ein pensionierter Lehrer"}};
  const auto r = filter_non_english(in, FakeDetector());
  ASSERT_EQ(r.retained.size(), 1u);
  EXPECT_EQ(r.retained[0].id, "1");
  EXPECT_EQ(r.stats.removed_ids, std::vector<std::string>{"2"});
  EXPECT_EQ(r.stats.total, 2u);
}

TEST(FilterNonEnglish, EmptyAndNoop) {
  const auto empty = filter_non_english({}, FakeDetector());
  EXPECT_TRUE(empty.retained.empty());
  EXPECT_EQ(empty.stats.total, 0u);
  std::vector<Persona> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({std::to_string(i), "An English speaker"});
  const auto r = filter_non_english(ten, FakeDetector());
  EXPECT_EQ(r.retained.size(), 10u);
  EXPECT_TRUE(r.stats.removed_ids.empty());
}

TEST(FilterNonEnglish, LowConfidenceKeptAndDetectorFailureWarns) {
  const std::vector<Persona> in{{"1", "unsure text"}, {"2", "boom"}};
  const auto r = filter_non_english(in, FakeDetector());
  EXPECT_EQ(r.retained.size(), 2u);
  ASSERT_EQ(r.stats.warnings.size(), 1u);
  EXPECT_NE(r.stats.warnings[0].find("'2'"), std::string::npos);
}

TEST(StopwordDetector, SeparatesEnglishFromGerman) {
  const StopwordLanguageDetector d;
  EXPECT_EQ(d.detect("A retired teacher who loves the garden and the sea").language, "en");
  const auto de = d.detect("Ein pensionierter Lehrer mit einer Leidenschaft fur Gartenarbeit");
  EXPECT_NE(de.language, "en");
  EXPECT_GE(de.confidence, 0.8);
  // Too short to be sure either way: kept by the default floor.
  EXPECT_LT(d.detect("Bonjour").confidence, 0.8);
}

TEST(SamplePersonas, WholeCorpusAndDeterminism) {
  const auto corpus = synthetic::personas(50, 1);
  EXPECT_EQ(sample_personas(corpus, corpus.size(), 99), corpus);
  EXPECT_EQ(sample_personas(corpus, 3, 7), sample_personas(corpus, 3, 7));
  EXPECT_THROW(sample_personas(corpus, 51, 7), ValidationError);
}

TEST(SamplePersonas, OverlapMatchesHypergeometricMean) {
  const auto corpus = synthetic::personas(1000, 2);
  double total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto a = sample_personas(corpus, 500, 2 * s + 1);
    const auto b = sample_personas(corpus, 500, 2 * s + 2);
    std::set<std::string> ids;
    for (const auto& p : a) ids.insert(p.id);
    std::size_t overlap = 0;
    for (const auto& p : b) overlap += ids.count(p.id);
    EXPECT_NEAR(static_cast<double>(overlap), 250.0, 50.0);
    total += static_cast<double>(overlap);
  }
  // Hypergeometric mean 250, sd about 7.9 per pair; the mean of 100 pairs is tight.
  EXPECT_NEAR(total / 100.0, 250.0, 3.0);
}

TEST(ExpandVariants, ArticleToken) {
  const auto v = expand_variants(
      {"130831", "[ATOKEN] political science professor writing their first book about democracy"});
  EXPECT_EQ(v.black.description,
            "A black political science professor writing their first book about democracy");
  EXPECT_EQ(v.conservative.description,
            "A conservative political science professor writing their first book about democracy");
  EXPECT_EQ(v.neutral.description,
            "A political science professor writing their first book about democracy");
  EXPECT_EQ(v.black.id, "130831#black");
  EXPECT_EQ(v.neutral.id, "130831#neutral");
}

TEST(ExpandVariants, BareToken) {
  const auto v = expand_variants(
      {"82521", "An internationally recognized [TOKEN] car restoration expert with a web-based reality show"});
  EXPECT_EQ(v.black.description,
            "An internationally recognized black car restoration expert with a web-based reality show");
  EXPECT_EQ(v.neutral.description,
            "An internationally recognized car restoration expert with a web-based reality show");
}

TEST(ExpandVariants, NeutralRule) {
  const auto v =
      expand_variants({"164597", "[ATOKEN] receptionist at a boutique hotel who hates fake news"});
  EXPECT_EQ(v.neutral.description, "A receptionist at a boutique hotel who hates fake news");
}

TEST(ExpandVariants, RejectsMissingOrUnknownPlaceholders) {
  EXPECT_THROW(expand_variants({"t", "A plain description"}), ValidationError);
  EXPECT_THROW(expand_variants({"t", "A [BTOKEN] thing"}), ValidationError);
}

TEST(PersonaIds, VariantAndBase) {
  EXPECT_EQ(variant_persona_id("t1", "black"), "t1#black");
  EXPECT_EQ(base_persona_id("t1#black"), "t1");
  EXPECT_EQ(base_persona_id("p9"), "p9");
}
