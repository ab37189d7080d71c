#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pcrowd/common.hpp"

namespace pcrowd {

struct Persona {
  std::string id;
  std::string description;

  friend bool operator==(const Persona&, const Persona&) = default;
};

// Neutral persona with `[ATOKEN]` / `[TOKEN]` marker slots.
struct PersonaTemplate {
  std::string id;
  std::string description_with_placeholders;
};

struct PersonaVariantSet {
  std::string template_id;
  Persona neutral;
  Persona black;
  Persona conservative;
};

struct CorpusStats {
  std::size_t total = 0;
  std::size_t retained_after_language_filter = 0;
  std::vector<std::string> removed_ids;
  std::vector<std::string> warnings;
};

enum class PersonaFormat { jsonl, tsv };

// Personas in file order. Throws ValidationError with the line number on
// malformed records and names the id on duplicates.
std::vector<Persona> load_personas(const std::string& path, PersonaFormat format);
std::vector<Persona> parse_personas_jsonl(std::string_view content);
void write_personas_jsonl(const std::string& path, const std::vector<Persona>& personas);

std::vector<PersonaTemplate> load_templates(const std::string& path);
void write_templates_jsonl(const std::string& path, const std::vector<PersonaTemplate>& templates);

struct LanguageGuess {
  std::string language;  // ISO 639-1 tag, "en" for English
  double confidence = 0.0;
};

class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  // May throw; filter_non_english keeps the text and records a warning.
  virtual LanguageGuess detect(std::string_view text) const = 0;
};

// Fraction of word tokens found in a fixed English stopword list. A ratio at
// or above `english_ratio` is reported as "en". Otherwise the text is tagged
// "xx" with confidence growing with the gap to the threshold and with the
// number of tokens, so that very short texts never reach high certainty.
class StopwordLanguageDetector final : public LanguageDetector {
 public:
  explicit StopwordLanguageDetector(double english_ratio = 0.12) : english_ratio_(english_ratio) {}
  LanguageGuess detect(std::string_view text) const override;
  static double stopword_ratio(std::string_view text);

 private:
  double english_ratio_;
};

struct FilterResult {
  std::vector<Persona> retained;
  CorpusStats stats;
};

// Removes only personas the detector labels non-English with confidence at or
// above `certainty_floor`.
FilterResult filter_non_english(const std::vector<Persona>& personas,
                                const LanguageDetector& detector,
                                double certainty_floor = 0.8);

// Uniform sample without replacement, returned in corpus order.
std::vector<Persona> sample_personas(const std::vector<Persona>& personas, std::size_t n,
                                     std::uint64_t seed);

PersonaVariantSet expand_variants(const PersonaTemplate& tmpl);

bool is_english_stopword(std::string_view lowercase_word);

// Variant persona ids are "<template id>#<variant>".
std::string variant_persona_id(std::string_view template_id, std::string_view variant);
// Strips a trailing "#<variant>" suffix, if any.
std::string_view base_persona_id(std::string_view persona_id);

}  // namespace pcrowd
