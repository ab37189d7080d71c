#include "pcrowd/persona_corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pcrowd/common.hpp"

namespace pcrowd {

namespace {

using nlohmann::json;

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open persona file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Persona make_persona(std::string id, std::string description, std::size_t line) {
  if (id.empty()) {
    throw ValidationError("line " + std::to_string(line) + ": empty persona id");
  }
  if (trim(description).empty()) {
    throw ValidationError("line " + std::to_string(line) + ": empty description for persona '" +
                          id + "'");
  }
  return {std::move(id), std::move(description)};
}

std::string id_field(const json& j) {
  const auto& v = j.at("id");
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ValidationError("id must be a string");
}

template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    ++line_no;
    std::string_view line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!trim(line).empty()) fn(line, line_no);
    pos = nl + 1;
  }
}

void reject_duplicates(const std::vector<Persona>& personas) {
  std::unordered_set<std::string> seen;
  for (const auto& p : personas) {
    if (!seen.insert(p.id).second) {
      throw ValidationError("duplicate persona id '" + p.id + "'");
    }
  }
}

const std::unordered_set<std::string>& english_stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",     "about", "above", "after", "again", "against", "all",   "am",    "an",
      "and",   "any",   "are",   "as",    "at",    "be",      "been",  "before", "being",
      "below", "between", "both", "but",  "by",    "can",     "could", "did",   "do",
      "does",  "doing", "down",  "during", "each", "few",     "for",   "from",  "further",
      "had",   "has",   "have",  "having", "he",   "her",     "here",  "hers",  "him",
      "his",   "how",   "i",     "if",    "in",    "into",    "is",    "it",    "its",
      "just",  "me",    "more",  "most",  "my",    "no",      "nor",   "not",   "now",
      "of",    "off",   "on",    "once",  "only",  "or",      "other", "our",   "out",
      "over",  "own",   "same",  "she",   "should", "so",     "some",  "such",  "than",
      "that",  "the",   "their", "them",  "then",  "there",   "these", "they",  "this",
      "those", "through", "to",  "too",   "under", "until",   "up",    "very",  "was",
      "we",    "were",  "what",  "when",  "where", "which",   "while", "who",   "whom",
      "why",   "will",  "with",  "would", "you",   "your"};
  return words;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalpha(uc) || c == '\'' || uc >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

bool sentence_initial(const std::string& before) {
  std::size_t e = before.size();
  while (e > 0 && std::isspace(static_cast<unsigned char>(before[e - 1]))) --e;
  if (e == 0) return true;
  char last = before[e - 1];
  return last == '.' || last == '!' || last == '?';
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string substitute(std::string_view text, std::string_view a_word, std::string_view word) {
  static constexpr std::string_view kA = "[ATOKEN]";
  static constexpr std::string_view kT = "[TOKEN]";
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text.substr(pos, kA.size()) == kA) {
      std::string repl(a_word);
      out += sentence_initial(out) ? capitalize(repl) : repl;
      pos += kA.size();
    } else if (text.substr(pos, kT.size()) == kT) {
      std::string repl(word);
      out += (sentence_initial(out) && !repl.empty()) ? capitalize(repl) : repl;
      pos += kT.size();
    } else {
      out.push_back(text[pos]);
      ++pos;
    }
  }
  return out;
}

}  // namespace

std::vector<Persona> parse_personas_jsonl(std::string_view content) {
  std::vector<Persona> personas;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    json j;
    try {
      j = json::parse(line);
      personas.push_back(
          make_persona(id_field(j), j.at("description").get<std::string>(), line_no));
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  reject_duplicates(personas);
  return personas;
}

std::vector<Persona> load_personas(const std::string& path, PersonaFormat format) {
  const std::string content = read_all(path);
  if (format == PersonaFormat::jsonl) return parse_personas_jsonl(content);

  std::vector<Persona> personas;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected id<TAB>description");
    }
    std::string id(line.substr(0, tab));
    std::string desc(line.substr(tab + 1));
    if (line_no == 1 && id == "id" && desc == "description") return;
    personas.push_back(make_persona(std::move(id), std::move(desc), line_no));
  });
  reject_duplicates(personas);
  return personas;
}

void write_personas_jsonl(const std::string& path, const std::vector<Persona>& personas) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& p : personas) {
    out << json{{"id", p.id}, {"description", p.description}}.dump() << '\n';
  }
}

std::vector<PersonaTemplate> load_templates(const std::string& path) {
  const std::string content = read_all(path);
  std::vector<PersonaTemplate> templates;
  std::unordered_set<std::string> seen;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    try {
      json j = json::parse(line);
      PersonaTemplate t{id_field(j), j.at("description").get<std::string>()};
      if (!seen.insert(t.id).second) {
        throw ValidationError("duplicate template id '" + t.id + "'");
      }
      templates.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  return templates;
}

void write_templates_jsonl(const std::string& path,
                           const std::vector<PersonaTemplate>& templates) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& t : templates) {
    out << json{{"id", t.id}, {"description", t.description_with_placeholders},
                {"placeholders", true}}
               .dump()
        << '\n';
  }
}

double StopwordLanguageDetector::stopword_ratio(std::string_view text) {
  auto tokens = word_tokens(text);
  if (tokens.empty()) return 0.0;
  const auto& stop = english_stopwords();
  auto hits = std::count_if(tokens.begin(), tokens.end(),
                            [&](const std::string& t) { return stop.count(t) > 0; });
  return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

LanguageGuess StopwordLanguageDetector::detect(std::string_view text) const {
  const auto n_tokens = word_tokens(text).size();
  const double ratio = stopword_ratio(text);
  if (ratio >= english_ratio_) {
    return {"en", std::min(1.0, 0.5 + ratio)};
  }
  const double gap = 1.0 - ratio / english_ratio_;
  const double length_factor = std::min(1.0, static_cast<double>(n_tokens) / 6.0);
  return {"xx", gap * length_factor};
}

FilterResult filter_non_english(const std::vector<Persona>& personas,
                                const LanguageDetector& detector, double certainty_floor) {
  FilterResult result;
  result.stats.total = personas.size();
  for (const auto& p : personas) {
    LanguageGuess guess;
    try {
      guess = detector.detect(p.description);
    } catch (const std::exception& e) {
      result.stats.warnings.push_back("detector failed on '" + p.id + "': " + e.what());
      result.retained.push_back(p);
      continue;
    }
    if (guess.language != "en" && guess.confidence >= certainty_floor) {
      result.stats.removed_ids.push_back(p.id);
    } else {
      result.retained.push_back(p);
    }
  }
  result.stats.retained_after_language_filter = result.retained.size();
  return result;
}

std::vector<Persona> sample_personas(const std::vector<Persona>& personas, std::size_t n,
                                     std::uint64_t seed) {
  if (n > personas.size()) {
    throw ValidationError("cannot sample " + std::to_string(n) + " personas from a corpus of " +
                          std::to_string(personas.size()));
  }
  std::vector<std::size_t> idx(personas.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots are a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_below(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<Persona> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(personas[i]);
  return out;
}

PersonaVariantSet expand_variants(const PersonaTemplate& tmpl) {
  const std::string& text = tmpl.description_with_placeholders;
  static const std::regex slot_like(R"(\[[A-Za-z_]*[Tt][Oo][Kk][Ee][Nn][A-Za-z_]*\])");
  bool any = false;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), slot_like);
       it != std::sregex_iterator(); ++it) {
    const std::string m = it->str();
    if (m != "[ATOKEN]" && m != "[TOKEN]") {
      throw ValidationError("template '" + tmpl.id + "': malformed placeholder " + m);
    }
    any = true;
  }
  if (!any) {
    throw ValidationError("template '" + tmpl.id + "' contains no [ATOKEN]/[TOKEN] placeholder");
  }

  PersonaVariantSet set;
  set.template_id = tmpl.id;
  set.neutral = {variant_persona_id(tmpl.id, "neutral"),
                 collapse_whitespace(substitute(text, "a", ""))};
  set.black = {variant_persona_id(tmpl.id, "black"),
               collapse_whitespace(substitute(text, "a black", "black"))};
  set.conservative = {variant_persona_id(tmpl.id, "conservative"),
                      collapse_whitespace(substitute(text, "a conservative", "conservative"))};
  return set;
}

bool is_english_stopword(std::string_view lowercase_word) {
  return english_stopwords().count(std::string(lowercase_word)) > 0;
}

std::string variant_persona_id(std::string_view template_id, std::string_view variant) {
  std::string id(template_id);
  id += '#';
  id += variant;
  return id;
}

std::string_view base_persona_id(std::string_view persona_id) {
  auto hash = persona_id.rfind('#');
  if (hash == std::string_view::npos) return persona_id;
  return persona_id.substr(0, hash);
}

}  // namespace pcrowd
