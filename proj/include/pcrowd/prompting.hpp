#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pcrowd/datasets.hpp"
#include "pcrowd/labels.hpp"
#include "pcrowd/persona_corpus.hpp"

namespace pcrowd {

// T1: binary with persona. T2: binary without persona. T3: Likert with persona.
enum class TemplateId { T1, T2, T3 };

std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view text);

// Verbatim template body with `[persona]` and/or `[text]` slots.
std::string_view template_body(TemplateId id);
LabelSchema schema_for(TemplateId id);

struct PromptProvenance {
  TemplateId template_id = TemplateId::T2;
  std::optional<std::string> persona_id;
  std::string instance_id;
};

struct RenderedPrompt {
  std::string text;
  LabelSchema schema;
  PromptProvenance provenance;
};

// Literal slot substitution. T1/T3 require a persona, T2 forbids one.
RenderedPrompt render(TemplateId template_id, const Persona* persona, const Instance& instance);

// Retry-eligible response that matched no option, or more than one.
class ResponseParseError : public std::runtime_error {
 public:
  enum class Reason { no_match, ambiguous };
  ResponseParseError(Reason reason, const std::string& what)
      : std::runtime_error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

// Exact match after trimming; unless `strict`, falls back to a single
// unambiguous case-insensitive substring match.
Label parse_response(std::string_view raw, const LabelSchema& schema, bool strict = false);

}  // namespace pcrowd
