#include "pcrowd/prompting.hpp"

#include "pcrowd/common.hpp"

namespace pcrowd {

namespace {

constexpr std::string_view kTemplate1 =
    "<TASK> Your task is to annotate the post shown below for toxicity, taking on the "
    "perspective of the following persona: [persona]. Respond with 'TRUE' if this post seems "
    "toxic/hateful/disrespectful to you and 'FALSE' if this post does not seem "
    "toxic/hateful/disrespectful to you. <POST> [text]. <RESPONSE>";

constexpr std::string_view kTemplate2 =
    "<TASK> Your task is to annotate the post shown below for toxicity. Respond with 'TRUE' if "
    "this post seems toxic/hateful/disrespectful to you and 'FALSE' if this post does not seem "
    "toxic/hateful/disrespectful to you. <POST> [text]. <RESPONSE>";

constexpr std::string_view kTemplate3 =
    "<TASK> Your task is to annotate the post shown below, taking on the perspective of the "
    "following persona: [persona]. Answer the following question on a scale from 1 to 5, where "
    "1 stands for 'Not at all' and 5 stands for 'Very much so'. How toxic/hateful/disrespectful "
    "or offensive does this post seem to you? <POST> [text]. <RESPONSE>";

constexpr std::string_view kPersonaSlot = "[persona]";
constexpr std::string_view kTextSlot = "[text]";

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::T1: return "T1";
    case TemplateId::T2: return "T2";
    case TemplateId::T3: return "T3";
  }
  return "?";
}

TemplateId parse_template_id(std::string_view text) {
  if (text == "T1") return TemplateId::T1;
  if (text == "T2") return TemplateId::T2;
  if (text == "T3") return TemplateId::T3;
  throw ValidationError("unknown template id '" + std::string(text) + "'");
}

std::string_view template_body(TemplateId id) {
  switch (id) {
    case TemplateId::T1: return kTemplate1;
    case TemplateId::T2: return kTemplate2;
    case TemplateId::T3: return kTemplate3;
  }
  return {};
}

LabelSchema schema_for(TemplateId id) {
  return id == TemplateId::T3 ? LabelSchema::likert5() : LabelSchema::binary();
}

RenderedPrompt render(TemplateId template_id, const Persona* persona, const Instance& instance) {
  const bool wants_persona = template_id != TemplateId::T2;
  if (wants_persona && persona == nullptr) {
    throw ValidationError(std::string(to_string(template_id)) + " requires a persona");
  }
  if (!wants_persona && persona != nullptr) {
    throw ValidationError("T2 does not take a persona");
  }

  // Single left-to-right pass so slot-like text inside the persona or the
  // post is never substituted again.
  const std::string_view body = template_body(template_id);
  std::string out;
  out.reserve(body.size() + instance.text.size() + (persona ? persona->description.size() : 0));
  std::size_t pos = 0;
  while (pos < body.size()) {
    if (body.substr(pos, kPersonaSlot.size()) == kPersonaSlot) {
      out += persona->description;
      pos += kPersonaSlot.size();
    } else if (body.substr(pos, kTextSlot.size()) == kTextSlot) {
      out += instance.text;
      pos += kTextSlot.size();
    } else {
      out.push_back(body[pos++]);
    }
  }

  RenderedPrompt prompt;
  prompt.text = std::move(out);
  prompt.schema = schema_for(template_id);
  prompt.provenance.template_id = template_id;
  if (persona) prompt.provenance.persona_id = persona->id;
  prompt.provenance.instance_id = instance.instance_id;
  return prompt;
}

Label parse_response(std::string_view raw, const LabelSchema& schema, bool strict) {
  const std::string trimmed = trim(raw);
  for (const auto& opt : schema.options) {
    if (trimmed == opt) return label_from_text(opt, schema.kind);
  }
  if (!strict) {
    const std::string lowered = to_lower(trimmed);
    const std::string* found = nullptr;
    for (const auto& opt : schema.options) {
      if (lowered.find(to_lower(opt)) != std::string::npos) {
        if (found) {
          throw ResponseParseError(ResponseParseError::Reason::ambiguous,
                                   "ambiguous response '" + trimmed + "'");
        }
        found = &opt;
      }
    }
    if (found) return label_from_text(*found, schema.kind);
  }
  throw ResponseParseError(ResponseParseError::Reason::no_match,
                           "response '" + trimmed + "' matches no option");
}

}  // namespace pcrowd
