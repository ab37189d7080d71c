#include "pcrowd/labels.hpp"

#include "pcrowd/common.hpp"

namespace pcrowd {

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::toxic ? "toxic" : "not_toxic";
}

BinaryLabel parse_binary_label(std::string_view text) {
  if (text == "toxic") return BinaryLabel::toxic;
  if (text == "not_toxic") return BinaryLabel::not_toxic;
  throw ValidationError("invalid binary label '" + std::string(text) + "'");
}

LabelSchema LabelSchema::binary() { return {LabelKind::binary, {"TRUE", "FALSE"}}; }

LabelSchema LabelSchema::likert5() {
  return {LabelKind::likert5, {"1", "2", "3", "4", "5"}};
}

std::string Label::text() const {
  if (kind == LabelKind::binary) return value ? "TRUE" : "FALSE";
  return std::to_string(value);
}

BinaryLabel Label::as_binary() const {
  if (kind != LabelKind::binary) throw ValidationError("label is not binary");
  return value ? BinaryLabel::toxic : BinaryLabel::not_toxic;
}

int Label::as_likert() const {
  if (kind != LabelKind::likert5) throw ValidationError("label is not likert5");
  return value;
}

Label label_from_text(std::string_view text, LabelKind kind) {
  if (kind == LabelKind::binary) {
    if (text == "TRUE") return {LabelKind::binary, 1};
    if (text == "FALSE") return {LabelKind::binary, 0};
  } else if (text.size() == 1 && text[0] >= '1' && text[0] <= '5') {
    return {LabelKind::likert5, text[0] - '0'};
  }
  throw ValidationError("label '" + std::string(text) + "' is not valid for schema");
}

}  // namespace pcrowd
