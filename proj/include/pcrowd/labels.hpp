#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pcrowd/common.hpp"

namespace pcrowd {

enum class BinaryLabel { not_toxic = 0, toxic = 1 };

std::string_view to_string(BinaryLabel label);
BinaryLabel parse_binary_label(std::string_view text);

enum class LabelKind { binary, likert5 };

// Ordered legal surface strings for a response.
struct LabelSchema {
  LabelKind kind = LabelKind::binary;
  std::vector<std::string> options;

  static LabelSchema binary();
  static LabelSchema likert5();
};

// One parsed response. Binary: value 1 = TRUE (toxic), 0 = FALSE.
// Likert: value in [1, 5].
struct Label {
  LabelKind kind = LabelKind::binary;
  int value = 0;

  static Label from_binary(BinaryLabel b) {
    return {LabelKind::binary, b == BinaryLabel::toxic ? 1 : 0};
  }
  static Label likert(int v) { return {LabelKind::likert5, v}; }

  // Surface option string: "TRUE"/"FALSE" or "1".."5".
  std::string text() const;
  BinaryLabel as_binary() const;
  int as_likert() const;

  friend bool operator==(const Label&, const Label&) = default;
};

// Inverse of Label::text() for the given schema; throws ValidationError.
Label label_from_text(std::string_view text, LabelKind kind);

}  // namespace pcrowd
