#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pcrowd/labels.hpp"

namespace pcrowd {

enum class SubsetTag { vulgar, anti_black, aae };

std::string_view to_string(SubsetTag tag);
SubsetTag parse_subset_tag(std::string_view text);

struct Instance {
  std::string instance_id;
  std::string text;
  std::set<SubsetTag> subsets;
  // Mean human rating on the 1-5 scale, when known.
  std::optional<double> human_mean;

  bool has(SubsetTag tag) const { return subsets.count(tag) > 0; }
};

struct HumanAnnotation {
  std::string instance_id;
  std::string annotator_id;
  int rating = 0;
};

struct LabeledInstance {
  Instance instance;
  BinaryLabel label = BinaryLabel::not_toxic;
};

struct SingleLabelDataset {
  std::vector<LabeledInstance> instances;

  std::size_t size() const { return instances.size(); }
  std::vector<BinaryLabel> labels() const;
};

// Instance order defines label-space dimensions. Ratings are indexed
// [annotator][instance]; absent cells are std::nullopt.
struct MultiLabelDataset {
  std::vector<Instance> instances;
  std::vector<std::string> annotator_ids;
  std::vector<std::vector<std::optional<int>>> ratings;

  std::size_t num_instances() const { return instances.size(); }
  std::size_t num_annotators() const { return annotator_ids.size(); }
  std::size_t num_annotations() const;
  std::vector<HumanAnnotation> annotations() const;
};

// Mean rating > 2.5 is toxic; exactly 2.5 is not.
BinaryLabel binarize(const std::vector<int>& ratings);

// Long CSV: instance_id, annotator_id, rating, text, subsets (';'-separated).
MultiLabelDataset load_long_csv(const std::string& path);
void write_long_csv(const std::string& path, const MultiLabelDataset& dataset);

// Binarized per-instance labels with human_mean filled in.
SingleLabelDataset single_label_from(const MultiLabelDataset& dataset);

SingleLabelDataset subset(const SingleLabelDataset& dataset, SubsetTag tag);

// JSONL: {instance_id, text, subsets:[...], label:"toxic"|"not_toxic"[, human_mean]}.
SingleLabelDataset load_single_label_jsonl(const std::string& path);
void write_single_label_jsonl(const std::string& path, const SingleLabelDataset& dataset);

}  // namespace pcrowd
