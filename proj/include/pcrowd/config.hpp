#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcrowd/annotator_backend.hpp"
#include "pcrowd/crowd.hpp"
#include "pcrowd/persona_corpus.hpp"
#include "pcrowd/stats.hpp"

namespace pcrowd {

enum class ClusterAlgorithm { threshold, kmeans };
enum class EmbedderKind { hashing, http };

struct Seeds {
  std::uint64_t sampling = 1;
  std::uint64_t partition = 2;
  std::uint64_t permutation = 3;
  std::uint64_t simulator = 4;
  std::uint64_t kmeans = 5;
  std::uint64_t stability = 6;
};

struct DataPaths {
  std::string personas;
  PersonaFormat personas_format = PersonaFormat::jsonl;
  std::string single_label;  // JSONL with gold labels
  std::string multi_label;   // long CSV
  std::string templates;     // JSONL persona templates
};

struct EmbeddingConfig {
  EmbedderKind kind = EmbedderKind::hashing;
  std::string endpoint_url;
  std::size_t dimension = 384;
};

struct Study1Params {
  std::size_t n_personas = 1000;
  std::size_t n_baseline_runs = 1000;
  std::size_t stability_strata_size = 30;
  std::size_t stability_repeats = 30;
  std::size_t num_crowds = 10;
  std::size_t crowd_size = 100;
  std::size_t n_permutations = 1000;
  TieRule tie_rule;
};

struct Study2Params {
  std::size_t n_personas = 0;  // 0 = whole corpus
  ClusterAlgorithm persona_algorithm = ClusterAlgorithm::threshold;
  ClusterAlgorithm label_algorithm = ClusterAlgorithm::kmeans;
  double cluster_threshold = 0.6;
  std::size_t cluster_min_size = 25;
  std::size_t label_kmeans_k = 11;
  std::size_t persona_kmeans_k = 11;
  double label_cluster_threshold = 0.6;
  std::size_t kmeans_max_iters = 300;
  std::size_t top_k_diff = 3;
  std::size_t top_terms = 5;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir = "out";
  DataPaths data;
  BackendConfig backend;
  SimulatorParams simulator;
  EmbeddingConfig embedding;
  Seeds seeds;
  Study1Params study1;
  Study2Params study2;
  StatConfig stats;

  void validate() const;
  nlohmann::json snapshot() const;
};

// INI-style text: `[section]` headers, `key = value` lines, `#` or `;`
// comments, optional double quotes around values. Relative data paths are
// resolved against the config file's directory.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = "");

// Applies one "section.key=value" override.
void apply_override(ExperimentConfig& config, const std::string& assignment);

// Sets a single setting by section and key; unknown keys are rejected.
void set_value(ExperimentConfig& config, const std::string& section, const std::string& key,
               const std::string& value, const std::string& base_dir = "");

// "black:aae=-1.0, conservative:anti_black=0.5"
std::map<std::string, std::map<SubsetTag, double>> parse_group_effects(const std::string& text);

}  // namespace pcrowd
