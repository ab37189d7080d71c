#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcrowd/config.hpp"
#include "pcrowd/crowd.hpp"
#include "pcrowd/embedding_analysis.hpp"
#include "pcrowd/metrics.hpp"
#include "pcrowd/run_store.hpp"
#include "pcrowd/stats.hpp"

namespace pcrowd {

// ---------------------------------------------------------------- annotation plans

struct PlannedRun {
  std::string run_id;
  std::optional<Persona> persona;
  TemplateId template_id = TemplateId::T2;
  std::uint64_t sampling_seed = 0;
};

struct AnnotationPlan {
  std::string experiment;
  std::vector<PlannedRun> runs;
  std::vector<Instance> instances;

  RunManifest manifest(const ExperimentConfig& config) const;
};

struct AnnotateOutcome {
  std::size_t expected = 0;
  std::size_t missing_before = 0;
  std::size_t written = 0;
};

// Counts the (run, instance) pairs the store lacks.
std::size_t count_missing(const AnnotationPlan& plan, const RunStore& store);

// Annotates every pair the store lacks and appends the results in plan
// order. Stored prompts are re-rendered and checked against their hash.
// Throws IoError after the batch if any request failed; successful results
// are kept so a later call resumes where this one stopped.
AnnotateOutcome execute_plan(const ExperimentConfig& config, const AnnotationPlan& plan,
                             RunStore& store, std::ostream* log = nullptr);

// When annotation is disabled, missing pairs raise MissingLabelsError.
struct StudyOptions {
  bool annotate = true;
  std::ostream* log = nullptr;
};

std::string study_path(const ExperimentConfig& config, const std::string& relative);
std::string store_path(const ExperimentConfig& config, int study);

// ---------------------------------------------------------------- study 1

std::vector<Persona> study1_personas(const ExperimentConfig& config);
AnnotationPlan study1_plan(const ExperimentConfig& config);

struct RunScore {
  std::string arm;  // "persona" or "baseline"
  std::string run_id;
  std::optional<std::string> persona_id;
  ClassificationReport report;
};

struct DiversityReport {
  std::vector<RunScore> persona;
  std::vector<RunScore> baseline;
  TestResult levene;
  bool reject = false;
};

DiversityReport study1_diversity(const ExperimentConfig& config, const StudyOptions& opts = {});

struct StabilityEntry {
  std::string stratum;  // lowest, median, highest
  std::string persona_id;
  double first_run_f1 = 0.0;
  std::vector<std::string> repeat_run_ids;
  std::vector<std::uint64_t> repeat_seeds;
  std::vector<double> repeat_f1;
  double mean_repeat_f1 = 0.0;
};

struct StabilityReport {
  std::vector<StabilityEntry> entries;
  CorrelationResult rank_correlation;
};

// Three disjoint strata of stability_strata_size personas each.
std::vector<std::pair<std::string, std::vector<const RunScore*>>> select_strata(
    const DiversityReport& diversity, std::size_t stratum_size);

StabilityReport study1_stability(const ExperimentConfig& config, const DiversityReport& diversity,
                                 const StudyOptions& opts = {});

struct CrowdStudy {
  std::vector<TrajectoryRow> trajectories;   // persona-k and baseline-k, order 0
  std::vector<TrajectoryRow> permutations;   // persona-0 and baseline-0
  CrowdAssignment persona_crowds;
  CrowdAssignment baseline_crowds;
};

CrowdStudy study1_crowds(const ExperimentConfig& config, const StudyOptions& opts = {});

// ---------------------------------------------------------------- study 2

std::vector<Persona> study2_personas(const ExperimentConfig& config);
MultiLabelDataset load_multi_label(const ExperimentConfig& config);
std::vector<PersonaEmbedding> compute_persona_embeddings(const ExperimentConfig& config,
                                                         const std::vector<Persona>& personas);
AnnotationPlan study2_label_plan(const ExperimentConfig& config,
                                 const std::vector<Persona>& personas,
                                 const MultiLabelDataset& dataset);

struct EmbeddingSpaces {
  std::vector<PersonaEmbedding> personas;
  std::vector<LabelVector> labels;
};

EmbeddingSpaces study2_embed(const ExperimentConfig& config, const StudyOptions& opts = {});

struct SpaceClustering {
  std::string space;  // "persona" or "label"
  ClusterAlgorithm algorithm = ClusterAlgorithm::threshold;
  Clustering clustering;
  ClusterDistanceMatrix raw;         // measured in the opposite space
  ClusterDistanceMatrix normalized;  // row min-max
  std::size_t kmeans_iterations = 0;
};

struct DiagonalStats {
  double diagonal_mean = 0.0;
  double off_diagonal_mean = 0.0;
};

DiagonalStats diagonal_stats(const ClusterDistanceMatrix& m);

struct EmbeddingStudy {
  EmbeddingSpaces spaces;
  SpaceClustering persona;
  SpaceClustering label;
  std::vector<PersonaCorrelation> correlations;
  SignificanceSummary summary;
};

// Clustering in both spaces, both cross-space distance matrices and the
// per-persona correlations.
EmbeddingStudy study2_embedding(const ExperimentConfig& config, const StudyOptions& opts = {});

enum class MarkerGroup { black, conservative };
std::string_view to_string(MarkerGroup group);

struct TemplateShift {
  std::string template_id;
  double neutral_level = 0.0;
  double variant_level = 0.0;
  double shift = 0.0;
};

struct GroupMeanShift {
  MarkerGroup group = MarkerGroup::black;
  SubsetTag subset = SubsetTag::aae;
  std::vector<TemplateShift> shifts;
  double mean_shift = 0.0;
  double absolute_level = 0.0;          // mean over instances of the per-instance mean
  double neutral_absolute_level = 0.0;
};

struct MarkerTest {
  std::string comparison;  // "black_vs_neutral", "conservative_vs_neutral", "black_vs_conservative"
  SubsetTag subset = SubsetTag::aae;
  TestResult result;
  bool significant = false;
};

struct DiffTableRow {
  SubsetTag subset = SubsetTag::aae;
  std::size_t rank = 0;
  std::string instance_id;
  std::string text;
  double mu_black = 0.0;
  double mu_conservative = 0.0;
  double diff = 0.0;  // mu_black - mu_conservative
};

struct MarkerStudy {
  std::vector<GroupMeanShift> groups;
  std::vector<MarkerTest> tests;
  std::vector<DiffTableRow> diff_rows;
};

AnnotationPlan study2_marker_plan(const ExperimentConfig& config,
                                  const std::vector<PersonaTemplate>& templates);

MarkerStudy study2_markers(const ExperimentConfig& config,
                           const std::vector<PersonaTemplate>& templates,
                           const StudyOptions& opts = {});

// Pure analysis over stored labels: label[variant persona id][instance id].
using LikertTable = std::unordered_map<std::string, std::unordered_map<std::string, int>>;

MarkerStudy analyze_markers(const std::vector<PersonaVariantSet>& variants,
                            const std::vector<Instance>& instances, const LikertTable& labels,
                            const StatConfig& stats, std::size_t top_k);

std::vector<DiffTableRow> diff_table(const std::vector<PersonaVariantSet>& variants,
                                     const std::vector<Instance>& instances,
                                     const LikertTable& labels, SubsetTag subset,
                                     std::size_t top_k, bool swap_groups = false);

// ---------------------------------------------------------------- artifacts

void write_diversity(const ExperimentConfig& config, const DiversityReport& r);
void write_stability(const ExperimentConfig& config, const StabilityReport& r);
void write_crowds(const ExperimentConfig& config, const CrowdStudy& r);
void write_embeddings(const ExperimentConfig& config, const EmbeddingSpaces& r);
void write_clusters(const ExperimentConfig& config, const EmbeddingStudy& r,
                    const std::vector<Persona>& personas);
void write_correlations(const ExperimentConfig& config, const EmbeddingStudy& r);
void write_markers(const ExperimentConfig& config, const MarkerStudy& r);
void write_difftable(const ExperimentConfig& config, const MarkerStudy& r);

// Summarizes whichever artifacts exist under output_dir into report.md.
std::string write_report(const ExperimentConfig& config);

}  // namespace pcrowd
