#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcrowd/datasets.hpp"
#include "pcrowd/metrics.hpp"
#include "pcrowd/run_store.hpp"

namespace pcrowd {

enum class TieMode { positive, negative, seeded_random };

std::string_view to_string(TieMode mode);
TieMode parse_tie_mode(std::string_view text);

struct TieRule {
  TieMode mode = TieMode::positive;
  std::uint64_t seed = 0;  // seeded_random only
};

// Strict majority wins; an exact tie goes to the rule. `tie_context`
// distinguishes independent random tie draws (e.g. the instance index).
// `ties_consulted`, when given, is incremented whenever the rule decides.
BinaryLabel majority_vote(std::span<const BinaryLabel> labels, const TieRule& rule,
                          std::uint64_t tie_context = 0, std::size_t* ties_consulted = nullptr);

// Same decision from pre-aggregated counts.
BinaryLabel majority_from_counts(std::size_t toxic_votes, std::size_t total, const TieRule& rule,
                                 std::uint64_t tie_context = 0,
                                 std::size_t* ties_consulted = nullptr);

struct CrowdAssignment {
  std::vector<std::vector<std::string>> crowds;
  std::size_t crowd_size = 0;
  std::size_t num_crowds = 0;
};

CrowdAssignment partition_runs(const std::vector<std::string>& run_ids, std::size_t num_crowds,
                               std::size_t crowd_size, std::uint64_t seed);

// Binary labels per run, aligned with a gold dataset's instance order.
struct LabelTable {
  std::vector<BinaryLabel> gold;
  std::unordered_map<std::string, std::vector<BinaryLabel>> by_run;

  const std::vector<BinaryLabel>& labels(const std::string& run_id) const;
};

class MissingLabelsError : public ValidationError {
 public:
  MissingLabelsError(const std::string& what, std::vector<RunKey> missing)
      : ValidationError(what), missing_(std::move(missing)) {}
  const std::vector<RunKey>& missing() const { return missing_; }

 private:
  std::vector<RunKey> missing_;
};

// Throws MissingLabelsError enumerating every absent (run, instance) key.
LabelTable build_label_table(const RunStore& store, const std::vector<std::string>& run_ids,
                             const SingleLabelDataset& gold);

struct TrajectoryPoint {
  std::size_t size = 0;
  ClassificationReport report;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;  // sizes 1..S
};

// Prefix majority votes over `crowd_order`, each scored against gold.
Trajectory trajectory(const std::vector<std::string>& crowd_order, const LabelTable& table,
                      const TieRule& rule);

std::vector<std::vector<std::string>> sample_orders(const std::vector<std::string>& crowd,
                                                    std::size_t n_orders, std::uint64_t seed);

std::vector<Trajectory> permutation_study(const std::vector<std::string>& crowd,
                                          std::size_t n_orders, std::uint64_t seed,
                                          const LabelTable& table, const TieRule& rule);

struct TrajectoryRow {
  std::string crowd_id;
  std::size_t order_id = 0;
  std::size_t size = 0;
  ClassificationReport report;
};

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

std::vector<TrajectoryRow> to_rows(const std::string& crowd_id, std::size_t order_id,
                                   const Trajectory& t);

}  // namespace pcrowd
