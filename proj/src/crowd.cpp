#include "pcrowd/crowd.hpp"

#include <fstream>
#include <numeric>

#include "pcrowd/common.hpp"
#include "pcrowd/csv.hpp"

namespace pcrowd {

std::string_view to_string(TieMode mode) {
  switch (mode) {
    case TieMode::positive: return "positive";
    case TieMode::negative: return "negative";
    case TieMode::seeded_random: return "seeded_random";
  }
  return "?";
}

TieMode parse_tie_mode(std::string_view text) {
  if (text == "positive") return TieMode::positive;
  if (text == "negative") return TieMode::negative;
  if (text == "seeded_random") return TieMode::seeded_random;
  throw ValidationError("unknown tie rule '" + std::string(text) + "'");
}

BinaryLabel majority_from_counts(std::size_t toxic_votes, std::size_t total, const TieRule& rule,
                                 std::uint64_t tie_context, std::size_t* ties_consulted) {
  if (total == 0) throw ValidationError("majority vote over an empty crowd");
  const std::size_t other = total - toxic_votes;
  if (toxic_votes > other) return BinaryLabel::toxic;
  if (other > toxic_votes) return BinaryLabel::not_toxic;
  if (ties_consulted) ++*ties_consulted;
  switch (rule.mode) {
    case TieMode::positive: return BinaryLabel::toxic;
    case TieMode::negative: return BinaryLabel::not_toxic;
    case TieMode::seeded_random: {
      Rng rng(combine_seeds(rule.seed, tie_context));
      return (rng() & 1U) ? BinaryLabel::toxic : BinaryLabel::not_toxic;
    }
  }
  return BinaryLabel::toxic;
}

BinaryLabel majority_vote(std::span<const BinaryLabel> labels, const TieRule& rule,
                          std::uint64_t tie_context, std::size_t* ties_consulted) {
  std::size_t toxic = 0;
  for (auto l : labels) toxic += l == BinaryLabel::toxic;
  return majority_from_counts(toxic, labels.size(), rule, tie_context, ties_consulted);
}

CrowdAssignment partition_runs(const std::vector<std::string>& run_ids, std::size_t num_crowds,
                               std::size_t crowd_size, std::uint64_t seed) {
  if (num_crowds == 0 || crowd_size == 0) {
    throw ValidationError("partition_runs: crowd count and size must be positive");
  }
  const std::size_t needed = num_crowds * crowd_size;
  if (run_ids.size() < needed) {
    throw ValidationError("partition_runs: need " + std::to_string(needed) + " runs, have " +
                          std::to_string(run_ids.size()));
  }
  std::vector<std::string> pool = run_ids;
  Rng rng(seed);
  for (std::size_t i = 0; i < needed; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  CrowdAssignment out;
  out.crowd_size = crowd_size;
  out.num_crowds = num_crowds;
  for (std::size_t c = 0; c < num_crowds; ++c) {
    out.crowds.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(c * crowd_size),
                            pool.begin() + static_cast<std::ptrdiff_t>((c + 1) * crowd_size));
  }
  return out;
}

const std::vector<BinaryLabel>& LabelTable::labels(const std::string& run_id) const {
  auto it = by_run.find(run_id);
  if (it == by_run.end()) throw ValidationError("no labels for run '" + run_id + "'");
  return it->second;
}

LabelTable build_label_table(const RunStore& store, const std::vector<std::string>& run_ids,
                             const SingleLabelDataset& gold) {
  LabelTable table;
  table.gold = gold.labels();
  std::vector<RunKey> missing;
  for (const auto& run : run_ids) {
    std::vector<BinaryLabel> labels;
    labels.reserve(gold.size());
    for (const auto& li : gold.instances) {
      const RunRecord* r = store.find({run, li.instance.instance_id});
      if (!r || r->label.kind != LabelKind::binary) {
        missing.emplace_back(run, li.instance.instance_id);
        continue;
      }
      labels.push_back(r->label.as_binary());
    }
    table.by_run.emplace(run, std::move(labels));
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " binary labels missing:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
      msg += " (" + missing[i].first + ", " + missing[i].second + ")";
    }
    if (missing.size() > 10) msg += " ...";
    throw MissingLabelsError(msg, std::move(missing));
  }
  return table;
}

Trajectory trajectory(const std::vector<std::string>& crowd_order, const LabelTable& table,
                      const TieRule& rule) {
  const std::size_t n = table.gold.size();
  std::vector<std::size_t> toxic_votes(n, 0);
  std::vector<BinaryLabel> votes(n);
  Trajectory t;
  t.points.reserve(crowd_order.size());
  for (std::size_t s = 0; s < crowd_order.size(); ++s) {
    const auto& labels = table.labels(crowd_order[s]);
    for (std::size_t i = 0; i < n; ++i) {
      toxic_votes[i] += labels[i] == BinaryLabel::toxic;
      votes[i] = majority_from_counts(toxic_votes[i], s + 1, rule, i);
    }
    t.points.push_back({s + 1, report(confusion(votes, table.gold))});
  }
  return t;
}

std::vector<std::vector<std::string>> sample_orders(const std::vector<std::string>& crowd,
                                                    std::size_t n_orders, std::uint64_t seed) {
  std::vector<std::vector<std::string>> orders;
  orders.reserve(n_orders);
  for (std::size_t k = 0; k < n_orders; ++k) {
    std::vector<std::string> order = crowd;
    Rng rng(combine_seeds(seed, k));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_below(rng, i))]);
    }
    orders.push_back(std::move(order));
  }
  return orders;
}

std::vector<Trajectory> permutation_study(const std::vector<std::string>& crowd,
                                          std::size_t n_orders, std::uint64_t seed,
                                          const LabelTable& table, const TieRule& rule) {
  std::vector<Trajectory> out;
  out.reserve(n_orders);
  for (const auto& order : sample_orders(crowd, n_orders, seed)) {
    out.push_back(trajectory(order, table, rule));
  }
  return out;
}

std::vector<TrajectoryRow> to_rows(const std::string& crowd_id, std::size_t order_id,
                                   const Trajectory& t) {
  std::vector<TrajectoryRow> rows;
  rows.reserve(t.points.size());
  for (const auto& p : t.points) rows.push_back({crowd_id, order_id, p.size, p.report});
  return rows;
}

namespace {
const csv::Row kTrajectoryHeader = {"crowd_id",    "order_id",    "size",     "mavg_f1",
                                    "accuracy",    "precision_0", "recall_0", "f1_0",
                                    "precision_1", "recall_1",    "f1_1",     "wavg_f1"};
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  csv::write_row(out, kTrajectoryHeader);
  for (const auto& r : rows) {
    const auto& rep = r.report;
    csv::write_row(out, {r.crowd_id, std::to_string(r.order_id), std::to_string(r.size),
                         format_double(rep.macro_avg_f1), format_double(rep.accuracy),
                         format_double(rep.not_toxic.precision),
                         format_double(rep.not_toxic.recall), format_double(rep.not_toxic.f1),
                         format_double(rep.toxic.precision), format_double(rep.toxic.recall),
                         format_double(rep.toxic.f1), format_double(rep.weighted_avg_f1)});
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  const auto table = csv::read_file(path);
  if (table.header != kTrajectoryHeader) {
    throw ValidationError(path + ": unexpected trajectory CSV header");
  }
  std::vector<TrajectoryRow> rows;
  for (const auto& f : table.rows) {
    TrajectoryRow r;
    r.crowd_id = f[0];
    r.order_id = std::stoul(f[1]);
    r.size = std::stoul(f[2]);
    r.report.macro_avg_f1 = std::stod(f[3]);
    r.report.accuracy = std::stod(f[4]);
    r.report.not_toxic.precision = std::stod(f[5]);
    r.report.not_toxic.recall = std::stod(f[6]);
    r.report.not_toxic.f1 = std::stod(f[7]);
    r.report.toxic.precision = std::stod(f[8]);
    r.report.toxic.recall = std::stod(f[9]);
    r.report.toxic.f1 = std::stod(f[10]);
    r.report.weighted_avg_f1 = std::stod(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace pcrowd
