#include "pcrowd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pcrowd/csv.hpp"

namespace pcrowd {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kBatchChunk = 4096;

std::string padded(std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::uint64_t run_seed(std::uint64_t seed, const std::string& run_id) {
  return combine_seeds(seed, run_id);
}

SingleLabelDataset load_single_label(const ExperimentConfig& c) {
  if (c.data.single_label.empty()) throw ValidationError("data.single_label is not set");
  return load_single_label_jsonl(c.data.single_label);
}

std::vector<Persona> load_corpus(const ExperimentConfig& c) {
  if (c.data.personas.empty()) throw ValidationError("data.personas is not set");
  return load_personas(c.data.personas, c.data.personas_format);
}

// Writable store when annotating; otherwise read-only, and a missing file
// simply means every label is missing.
RunStore open_store(const ExperimentConfig& c, int study, const StudyOptions& opts) {
  const auto path = store_path(c, study);
  if (opts.annotate) {
    fs::create_directories(fs::path(path).parent_path());
    return RunStore(path);
  }
  if (!fs::exists(path)) {
    throw MissingLabelsError("run store " + path + " does not exist; annotate first", {});
  }
  return RunStore::open_read_only(path);
}

std::vector<std::string> run_ids_of(const std::vector<PlannedRun>& runs) {
  std::vector<std::string> ids;
  ids.reserve(runs.size());
  for (const auto& r : runs) ids.push_back(r.run_id);
  return ids;
}

[[noreturn]] void throw_missing(std::vector<RunKey> missing) {
  std::string msg = std::to_string(missing.size()) + " labels missing from the run store";
  for (std::size_t i = 0; i < missing.size() && i < 5; ++i) {
    msg += (i ? ", " : ": ") + missing[i].first + "/" + missing[i].second;
  }
  if (missing.size() > 5) msg += ", ...";
  throw MissingLabelsError(msg, std::move(missing));
}

AnnotateOutcome run_plan(const ExperimentConfig& config, const AnnotationPlan& plan,
                         RunStore& store, std::ostream* log, const SimulatorParams& sim) {
  Annotator annotator(config.backend, make_backend(config.backend, sim));
  AnnotateOutcome outcome;
  outcome.expected = plan.runs.size() * plan.instances.size();

  std::vector<AnnotationRequest> chunk;
  std::size_t failed = 0;
  std::string first_error;

  auto flush = [&] {
    if (chunk.empty()) return;
    annotator.run_batch(chunk, [&](std::size_t i, const AnnotationResult& r) {
      if (!r.ok()) {
        if (failed++ == 0) first_error = r.run_id + "/" + r.provenance.instance_id + ": " + r.error;
        return;
      }
      const auto& req = chunk[i];
      RunRecord rec;
      rec.run_id = r.run_id;
      rec.model = config.backend.model_name;
      rec.persona_id = r.provenance.persona_id;
      rec.template_id = r.provenance.template_id;
      rec.instance_id = r.provenance.instance_id;
      rec.raw = r.raw_response;
      rec.label = *r.label;
      rec.ts = utc_timestamp();
      rec.prompt_hash = prompt_hash(req.prompt.text);
      store.append(rec);
      ++outcome.written;
    });
    chunk.clear();
  };

  for (const auto& run : plan.runs) {
    const Persona* persona = run.persona ? &*run.persona : nullptr;
    for (const auto& inst : plan.instances) {
      RenderedPrompt prompt = render(run.template_id, persona, inst);
      const RunKey key{run.run_id, inst.instance_id};
      if (store.contains(key)) {
        store.check_prompt_hash(key, prompt_hash(prompt.text));
        continue;
      }
      ++outcome.missing_before;
      chunk.push_back({std::move(prompt), run.run_id, run.sampling_seed, run.persona, inst});
      if (chunk.size() >= kBatchChunk) flush();
    }
  }
  if (log) *log << plan.experiment << ": " << outcome.missing_before << " missing of "
                << outcome.expected << "\n";
  flush();
  if (failed > 0) {
    throw IoError(std::to_string(failed) + " annotations failed in " + plan.experiment +
                  " (first: " + first_error + "); rerun to resume");
  }
  return outcome;
}

void ensure_annotated(const ExperimentConfig& c, const AnnotationPlan& plan, RunStore& store,
                      const StudyOptions& opts) {
  if (opts.annotate) execute_plan(c, plan, store, opts.log);
}

std::vector<const Instance*> instances_with(const std::vector<Instance>& instances,
                                            SubsetTag tag) {
  std::vector<const Instance*> out;
  for (const auto& i : instances)
    if (i.has(tag)) out.push_back(&i);
  return out;
}

int likert_at(const LikertTable& t, const std::string& persona_id, const std::string& instance_id) {
  auto p = t.find(persona_id);
  if (p == t.end()) throw ValidationError("no labels for variant persona '" + persona_id + "'");
  auto i = p->second.find(instance_id);
  if (i == p->second.end()) {
    throw ValidationError("no label for " + persona_id + " on instance " + instance_id);
  }
  return i->second;
}

double level(const LikertTable& t, const std::string& persona_id,
             const std::vector<const Instance*>& insts) {
  double s = 0.0;
  for (const auto* i : insts) s += likert_at(t, persona_id, i->instance_id);
  return s / static_cast<double>(insts.size());
}

const Persona& variant_of(const PersonaVariantSet& v, MarkerGroup g) {
  return g == MarkerGroup::black ? v.black : v.conservative;
}

std::string report_cells_header() {
  return "accuracy,precision_0,recall_0,f1_0,precision_1,recall_1,f1_1,mavg_f1,wavg_f1";
}

csv::Row report_cells(const ClassificationReport& r) {
  return {format_double(r.accuracy),         format_double(r.not_toxic.precision),
          format_double(r.not_toxic.recall), format_double(r.not_toxic.f1),
          format_double(r.toxic.precision),  format_double(r.toxic.recall),
          format_double(r.toxic.f1),         format_double(r.macro_avg_f1),
          format_double(r.weighted_avg_f1)};
}

void write_header(std::ostream& out, const std::string& comma_separated) {
  out << comma_separated << '\n';
}

const char* algorithm_name(ClusterAlgorithm a) {
  return a == ClusterAlgorithm::threshold ? "threshold" : "kmeans";
}

}  // namespace

// ---------------------------------------------------------------- plans

RunManifest AnnotationPlan::manifest(const ExperimentConfig& config) const {
  RunManifest m;
  m.experiment = experiment;
  m.config_snapshot = config.snapshot();
  m.run_ids = run_ids_of(runs);
  for (const auto& i : instances) m.instance_ids.push_back(i.instance_id);
  return m;
}

std::size_t count_missing(const AnnotationPlan& plan, const RunStore& store) {
  std::size_t n = 0;
  for (const auto& r : plan.runs)
    for (const auto& i : plan.instances) n += store.contains({r.run_id, i.instance_id}) ? 0 : 1;
  return n;
}

AnnotateOutcome execute_plan(const ExperimentConfig& config, const AnnotationPlan& plan,
                             RunStore& store, std::ostream* log) {
  SimulatorParams sim = config.simulator;
  if (sim.embedding_bias_scale != 0.0) {
    // The linear read-out needs the persona vectors of whoever is annotating.
    // Marker variants share one vector, taken from the first (neutral) one.
    std::vector<Persona> personas;
    for (const auto& r : plan.runs)
      if (r.persona) personas.push_back(*r.persona);
    const auto vectors = compute_persona_embeddings(config, personas);
    for (std::size_t i = 0; i < personas.size(); ++i) {
      sim.persona_vectors.emplace(std::string(base_persona_id(personas[i].id)), vectors[i].vector);
    }
  }
  const auto outcome = run_plan(config, plan, store, log, sim);
  const auto manifest_path = study_path(config, "manifests/" + plan.experiment + ".json");
  fs::create_directories(fs::path(manifest_path).parent_path());
  plan.manifest(config).save(manifest_path);
  return outcome;
}

std::string study_path(const ExperimentConfig& config, const std::string& relative) {
  return (fs::path(config.output_dir) / relative).string();
}

std::string store_path(const ExperimentConfig& config, int study) {
  return study_path(config, "runs_study" + std::to_string(study) + ".jsonl");
}

// ---------------------------------------------------------------- study 1

std::vector<Persona> study1_personas(const ExperimentConfig& config) {
  const auto corpus = load_corpus(config);
  if (corpus.size() < config.study1.n_personas) {
    throw ValidationError("study1.n_personas = " + std::to_string(config.study1.n_personas) +
                          " exceeds the corpus size " + std::to_string(corpus.size()));
  }
  return sample_personas(corpus, config.study1.n_personas, config.seeds.sampling);
}

AnnotationPlan study1_plan(const ExperimentConfig& config) {
  AnnotationPlan plan;
  plan.experiment = "study1";
  for (const auto& li : load_single_label(config).instances) plan.instances.push_back(li.instance);
  for (auto& p : study1_personas(config)) {
    PlannedRun r;
    r.run_id = "s1:persona:" + p.id;
    r.persona = std::move(p);
    r.template_id = TemplateId::T1;
    r.sampling_seed = run_seed(config.seeds.simulator, r.run_id);
    plan.runs.push_back(std::move(r));
  }
  for (std::size_t k = 0; k < config.study1.n_baseline_runs; ++k) {
    PlannedRun r;
    r.run_id = "s1:baseline:" + padded(k, 4);
    r.template_id = TemplateId::T2;
    r.sampling_seed = run_seed(config.seeds.simulator, r.run_id);
    plan.runs.push_back(std::move(r));
  }
  return plan;
}

DiversityReport study1_diversity(const ExperimentConfig& config, const StudyOptions& opts) {
  config.validate();
  const auto plan = study1_plan(config);
  const auto gold = load_single_label(config);
  auto store = open_store(config, 1, opts);
  ensure_annotated(config, plan, store, opts);
  const auto table = build_label_table(store, run_ids_of(plan.runs), gold);

  DiversityReport out;
  std::vector<double> f1_persona, f1_baseline;
  for (const auto& run : plan.runs) {
    RunScore s;
    s.run_id = run.run_id;
    s.report = report(confusion(table.labels(run.run_id), table.gold));
    if (run.persona) {
      s.arm = "persona";
      s.persona_id = run.persona->id;
      f1_persona.push_back(s.report.macro_avg_f1);
      out.persona.push_back(std::move(s));
    } else {
      s.arm = "baseline";
      f1_baseline.push_back(s.report.macro_avg_f1);
      out.baseline.push_back(std::move(s));
    }
  }
  out.levene = levene(f1_persona, f1_baseline, config.stats.levene_center);
  out.reject = out.levene.p_value < config.stats.alpha_variance;
  return out;
}

std::vector<std::pair<std::string, std::vector<const RunScore*>>> select_strata(
    const DiversityReport& diversity, std::size_t s) {
  const std::size_t n = diversity.persona.size();
  if (3 * s > n) {
    throw ValidationError("stability strata need 3 x " + std::to_string(s) +
                          " personas but only " + std::to_string(n) + " persona runs exist");
  }
  std::vector<const RunScore*> ranked;
  for (const auto& r : diversity.persona) ranked.push_back(&r);
  std::sort(ranked.begin(), ranked.end(), [](const RunScore* a, const RunScore* b) {
    if (a->report.macro_avg_f1 != b->report.macro_avg_f1) {
      return a->report.macro_avg_f1 < b->report.macro_avg_f1;
    }
    return *a->persona_id < *b->persona_id;
  });

  std::vector<const RunScore*> low(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(s));
  std::vector<const RunScore*> high(ranked.end() - static_cast<std::ptrdiff_t>(s), ranked.end());

  // Ranks closest to the median rank, outside the two tails.
  const double centre = static_cast<double>(n - 1) / 2.0;
  std::vector<std::size_t> middle;
  for (std::size_t i = s; i < n - s; ++i) middle.push_back(i);
  std::sort(middle.begin(), middle.end(), [&](std::size_t a, std::size_t b) {
    const double da = std::abs(static_cast<double>(a) - centre);
    const double db = std::abs(static_cast<double>(b) - centre);
    if (da != db) return da < db;
    return *ranked[a]->persona_id < *ranked[b]->persona_id;
  });
  middle.resize(s);
  std::sort(middle.begin(), middle.end());
  std::vector<const RunScore*> med;
  for (auto i : middle) med.push_back(ranked[i]);

  return {{"lowest", low}, {"median", med}, {"highest", high}};
}

StabilityReport study1_stability(const ExperimentConfig& config, const DiversityReport& diversity,
                                 const StudyOptions& opts) {
  config.validate();
  const auto strata = select_strata(diversity, config.study1.stability_strata_size);
  std::unordered_map<std::string, Persona> by_id;
  for (auto& p : study1_personas(config)) by_id.emplace(p.id, p);

  AnnotationPlan plan;
  plan.experiment = "study1_stability";
  const auto gold = load_single_label(config);
  for (const auto& li : gold.instances) plan.instances.push_back(li.instance);

  StabilityReport out;
  for (const auto& [name, members] : strata) {
    for (const RunScore* r : members) {
      StabilityEntry e;
      e.stratum = name;
      e.persona_id = *r->persona_id;
      e.first_run_f1 = r->report.macro_avg_f1;
      auto it = by_id.find(e.persona_id);
      if (it == by_id.end()) throw ValidationError("persona '" + e.persona_id + "' not in sample");
      for (std::size_t k = 0; k < config.study1.stability_repeats; ++k) {
        PlannedRun run;
        run.run_id = "s1:stab:" + e.persona_id + ":" + padded(k, 3);
        run.persona = it->second;
        run.template_id = TemplateId::T1;
        run.sampling_seed = run_seed(config.seeds.stability, run.run_id);
        e.repeat_run_ids.push_back(run.run_id);
        e.repeat_seeds.push_back(run.sampling_seed);
        plan.runs.push_back(std::move(run));
      }
      out.entries.push_back(std::move(e));
    }
  }

  auto store = open_store(config, 1, opts);
  ensure_annotated(config, plan, store, opts);
  const auto table = build_label_table(store, run_ids_of(plan.runs), gold);

  std::vector<double> first, repeated;
  for (auto& e : out.entries) {
    for (const auto& id : e.repeat_run_ids) {
      e.repeat_f1.push_back(report(confusion(table.labels(id), table.gold)).macro_avg_f1);
    }
    e.mean_repeat_f1 = mean(e.repeat_f1);
    first.push_back(e.first_run_f1);
    repeated.push_back(e.mean_repeat_f1);
  }
  try {
    out.rank_correlation = spearman(first, repeated);
  } catch (const ValidationError&) {
    out.rank_correlation.defined = false;
    out.rank_correlation.n = first.size();
    out.rank_correlation.rho = std::nan("");
    out.rank_correlation.p_value = std::nan("");
  }
  return out;
}

CrowdStudy study1_crowds(const ExperimentConfig& config, const StudyOptions& opts) {
  config.validate();
  const auto plan = study1_plan(config);
  const auto gold = load_single_label(config);
  auto store = open_store(config, 1, opts);
  ensure_annotated(config, plan, store, opts);

  std::vector<std::string> persona_ids, baseline_ids;
  for (const auto& r : plan.runs) (r.persona ? persona_ids : baseline_ids).push_back(r.run_id);

  CrowdStudy out;
  const auto& p = config.study1;
  out.persona_crowds = partition_runs(persona_ids, p.num_crowds, p.crowd_size, config.seeds.partition);
  out.baseline_crowds = partition_runs(baseline_ids, p.num_crowds, p.crowd_size,
                                       combine_seeds(config.seeds.partition, 1));

  std::vector<std::string> needed;
  for (const auto* a : {&out.persona_crowds, &out.baseline_crowds})
    for (const auto& c : a->crowds) needed.insert(needed.end(), c.begin(), c.end());
  const auto table = build_label_table(store, needed, gold);

  auto add = [&](const std::string& kind, const CrowdAssignment& a) {
    for (std::size_t k = 0; k < a.crowds.size(); ++k) {
      auto rows = to_rows(kind + "-" + std::to_string(k), 0, trajectory(a.crowds[k], table, p.tie_rule));
      out.trajectories.insert(out.trajectories.end(), rows.begin(), rows.end());
    }
  };
  add("persona", out.persona_crowds);
  add("baseline", out.baseline_crowds);

  auto permute = [&](const std::string& crowd_id, const std::vector<std::string>& crowd,
                     std::uint64_t seed) {
    const auto ts = permutation_study(crowd, p.n_permutations, seed, table, p.tie_rule);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      auto rows = to_rows(crowd_id, k, ts[k]);
      out.permutations.insert(out.permutations.end(), rows.begin(), rows.end());
    }
  };
  permute("persona-0", out.persona_crowds.crowds.at(0), config.seeds.permutation);
  permute("baseline-0", out.baseline_crowds.crowds.at(0),
          combine_seeds(config.seeds.permutation, 1));
  return out;
}

// ---------------------------------------------------------------- study 2

std::vector<Persona> study2_personas(const ExperimentConfig& config) {
  auto corpus = load_corpus(config);
  const std::size_t n = config.study2.n_personas;
  if (n == 0 || n == corpus.size()) return corpus;
  if (n > corpus.size()) {
    throw ValidationError("study2.n_personas = " + std::to_string(n) +
                          " exceeds the corpus size " + std::to_string(corpus.size()));
  }
  return sample_personas(corpus, n, config.seeds.sampling);
}

MultiLabelDataset load_multi_label(const ExperimentConfig& config) {
  if (config.data.multi_label.empty()) throw ValidationError("data.multi_label is not set");
  auto ds = load_long_csv(config.data.multi_label);
  std::unordered_map<std::string, double> means;
  for (const auto& li : single_label_from(ds).instances) {
    means.emplace(li.instance.instance_id, *li.instance.human_mean);
  }
  for (auto& inst : ds.instances) {
    auto it = means.find(inst.instance_id);
    if (it != means.end()) inst.human_mean = it->second;
  }
  return ds;
}

std::vector<PersonaEmbedding> compute_persona_embeddings(const ExperimentConfig& config,
                                                         const std::vector<Persona>& personas) {
  if (config.embedding.kind == EmbedderKind::hashing) {
    HashingEmbedder e(config.embedding.dimension);
    return embed_personas(personas, e);
  }
  HttpEmbeddingProvider e(config.embedding.endpoint_url, config.embedding.dimension,
                          config.backend.request_timeout);
  return embed_personas(personas, e);
}

AnnotationPlan study2_label_plan(const ExperimentConfig& config,
                                 const std::vector<Persona>& personas,
                                 const MultiLabelDataset& dataset) {
  AnnotationPlan plan;
  plan.experiment = "study2_labels";
  plan.instances = dataset.instances;
  for (const auto& p : personas) {
    PlannedRun r;
    r.run_id = "s2:label:" + p.id;
    r.persona = p;
    r.template_id = TemplateId::T3;
    r.sampling_seed = run_seed(config.seeds.simulator, r.run_id);
    plan.runs.push_back(std::move(r));
  }
  return plan;
}

EmbeddingSpaces study2_embed(const ExperimentConfig& config, const StudyOptions& opts) {
  config.validate();
  const auto personas = study2_personas(config);
  const auto dataset = load_multi_label(config);
  const auto plan = study2_label_plan(config, personas, dataset);
  auto store = open_store(config, 2, opts);
  ensure_annotated(config, plan, store, opts);

  EmbeddingSpaces out;
  out.personas = compute_persona_embeddings(config, personas);
  std::vector<std::string> ids;
  for (const auto& p : personas) ids.push_back(p.id);
  out.labels = label_vectors(store, ids, dataset);
  return out;
}

DiagonalStats diagonal_stats(const ClusterDistanceMatrix& m) {
  double diag = 0.0, off = 0.0;
  std::size_t nd = 0, no = 0;
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    for (std::size_t j = 0; j < m.values[i].size(); ++j) {
      const double v = m.values[i][j];
      if (!std::isfinite(v)) continue;
      if (i == j) {
        diag += v;
        ++nd;
      } else {
        off += v;
        ++no;
      }
    }
  }
  DiagonalStats s;
  s.diagonal_mean = nd ? diag / static_cast<double>(nd) : std::nan("");
  s.off_diagonal_mean = no ? off / static_cast<double>(no) : std::nan("");
  return s;
}

namespace {

SpaceClustering cluster_space(const std::string& name, std::span<const SpacePoint> points,
                              const VectorLookup& opposite, ClusterAlgorithm algorithm,
                              double threshold, std::size_t min_size, std::size_t k,
                              std::uint64_t seed, std::size_t max_iters) {
  SpaceClustering out;
  out.space = name;
  out.algorithm = algorithm;
  if (algorithm == ClusterAlgorithm::threshold) {
    out.clustering = threshold_cluster(points, threshold, min_size);
  } else {
    auto km = kmeans(points, k, seed, max_iters);
    out.clustering = std::move(km.clustering);
    out.kmeans_iterations = km.iterations;
  }
  out.raw = cluster_distance_matrix(out.clustering, opposite, MatrixNormalization::none);
  out.normalized = cluster_distance_matrix(out.clustering, opposite, MatrixNormalization::row_minmax);
  return out;
}

}  // namespace

EmbeddingStudy study2_embedding(const ExperimentConfig& config, const StudyOptions& opts) {
  EmbeddingStudy out;
  out.spaces = study2_embed(config, opts);
  const auto& s = config.study2;
  const auto persona_lookup = make_lookup(out.spaces.personas);
  const auto label_lookup = make_lookup(out.spaces.labels);
  out.persona = cluster_space("persona", out.spaces.personas, label_lookup, s.persona_algorithm,
                              s.cluster_threshold, s.cluster_min_size, s.persona_kmeans_k,
                              config.seeds.kmeans, s.kmeans_max_iters);
  out.label = cluster_space("label", out.spaces.labels, persona_lookup, s.label_algorithm,
                            s.label_cluster_threshold, s.cluster_min_size, s.label_kmeans_k,
                            combine_seeds(config.seeds.kmeans, 1), s.kmeans_max_iters);
  out.correlations = cross_space_correlations(out.spaces.personas, out.spaces.labels);
  std::vector<CorrelationResult> results;
  for (const auto& c : out.correlations) results.push_back(c.result);
  out.summary = significance_summary(results, config.stats.alpha_shift);
  return out;
}

std::string_view to_string(MarkerGroup group) {
  return group == MarkerGroup::black ? "black" : "conservative";
}

AnnotationPlan study2_marker_plan(const ExperimentConfig& config,
                                  const std::vector<PersonaTemplate>& templates) {
  AnnotationPlan plan;
  plan.experiment = "study2_markers";
  for (const auto& li : load_single_label(config).instances) {
    if (li.instance.has(SubsetTag::aae) || li.instance.has(SubsetTag::anti_black)) {
      plan.instances.push_back(li.instance);
    }
  }
  for (const auto& t : templates) {
    const auto v = expand_variants(t);
    for (const Persona* p : {&v.neutral, &v.black, &v.conservative}) {
      PlannedRun r;
      r.run_id = "s2:marker:" + p->id;
      r.persona = *p;
      r.template_id = TemplateId::T3;
      r.sampling_seed = run_seed(config.seeds.simulator, r.run_id);
      plan.runs.push_back(std::move(r));
    }
  }
  return plan;
}

std::vector<DiffTableRow> diff_table(const std::vector<PersonaVariantSet>& variants,
                                     const std::vector<Instance>& instances,
                                     const LikertTable& labels, SubsetTag subset,
                                     std::size_t top_k, bool swap_groups) {
  if (variants.empty()) throw ValidationError("diff table needs at least one template");
  std::vector<DiffTableRow> rows;
  for (const auto* inst : instances_with(instances, subset)) {
    double b = 0.0, c = 0.0;
    for (const auto& v : variants) {
      b += likert_at(labels, v.black.id, inst->instance_id);
      c += likert_at(labels, v.conservative.id, inst->instance_id);
    }
    DiffTableRow row;
    row.subset = subset;
    row.instance_id = inst->instance_id;
    row.text = inst->text;
    row.mu_black = b / static_cast<double>(variants.size());
    row.mu_conservative = c / static_cast<double>(variants.size());
    if (swap_groups) std::swap(row.mu_black, row.mu_conservative);
    row.diff = row.mu_black - row.mu_conservative;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const DiffTableRow& a, const DiffTableRow& b) {
    const double da = std::abs(a.diff), db = std::abs(b.diff);
    if (da != db) return da > db;
    return a.instance_id < b.instance_id;
  });
  if (rows.size() > top_k) rows.resize(top_k);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

MarkerStudy analyze_markers(const std::vector<PersonaVariantSet>& variants,
                            const std::vector<Instance>& instances, const LikertTable& labels,
                            const StatConfig& stats, std::size_t top_k) {
  if (variants.empty()) throw ValidationError("marker analysis needs at least one template");
  MarkerStudy out;
  for (SubsetTag subset : {SubsetTag::aae, SubsetTag::anti_black}) {
    const auto insts = instances_with(instances, subset);
    if (insts.empty()) {
      throw ValidationError("no instances tagged " + std::string(to_string(subset)));
    }
    std::vector<double> neutral_levels;
    for (const auto& v : variants) neutral_levels.push_back(level(labels, v.neutral.id, insts));

    std::map<MarkerGroup, std::vector<double>> levels, shifts;
    for (MarkerGroup g : {MarkerGroup::black, MarkerGroup::conservative}) {
      GroupMeanShift gm;
      gm.group = g;
      gm.subset = subset;
      for (std::size_t t = 0; t < variants.size(); ++t) {
        TemplateShift ts;
        ts.template_id = variants[t].template_id;
        ts.neutral_level = neutral_levels[t];
        ts.variant_level = level(labels, variant_of(variants[t], g).id, insts);
        ts.shift = ts.variant_level - ts.neutral_level;
        levels[g].push_back(ts.variant_level);
        shifts[g].push_back(ts.shift);
        gm.shifts.push_back(std::move(ts));
      }
      gm.mean_shift = mean(shifts[g]);
      // Per-instance averages over templates, then averaged over instances.
      double abs_sum = 0.0, neutral_sum = 0.0;
      for (const auto* i : insts) {
        double a = 0.0, n = 0.0;
        for (const auto& v : variants) {
          a += likert_at(labels, variant_of(v, g).id, i->instance_id);
          n += likert_at(labels, v.neutral.id, i->instance_id);
        }
        abs_sum += a / static_cast<double>(variants.size());
        neutral_sum += n / static_cast<double>(variants.size());
      }
      gm.absolute_level = abs_sum / static_cast<double>(insts.size());
      gm.neutral_absolute_level = neutral_sum / static_cast<double>(insts.size());
      out.groups.push_back(std::move(gm));
    }

    auto test = [&](std::string name, const std::vector<double>& a, const std::vector<double>& b) {
      MarkerTest t;
      t.comparison = std::move(name);
      t.subset = subset;
      t.result = wilcoxon_rank_sum(a, b, stats.wilcoxon_exact_threshold);
      t.significant = t.result.p_value < stats.alpha_shift;
      out.tests.push_back(std::move(t));
    };
    test("black_vs_neutral", levels[MarkerGroup::black], neutral_levels);
    test("conservative_vs_neutral", levels[MarkerGroup::conservative], neutral_levels);
    test("black_vs_conservative", shifts[MarkerGroup::black], shifts[MarkerGroup::conservative]);

    auto rows = diff_table(variants, instances, labels, subset, top_k);
    out.diff_rows.insert(out.diff_rows.end(), rows.begin(), rows.end());
  }
  return out;
}

MarkerStudy study2_markers(const ExperimentConfig& config,
                           const std::vector<PersonaTemplate>& templates,
                           const StudyOptions& opts) {
  config.validate();
  if (templates.empty()) throw ValidationError("no persona templates given");
  const auto plan = study2_marker_plan(config, templates);
  auto store = open_store(config, 2, opts);
  ensure_annotated(config, plan, store, opts);

  LikertTable labels;
  std::vector<RunKey> missing;
  for (const auto& run : plan.runs) {
    auto& row = labels[run.persona->id];
    for (const auto& inst : plan.instances) {
      const RunKey key{run.run_id, inst.instance_id};
      const RunRecord* rec = store.find(key);
      if (!rec) {
        missing.push_back(key);
        continue;
      }
      row[inst.instance_id] = rec->label.as_likert();
    }
  }
  if (!missing.empty()) throw_missing(std::move(missing));

  std::vector<PersonaVariantSet> variants;
  for (const auto& t : templates) variants.push_back(expand_variants(t));
  return analyze_markers(variants, plan.instances, labels, config.stats, config.study2.top_k_diff);
}

// ---------------------------------------------------------------- artifacts

void write_diversity(const ExperimentConfig& config, const DiversityReport& r) {
  {
    auto out = open_out(study_path(config, "study1/diversity_runs.csv"));
    write_header(out, "arm,run_id,persona_id," + report_cells_header());
    for (const auto* arm : {&r.persona, &r.baseline}) {
      for (const auto& s : *arm) {
        csv::Row row{s.arm, s.run_id, s.persona_id.value_or("")};
        auto cells = report_cells(s.report);
        row.insert(row.end(), cells.begin(), cells.end());
        csv::write_row(out, row);
      }
    }
  }
  auto f1s = [](const std::vector<RunScore>& v) {
    std::vector<double> x;
    for (const auto& s : v) x.push_back(s.report.macro_avg_f1);
    return x;
  };
  const auto p = f1s(r.persona), b = f1s(r.baseline);
  auto out = open_out(study_path(config, "study1/diversity_levene.csv"));
  write_header(out,
               "statistic,p_value,n_persona,n_baseline,center,alpha,reject,"
               "persona_mean,persona_variance,baseline_mean,baseline_variance");
  auto var = [](const std::vector<double>& v) {
    return v.size() > 1 ? sample_variance(v) : std::nan("");
  };
  csv::write_row(out, {format_double(r.levene.statistic), format_double(r.levene.p_value),
                       std::to_string(r.levene.n1), std::to_string(r.levene.n2),
                       config.stats.levene_center == LeveneCenter::mean ? "mean" : "median",
                       format_double(config.stats.alpha_variance), r.reject ? "true" : "false",
                       format_double(mean(p)), format_double(var(p)), format_double(mean(b)),
                       format_double(var(b))});
}

void write_stability(const ExperimentConfig& config, const StabilityReport& r) {
  {
    auto out = open_out(study_path(config, "study1/stability_runs.csv"));
    write_header(out, "stratum,persona_id,first_run_f1,repeat,run_id,sampling_seed,mavg_f1");
    for (const auto& e : r.entries) {
      for (std::size_t k = 0; k < e.repeat_run_ids.size(); ++k) {
        csv::write_row(out, {e.stratum, e.persona_id, format_double(e.first_run_f1),
                             std::to_string(k), e.repeat_run_ids[k],
                             std::to_string(e.repeat_seeds[k]), format_double(e.repeat_f1[k])});
      }
    }
  }
  {
    auto out = open_out(study_path(config, "study1/stability_personas.csv"));
    write_header(out, "stratum,persona_id,first_run_f1,mean_repeat_f1");
    for (const auto& e : r.entries) {
      csv::write_row(out, {e.stratum, e.persona_id, format_double(e.first_run_f1),
                           format_double(e.mean_repeat_f1)});
    }
  }
  auto out = open_out(study_path(config, "study1/stability_summary.csv"));
  write_header(out, "n_personas,repeats,spearman_rho,p_value,defined");
  const auto& c = r.rank_correlation;
  csv::write_row(out, {std::to_string(r.entries.size()), std::to_string(config.study1.stability_repeats),
                       format_double(c.rho), format_double(c.p_value),
                       c.defined ? "true" : "false"});
}

void write_crowds(const ExperimentConfig& config, const CrowdStudy& r) {
  write_trajectory_csv(study_path(config, "study1/crowd_trajectories.csv"), r.trajectories);
  write_trajectory_csv(study_path(config, "study1/crowd_permutations.csv"), r.permutations);
  auto out = open_out(study_path(config, "study1/crowd_membership.csv"));
  write_header(out, "crowd_id,position,run_id");
  for (const auto& [kind, a] : {std::pair{"persona", &r.persona_crowds},
                                std::pair{"baseline", &r.baseline_crowds}}) {
    for (std::size_t k = 0; k < a->crowds.size(); ++k) {
      for (std::size_t i = 0; i < a->crowds[k].size(); ++i) {
        csv::write_row(out, {std::string(kind) + "-" + std::to_string(k), std::to_string(i),
                             a->crowds[k][i]});
      }
    }
  }
}

void write_embeddings(const ExperimentConfig& config, const EmbeddingSpaces& r) {
  fs::create_directories(study_path(config, "study2"));
  write_points_csv(study_path(config, "study2/persona_embeddings.csv"), r.personas);
  write_points_csv(study_path(config, "study2/label_vectors.csv"), r.labels);
}

void write_clusters(const ExperimentConfig& config, const EmbeddingStudy& r,
                    const std::vector<Persona>& personas) {
  fs::create_directories(study_path(config, "study2"));
  for (const SpaceClustering* s : {&r.persona, &r.label}) {
    auto out = open_out(study_path(config, "study2/" + s->space + "_clusters.csv"));
    write_header(out, "cluster_id,persona_id");
    for (const auto& c : s->clustering.clusters)
      for (const auto& m : c.members) csv::write_row(out, {std::to_string(c.cluster_id), m});
    for (const auto& m : s->clustering.unassigned) csv::write_row(out, {"unassigned", m});
    out.close();
    write_matrix_csv(study_path(config, "study2/matrix_" + s->space + "_clusters.csv"), s->normalized);
    write_matrix_csv(study_path(config, "study2/matrix_" + s->space + "_clusters_raw.csv"), s->raw);
  }
  {
    auto out = open_out(study_path(config, "study2/cluster_summary.csv"));
    write_header(out,
                 "space,measured_in,algorithm,n_clusters,retained,unassigned,kmeans_iterations,"
                 "diagonal_mean,off_diagonal_mean,diagonal_minus_off_diagonal");
    for (const SpaceClustering* s : {&r.persona, &r.label}) {
      const auto d = diagonal_stats(s->normalized);
      csv::write_row(out, {s->space, s->space == "persona" ? "label" : "persona",
                           algorithm_name(s->algorithm),
                           std::to_string(s->clustering.clusters.size()),
                           std::to_string(s->clustering.retained()),
                           std::to_string(s->clustering.unassigned.size()),
                           std::to_string(s->kmeans_iterations), format_double(d.diagonal_mean),
                           format_double(d.off_diagonal_mean),
                           format_double(d.diagonal_mean - d.off_diagonal_mean)});
    }
  }
  std::unordered_map<std::string, std::string> descriptions;
  for (const auto& p : personas) descriptions.emplace(p.id, p.description);
  auto out = open_out(study_path(config, "study2/cluster_terms.csv"));
  write_header(out, "space,cluster_id,rank,term,score");
  for (const SpaceClustering* s : {&r.persona, &r.label}) {
    const auto terms = cluster_top_terms(s->clustering, descriptions, config.study2.top_terms);
    for (std::size_t c = 0; c < terms.size(); ++c) {
      for (std::size_t i = 0; i < terms[c].size(); ++i) {
        csv::write_row(out, {s->space, std::to_string(s->clustering.clusters[c].cluster_id),
                             std::to_string(i + 1), terms[c][i].first,
                             format_double(terms[c][i].second)});
      }
    }
  }
}

void write_correlations(const ExperimentConfig& config, const EmbeddingStudy& r) {
  {
    auto out = open_out(study_path(config, "study2/correlations.csv"));
    write_header(out, "persona_id,rho,p_value,n,defined");
    for (const auto& c : r.correlations) {
      csv::write_row(out, {c.persona_id, format_double(c.result.rho),
                           format_double(c.result.p_value), std::to_string(c.result.n),
                           c.result.defined ? "true" : "false"});
    }
  }
  double rho_sum = 0.0;
  std::size_t defined = 0;
  for (const auto& c : r.correlations) {
    if (!c.result.defined) continue;
    rho_sum += c.result.rho;
    ++defined;
  }
  auto out = open_out(study_path(config, "study2/correlation_summary.csv"));
  write_header(out,
               "n_personas,n_defined,alpha,frac_significant,frac_positive_among_significant,"
               "mean_rho");
  const auto& s = r.summary;
  csv::write_row(out, {std::to_string(r.correlations.size()), std::to_string(s.n_defined),
                       format_double(config.stats.alpha_shift), format_double(s.frac_significant),
                       s.frac_positive_among_significant
                           ? format_double(*s.frac_positive_among_significant)
                           : std::string(),
                       defined ? format_double(rho_sum / static_cast<double>(defined))
                               : std::string()});
}

void write_markers(const ExperimentConfig& config, const MarkerStudy& r) {
  {
    auto out = open_out(study_path(config, "study2/marker_shifts.csv"));
    write_header(out, "group,subset,template_id,neutral_level,variant_level,shift");
    for (const auto& g : r.groups) {
      for (const auto& s : g.shifts) {
        csv::write_row(out, {std::string(to_string(g.group)), std::string(to_string(g.subset)),
                             s.template_id, format_double(s.neutral_level),
                             format_double(s.variant_level), format_double(s.shift)});
      }
    }
  }
  {
    auto out = open_out(study_path(config, "study2/marker_groups.csv"));
    write_header(out, "group,subset,n_templates,mean_shift,absolute_level,neutral_absolute_level");
    for (const auto& g : r.groups) {
      csv::write_row(out, {std::string(to_string(g.group)), std::string(to_string(g.subset)),
                           std::to_string(g.shifts.size()), format_double(g.mean_shift),
                           format_double(g.absolute_level),
                           format_double(g.neutral_absolute_level)});
    }
  }
  auto out = open_out(study_path(config, "study2/marker_tests.csv"));
  write_header(out, "comparison,subset,statistic,p_value,n1,n2,method,alpha,significant");
  for (const auto& t : r.tests) {
    csv::write_row(out, {t.comparison, std::string(to_string(t.subset)),
                         format_double(t.result.statistic), format_double(t.result.p_value),
                         std::to_string(t.result.n1), std::to_string(t.result.n2), t.result.method,
                         format_double(config.stats.alpha_shift),
                         t.significant ? "true" : "false"});
  }
}

void write_difftable(const ExperimentConfig& config, const MarkerStudy& r) {
  {
    auto out = open_out(study_path(config, "study2/difftable.csv"));
    write_header(out, "subset,rank,instance_id,mu_black,mu_conservative,diff,text");
    for (const auto& d : r.diff_rows) {
      csv::write_row(out, {std::string(to_string(d.subset)), std::to_string(d.rank),
                           d.instance_id, format_double(d.mu_black),
                           format_double(d.mu_conservative), format_double(d.diff), d.text});
    }
  }
  auto out = open_out(study_path(config, "study2/difftable.md"));
  for (SubsetTag subset : {SubsetTag::aae, SubsetTag::anti_black}) {
    out << "## " << to_string(subset) << "\n\n| Diff | mu_B | mu_C | Instance | Text |\n"
        << "|---:|---:|---:|---|---|\n";
    for (const auto& d : r.diff_rows) {
      if (d.subset != subset) continue;
      std::string text = d.text;
      for (auto& ch : text)
        if (ch == '|' || ch == '\n' || ch == '\r') ch = ' ';
      char buf[96];
      std::snprintf(buf, sizeof buf, "| %+.2f | %.2f | %.2f | ", d.diff, d.mu_black,
                    d.mu_conservative);
      out << buf << d.instance_id << " | " << text << " |\n";
    }
    out << "\n";
  }
}

std::string write_report(const ExperimentConfig& config) {
  static const std::vector<std::pair<std::string, std::string>> kSections = {
      {"Study 1: diversity (Levene)", "study1/diversity_levene.csv"},
      {"Study 1: rank stability", "study1/stability_summary.csv"},
      {"Study 2: clustering", "study2/cluster_summary.csv"},
      {"Study 2: cross-space correlations", "study2/correlation_summary.csv"},
      {"Study 2: marker groups", "study2/marker_groups.csv"},
      {"Study 2: marker tests", "study2/marker_tests.csv"},
      {"Study 2: difference table", "study2/difftable.csv"},
  };
  std::ostringstream md;
  md << "# " << config.name << "\n\n";
  std::size_t found = 0;
  for (const auto& [title, rel] : kSections) {
    const auto path = study_path(config, rel);
    if (!fs::exists(path)) continue;
    ++found;
    const auto t = csv::read_file(path);
    md << "## " << title << "\n\n|";
    for (const auto& h : t.header) md << ' ' << h << " |";
    md << "\n|";
    for (std::size_t i = 0; i < t.header.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& row : t.rows) {
      md << "|";
      for (auto cell : row) {
        for (auto& ch : cell)
          if (ch == '|' || ch == '\n' || ch == '\r') ch = ' ';
        md << ' ' << cell << " |";
      }
      md << "\n";
    }
    md << "\n";
  }
  if (found == 0) throw ValidationError("no study outputs under " + config.output_dir);
  const auto path = study_path(config, "report.md");
  auto out = open_out(path);
  out << md.str();
  return path;
}

}  // namespace pcrowd
