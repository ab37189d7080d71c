#include "pcrowd/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcrowd/config.hpp"
#include "pcrowd/experiments.hpp"
#include "pcrowd/synthetic.hpp"

namespace pcrowd {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string backend;
  bool no_annotate = false;
};

void add_common(CLI::App* sub, CommonFlags& f, bool with_annotate) {
  sub->add_option("-c,--config", f.config_path, "Experiment config file")->required();
  sub->add_option("--set", f.overrides, "Override a setting, section.key=value");
  sub->add_option("--backend", f.backend, "Backend kind: simulator or http");
  if (with_annotate) {
    sub->add_flag("--no-annotate", f.no_annotate,
                  "Fail on missing labels instead of annotating them");
  }
}

ExperimentConfig load(const CommonFlags& f) {
  auto config = load_config(f.config_path);
  for (const auto& o : f.overrides) apply_override(config, o);
  if (!f.backend.empty()) config.backend.kind = parse_backend_kind(f.backend);
  config.validate();
  return config;
}

std::vector<PersonaTemplate> load_templates_of(const ExperimentConfig& c) {
  if (c.data.templates.empty()) throw ValidationError("data.templates is not set");
  return load_templates(c.data.templates);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

struct DemoFlags {
  std::string out_dir = "demo";
  std::size_t personas = 600;
  std::size_t instances = 120;
  std::size_t ml_instances = 60;
  std::size_t annotators = 40;
  std::size_t templates = 24;
  std::uint64_t seed = 7;
};

void write_demo(const DemoFlags& d, std::ostream& out) {
  fs::create_directories(d.out_dir);
  const fs::path dir(d.out_dir);
  write_personas_jsonl((dir / "personas.jsonl").string(),
                       synthetic::personas(d.personas, combine_seeds(d.seed, 1)));
  write_single_label_jsonl((dir / "single_label.jsonl").string(),
                           synthetic::single_label(d.instances, combine_seeds(d.seed, 2)));
  write_long_csv((dir / "multi_label.csv").string(),
                 synthetic::multi_label(d.ml_instances, d.annotators, combine_seeds(d.seed, 3)));
  write_templates_jsonl((dir / "templates.jsonl").string(),
                        synthetic::templates(d.templates, combine_seeds(d.seed, 4)));
  write_text((dir / "config.ini").string(),
             "# Desk-scale demo configuration for the simulator backend.\n"
             "[experiment]\n"
             "name = demo\n"
             "output_dir = out\n"
             "\n"
             "[data]\n"
             "personas = personas.jsonl\n"
             "single_label = single_label.jsonl\n"
             "multi_label = multi_label.csv\n"
             "templates = templates.jsonl\n"
             "\n"
             "[backend]\n"
             "kind = simulator\n"
             "model_name = simulator\n"
             "\n"
             "[simulator]\n"
             "persona_bias_scale = 0.8\n"
             "noise_scale = 0.3\n"
             "group_effects = black:aae=-1.0\n"
             "embedding_bias_scale = 0.5\n"
             "\n"
             "[study1]\n"
             "n_personas = 60\n"
             "n_baseline_runs = 60\n"
             "stability_strata_size = 5\n"
             "stability_repeats = 5\n"
             "num_crowds = 3\n"
             "crowd_size = 20\n"
             "n_permutations = 50\n"
             "\n"
             "[study2]\n"
             "n_personas = 300\n"
             "cluster_min_size = 5\n"
             "label_kmeans_k = 5\n");
  out << "wrote demo data and config.ini to " << d.out_dir << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Persona-prompted annotation crowds: annotate, aggregate and analyze", "pcrowd"};
  app.require_subcommand(1);

  CommonFlags common;
  std::function<void()> action;
  auto on = [&](CLI::App* sub, std::function<void()> fn) {
    sub->callback([&action, fn = std::move(fn)] { action = fn; });
  };

  // personas
  auto* personas = app.add_subcommand("personas", "Persona corpus utilities");
  personas->require_subcommand(1);
  std::string personas_out;
  double certainty_floor = 0.8;
  std::size_t sample_n = 0;

  auto* clean = personas->add_subcommand("clean", "Drop clearly non-English personas");
  add_common(clean, common, false);
  clean->add_option("--out", personas_out, "Output JSONL")->required();
  clean->add_option("--certainty-floor", certainty_floor, "Minimum detector confidence to drop");
  on(clean, [&] {
    const auto c = load(common);
    const auto corpus = load_personas(c.data.personas, c.data.personas_format);
    const auto r = filter_non_english(corpus, StopwordLanguageDetector(), certainty_floor);
    write_personas_jsonl(personas_out, r.retained);
    for (const auto& w : r.stats.warnings) err << "warning: " << w << "\n";
    out << "kept " << r.stats.retained_after_language_filter << " of " << r.stats.total
        << " personas (" << r.stats.removed_ids.size() << " removed)\n";
  });

  auto* sample = personas->add_subcommand("sample", "Seeded sample of the corpus");
  add_common(sample, common, false);
  sample->add_option("--out", personas_out, "Output JSONL")->required();
  sample->add_option("-n", sample_n, "Sample size (default study1.n_personas)");
  on(sample, [&] {
    auto c = load(common);
    if (sample_n > 0) c.study1.n_personas = sample_n;
    const auto s = study1_personas(c);
    write_personas_jsonl(personas_out, s);
    out << "sampled " << s.size() << " personas\n";
  });

  auto* variants = personas->add_subcommand("variants", "Expand templates into marker variants");
  add_common(variants, common, false);
  variants->add_option("--out", personas_out, "Output JSONL")->required();
  on(variants, [&] {
    const auto c = load(common);
    std::vector<Persona> all;
    for (const auto& t : load_templates_of(c)) {
      const auto v = expand_variants(t);
      all.insert(all.end(), {v.neutral, v.black, v.conservative});
    }
    write_personas_jsonl(personas_out, all);
    out << "wrote " << all.size() << " variant personas\n";
  });

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Fill the run stores for a study");
  add_common(annotate, common, false);
  std::string study = "all";
  bool resume = false;
  annotate->add_option("--study", study, "1, 2 or all")->check(CLI::IsMember({"1", "2", "all"}));
  annotate->add_flag("--resume", resume, "Continue into a non-empty run store");
  on(annotate, [&] {
    const auto c = load(common);
    struct Job {
      int study;
      AnnotationPlan plan;
    };
    std::vector<Job> jobs;
    if (study != "2") jobs.push_back({1, study1_plan(c)});
    if (study != "1") {
      const auto personas = study2_personas(c);
      jobs.push_back({2, study2_label_plan(c, personas, load_multi_label(c))});
      if (!c.data.templates.empty()) {
        jobs.push_back({2, study2_marker_plan(c, load_templates_of(c))});
      }
    }
    if (!resume) {
      for (int s : {1, 2}) {
        const auto path = store_path(c, s);
        if (fs::exists(path) && fs::file_size(path) > 0) {
          throw ValidationError("run store " + path + " is not empty; pass --resume to continue");
        }
      }
    }
    std::size_t written = 0;
    for (auto& job : jobs) {
      fs::create_directories(c.output_dir);
      RunStore store(store_path(c, job.study));
      written += execute_plan(c, job.plan, store, &out).written;
    }
    out << "annotated " << written << " pairs\n";
  });

  // study1
  auto* study1 = app.add_subcommand("study1", "Label diversity, stability and crowds");
  study1->require_subcommand(1);
  auto opts = [&] {
    StudyOptions o;
    o.annotate = !common.no_annotate;
    o.log = &err;
    return o;
  };

  auto* diversity = study1->add_subcommand("diversity", "Per-run macro-F1 and Levene test");
  add_common(diversity, common, true);
  on(diversity, [&] {
    const auto c = load(common);
    const auto r = study1_diversity(c, opts());
    write_diversity(c, r);
    out << "levene W=" << format_double(r.levene.statistic)
        << " p=" << format_double(r.levene.p_value) << "\n";
  });

  auto* stability = study1->add_subcommand("stability", "Rank stability over repeated runs");
  add_common(stability, common, true);
  on(stability, [&] {
    const auto c = load(common);
    const auto d = study1_diversity(c, opts());
    const auto r = study1_stability(c, d, opts());
    write_stability(c, r);
    out << "spearman rho=" << format_double(r.rank_correlation.rho) << "\n";
  });

  auto* crowds = study1->add_subcommand("crowds", "Majority-vote crowd trajectories");
  add_common(crowds, common, true);
  on(crowds, [&] {
    const auto c = load(common);
    const auto r = study1_crowds(c, opts());
    write_crowds(c, r);
    out << "wrote " << r.trajectories.size() << " trajectory and " << r.permutations.size()
        << " permutation rows\n";
  });

  // study2
  auto* study2 = app.add_subcommand("study2", "Embedding spaces and marker effects");
  study2->require_subcommand(1);

  auto* embed = study2->add_subcommand("embed", "Persona embeddings and label vectors");
  add_common(embed, common, true);
  on(embed, [&] {
    const auto c = load(common);
    const auto r = study2_embed(c, opts());
    write_embeddings(c, r);
    out << "wrote " << r.personas.size() << " persona embeddings and " << r.labels.size()
        << " label vectors\n";
  });

  auto* cluster = study2->add_subcommand("cluster", "Cluster both spaces, cross distance matrices");
  add_common(cluster, common, true);
  on(cluster, [&] {
    const auto c = load(common);
    const auto r = study2_embedding(c, opts());
    write_clusters(c, r, study2_personas(c));
    out << r.persona.clustering.clusters.size() << " persona clusters, "
        << r.label.clustering.clusters.size() << " label clusters\n";
  });

  auto* correlate = study2->add_subcommand("correlate", "Per-persona cross-space Spearman");
  add_common(correlate, common, true);
  on(correlate, [&] {
    const auto c = load(common);
    EmbeddingStudy r;
    r.spaces = study2_embed(c, opts());
    r.correlations = cross_space_correlations(r.spaces.personas, r.spaces.labels);
    std::vector<CorrelationResult> results;
    for (const auto& x : r.correlations) results.push_back(x.result);
    r.summary = significance_summary(results, c.stats.alpha_shift);
    write_correlations(c, r);
    out << "frac_significant=" << format_double(r.summary.frac_significant) << "\n";
  });

  auto* markers = study2->add_subcommand("markers", "Marker shifts and Wilcoxon tests");
  add_common(markers, common, true);
  on(markers, [&] {
    const auto c = load(common);
    const auto r = study2_markers(c, load_templates_of(c), opts());
    write_markers(c, r);
    write_difftable(c, r);
    for (const auto& g : r.groups) {
      out << to_string(g.group) << "/" << to_string(g.subset)
          << " mean shift " << format_double(g.mean_shift) << "\n";
    }
  });

  auto* difftable = study2->add_subcommand("difftable", "Top instances by black-conservative gap");
  add_common(difftable, common, true);
  on(difftable, [&] {
    const auto c = load(common);
    const auto r = study2_markers(c, load_templates_of(c), opts());
    write_difftable(c, r);
    out << "wrote " << r.diff_rows.size() << " diff rows\n";
  });

  // report
  auto* report_cmd = app.add_subcommand("report", "Collect study summaries into report.md");
  add_common(report_cmd, common, false);
  on(report_cmd, [&] {
    const auto c = load(common);
    out << "wrote " << write_report(c) << "\n";
  });

  // demo-data
  DemoFlags demo;
  auto* demo_cmd = app.add_subcommand("demo-data", "Write a synthetic corpus and config");
  demo_cmd->add_option("--out", demo.out_dir, "Output directory");
  demo_cmd->add_option("--personas", demo.personas, "Persona count");
  demo_cmd->add_option("--instances", demo.instances, "Single-label instances");
  demo_cmd->add_option("--ml-instances", demo.ml_instances, "Multi-label instances");
  demo_cmd->add_option("--annotators", demo.annotators, "Multi-label annotators");
  demo_cmd->add_option("--templates", demo.templates, "Persona templates");
  demo_cmd->add_option("--seed", demo.seed, "Generator seed");
  on(demo_cmd, [&] { write_demo(demo, out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace pcrowd
