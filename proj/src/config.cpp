#include "pcrowd/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace pcrowd {

namespace fs = std::filesystem;

namespace {

std::string unquote(std::string v) {
  v = trim(v);
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    v = v.substr(1, v.size() - 2);
  }
  return v;
}

std::string where(const std::string& section, const std::string& key) {
  return section + "." + key;
}

std::uint64_t to_u64(const std::string& v, const std::string& at) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ValidationError(at + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& v, const std::string& at) {
  return static_cast<std::size_t>(to_u64(v, at));
}

int to_int(const std::string& v, const std::string& at) {
  int out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ValidationError(at + ": expected an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v, const std::string& at) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0;
  in >> out;
  if (!in || !in.eof() || !std::isfinite(out)) throw ValidationError(at + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, const std::string& at) {
  const auto l = to_lower(v);
  if (l == "true" || l == "1" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "no") return false;
  throw ValidationError(at + ": expected true or false, got '" + v + "'");
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

ClusterAlgorithm parse_algorithm(const std::string& v, const std::string& at) {
  if (v == "threshold") return ClusterAlgorithm::threshold;
  if (v == "kmeans") return ClusterAlgorithm::kmeans;
  throw ValidationError(at + ": expected threshold or kmeans, got '" + v + "'");
}

const char* algorithm_name(ClusterAlgorithm a) {
  return a == ClusterAlgorithm::threshold ? "threshold" : "kmeans";
}

std::string group_effects_text(const std::map<std::string, std::map<SubsetTag, double>>& g) {
  std::string out;
  for (const auto& [group, by_subset] : g) {
    for (const auto& [tag, shift] : by_subset) {
      if (!out.empty()) out += ", ";
      out += group + ":" + std::string(to_string(tag)) + "=" + format_double(shift);
    }
  }
  return out;
}

}  // namespace

std::map<std::string, std::map<SubsetTag, double>> parse_group_effects(const std::string& text) {
  std::map<std::string, std::map<SubsetTag, double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const auto eq = item.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw ValidationError("simulator.group_effects: expected group:subset=shift, got '" + item + "'");
    }
    const auto group = trim(item.substr(0, colon));
    const auto tag = parse_subset_tag(trim(item.substr(colon + 1, eq - colon - 1)));
    out[group][tag] = to_double(trim(item.substr(eq + 1)), "simulator.group_effects");
  }
  return out;
}

void set_value(ExperimentConfig& c, const std::string& section, const std::string& key,
               const std::string& raw, const std::string& base_dir) {
  const std::string v = unquote(raw);
  const std::string at = where(section, key);
  auto unknown = [&] { throw ValidationError("unknown config key '" + at + "'"); };

  if (section == "experiment") {
    if (key == "name") c.name = v;
    else if (key == "output_dir") c.output_dir = resolve(v, base_dir);
    else unknown();
  } else if (section == "data") {
    if (key == "personas") c.data.personas = resolve(v, base_dir);
    else if (key == "personas_format") {
      if (v == "jsonl") c.data.personas_format = PersonaFormat::jsonl;
      else if (v == "tsv") c.data.personas_format = PersonaFormat::tsv;
      else throw ValidationError(at + ": expected jsonl or tsv, got '" + v + "'");
    } else if (key == "single_label") c.data.single_label = resolve(v, base_dir);
    else if (key == "multi_label") c.data.multi_label = resolve(v, base_dir);
    else if (key == "templates") c.data.templates = resolve(v, base_dir);
    else unknown();
  } else if (section == "backend") {
    auto& b = c.backend;
    if (key == "kind") b.kind = parse_backend_kind(v);
    else if (key == "endpoint_url") b.endpoint_url = v;
    else if (key == "model_name") b.model_name = v;
    else if (key == "temperature") b.temperature = to_double(v, at);
    else if (key == "max_retries") b.max_retries = to_int(v, at);
    else if (key == "request_timeout_ms") b.request_timeout = std::chrono::milliseconds(to_u64(v, at));
    else if (key == "max_parallel") b.max_parallel = to_int(v, at);
    else if (key == "chat_wrapping") b.chat_wrapping = parse_chat_wrapping(v);
    else if (key == "response_pointer") b.response_pointer = v;
    else if (key == "api_key_env") b.api_key_env = v;
    else if (key == "max_tokens") b.max_tokens = to_int(v, at);
    else if (key == "strict_parsing") b.strict_parsing = to_bool(v, at);
    else unknown();
  } else if (section == "simulator") {
    auto& s = c.simulator;
    if (key == "persona_bias_scale") s.persona_bias_scale = to_double(v, at);
    else if (key == "noise_scale") s.noise_scale = to_double(v, at);
    else if (key == "group_effects") s.group_effects = parse_group_effects(v);
    else if (key == "base_source") {
      if (v == "human_mean") s.base_source = BaseSource::human_mean;
      else if (v == "constant") s.base_source = BaseSource::constant;
      else throw ValidationError(at + ": expected human_mean or constant, got '" + v + "'");
    } else if (key == "constant_base") s.constant_base = to_double(v, at);
    else if (key == "bias_seed") s.bias_seed = to_u64(v, at);
    else if (key == "embedding_bias_scale") s.embedding_bias_scale = to_double(v, at);
    else unknown();
  } else if (section == "embedding") {
    if (key == "kind") {
      if (v == "hashing") c.embedding.kind = EmbedderKind::hashing;
      else if (v == "http") c.embedding.kind = EmbedderKind::http;
      else throw ValidationError(at + ": expected hashing or http, got '" + v + "'");
    } else if (key == "endpoint_url") c.embedding.endpoint_url = v;
    else if (key == "dimension") c.embedding.dimension = to_count(v, at);
    else unknown();
  } else if (section == "seeds") {
    auto& s = c.seeds;
    if (key == "sampling") s.sampling = to_u64(v, at);
    else if (key == "partition") s.partition = to_u64(v, at);
    else if (key == "permutation") s.permutation = to_u64(v, at);
    else if (key == "simulator") s.simulator = to_u64(v, at);
    else if (key == "kmeans") s.kmeans = to_u64(v, at);
    else if (key == "stability") s.stability = to_u64(v, at);
    else unknown();
  } else if (section == "study1") {
    auto& s = c.study1;
    if (key == "n_personas") s.n_personas = to_count(v, at);
    else if (key == "n_baseline_runs") s.n_baseline_runs = to_count(v, at);
    else if (key == "stability_strata_size") s.stability_strata_size = to_count(v, at);
    else if (key == "stability_repeats") s.stability_repeats = to_count(v, at);
    else if (key == "num_crowds") s.num_crowds = to_count(v, at);
    else if (key == "crowd_size") s.crowd_size = to_count(v, at);
    else if (key == "n_permutations") s.n_permutations = to_count(v, at);
    else if (key == "tie_rule") s.tie_rule.mode = parse_tie_mode(v);
    else if (key == "tie_seed") s.tie_rule.seed = to_u64(v, at);
    else unknown();
  } else if (section == "study2") {
    auto& s = c.study2;
    if (key == "n_personas") s.n_personas = to_count(v, at);
    else if (key == "persona_algorithm") s.persona_algorithm = parse_algorithm(v, at);
    else if (key == "label_algorithm") s.label_algorithm = parse_algorithm(v, at);
    else if (key == "cluster_threshold") s.cluster_threshold = to_double(v, at);
    else if (key == "cluster_min_size") s.cluster_min_size = to_count(v, at);
    else if (key == "label_kmeans_k") s.label_kmeans_k = to_count(v, at);
    else if (key == "persona_kmeans_k") s.persona_kmeans_k = to_count(v, at);
    else if (key == "label_cluster_threshold") s.label_cluster_threshold = to_double(v, at);
    else if (key == "kmeans_max_iters") s.kmeans_max_iters = to_count(v, at);
    else if (key == "top_k_diff") s.top_k_diff = to_count(v, at);
    else if (key == "top_terms") s.top_terms = to_count(v, at);
    else unknown();
  } else if (section == "stats") {
    auto& s = c.stats;
    if (key == "levene_center") {
      if (v == "mean") s.levene_center = LeveneCenter::mean;
      else if (v == "median") s.levene_center = LeveneCenter::median;
      else throw ValidationError(at + ": expected mean or median, got '" + v + "'");
    } else if (key == "wilcoxon_exact_threshold") s.wilcoxon_exact_threshold = to_count(v, at);
    else if (key == "alpha_variance") s.alpha_variance = to_double(v, at);
    else if (key == "alpha_shift") s.alpha_shift = to_double(v, at);
    else unknown();
  } else {
    throw ValidationError("unknown config section '" + section + "'");
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError("config: " + std::string(e.message()) + " at line " +
                          std::to_string(e.line()));
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) throw ValidationError("config: key '" + section + "' outside any section");
      continue;
    }
    for (const auto& [key, value] : body) set_value(c, section, key, value.data(), base_dir);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto base = fs::path(path).parent_path().string();
  return parse_config(buf.str(), base);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ValidationError("override must look like section.key=value, got '" + assignment + "'");
  }
  set_value(config, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
            assignment.substr(eq + 1));
}

void ExperimentConfig::validate() const {
  backend.validate();
  simulator.validate();
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(study1.n_personas, "study1.n_personas");
  positive(study1.n_baseline_runs, "study1.n_baseline_runs");
  positive(study1.stability_strata_size, "study1.stability_strata_size");
  positive(study1.stability_repeats, "study1.stability_repeats");
  positive(study1.num_crowds, "study1.num_crowds");
  positive(study1.crowd_size, "study1.crowd_size");
  positive(study1.n_permutations, "study1.n_permutations");
  positive(study2.cluster_min_size, "study2.cluster_min_size");
  positive(study2.label_kmeans_k, "study2.label_kmeans_k");
  positive(study2.persona_kmeans_k, "study2.persona_kmeans_k");
  positive(study2.kmeans_max_iters, "study2.kmeans_max_iters");
  positive(study2.top_k_diff, "study2.top_k_diff");
  positive(embedding.dimension, "embedding.dimension");
  for (double t : {study2.cluster_threshold, study2.label_cluster_threshold}) {
    if (!(t > 0.0 && t < 1.0)) throw ValidationError("cluster thresholds must lie in (0, 1)");
  }
  for (double a : {stats.alpha_variance, stats.alpha_shift}) {
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("alphas must lie in (0, 1)");
  }
  if (embedding.kind == EmbedderKind::http && embedding.endpoint_url.empty()) {
    throw ValidationError("embedding.endpoint_url is required for the http embedder");
  }
}

nlohmann::json ExperimentConfig::snapshot() const {
  using nlohmann::json;
  const char* fmt = data.personas_format == PersonaFormat::jsonl ? "jsonl" : "tsv";
  return json{
      {"experiment", {{"name", name}, {"output_dir", output_dir}}},
      {"data",
       {{"personas", data.personas},
        {"personas_format", fmt},
        {"single_label", data.single_label},
        {"multi_label", data.multi_label},
        {"templates", data.templates}}},
      {"backend",
       {{"kind", std::string(to_string(backend.kind))},
        {"endpoint_url", backend.endpoint_url},
        {"model_name", backend.model_name},
        {"temperature", backend.temperature},
        {"max_retries", backend.max_retries},
        {"request_timeout_ms", backend.request_timeout.count()},
        {"max_parallel", backend.max_parallel},
        {"chat_wrapping", backend.chat_wrapping == ChatWrapping::plain ? "plain" : "chat_user_role"},
        {"response_pointer", backend.response_pointer},
        {"api_key_env", backend.api_key_env},
        {"max_tokens", backend.max_tokens},
        {"strict_parsing", backend.strict_parsing}}},
      {"simulator",
       {{"persona_bias_scale", simulator.persona_bias_scale},
        {"noise_scale", simulator.noise_scale},
        {"group_effects", group_effects_text(simulator.group_effects)},
        {"base_source", simulator.base_source == BaseSource::human_mean ? "human_mean" : "constant"},
        {"constant_base", simulator.constant_base},
        {"bias_seed", simulator.bias_seed},
        {"embedding_bias_scale", simulator.embedding_bias_scale}}},
      {"embedding",
       {{"kind", embedding.kind == EmbedderKind::hashing ? "hashing" : "http"},
        {"endpoint_url", embedding.endpoint_url},
        {"dimension", embedding.dimension}}},
      {"seeds",
       {{"sampling", seeds.sampling},
        {"partition", seeds.partition},
        {"permutation", seeds.permutation},
        {"simulator", seeds.simulator},
        {"kmeans", seeds.kmeans},
        {"stability", seeds.stability}}},
      {"study1",
       {{"n_personas", study1.n_personas},
        {"n_baseline_runs", study1.n_baseline_runs},
        {"stability_strata_size", study1.stability_strata_size},
        {"stability_repeats", study1.stability_repeats},
        {"num_crowds", study1.num_crowds},
        {"crowd_size", study1.crowd_size},
        {"n_permutations", study1.n_permutations},
        {"tie_rule", std::string(to_string(study1.tie_rule.mode))},
        {"tie_seed", study1.tie_rule.seed}}},
      {"study2",
       {{"n_personas", study2.n_personas},
        {"persona_algorithm", algorithm_name(study2.persona_algorithm)},
        {"label_algorithm", algorithm_name(study2.label_algorithm)},
        {"cluster_threshold", study2.cluster_threshold},
        {"cluster_min_size", study2.cluster_min_size},
        {"label_kmeans_k", study2.label_kmeans_k},
        {"persona_kmeans_k", study2.persona_kmeans_k},
        {"label_cluster_threshold", study2.label_cluster_threshold},
        {"kmeans_max_iters", study2.kmeans_max_iters},
        {"top_k_diff", study2.top_k_diff},
        {"top_terms", study2.top_terms}}},
      {"stats",
       {{"levene_center", stats.levene_center == LeveneCenter::mean ? "mean" : "median"},
        {"wilcoxon_exact_threshold", stats.wilcoxon_exact_threshold},
        {"alpha_variance", stats.alpha_variance},
        {"alpha_shift", stats.alpha_shift}}},
  };
}

}  // namespace pcrowd
