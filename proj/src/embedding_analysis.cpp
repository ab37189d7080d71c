#include "pcrowd/embedding_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "pcrowd/common.hpp"
#include "pcrowd/crowd.hpp"
#include "pcrowd/csv.hpp"
#include "pcrowd/http.hpp"

namespace pcrowd {

namespace {

std::vector<std::string> alnum_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector unit(std::span<const double> v, std::string_view id) {
  const double n = norm(v);
  if (n == 0.0) throw ValidationError("zero vector for '" + std::string(id) + "'");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

void check_dimensions(std::span<const SpacePoint> points) {
  if (points.empty()) return;
  const auto d = points.front().vector.size();
  for (const auto& p : points) {
    if (p.vector.size() != d) {
      throw ValidationError("dimension mismatch for '" + p.persona_id + "'");
    }
    for (double x : p.vector) {
      if (!std::isfinite(x)) throw ValidationError("non-finite entry for '" + p.persona_id + "'");
    }
  }
}

}  // namespace

// ------------------------------------------------------------- providers

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw ValidationError("embedding dimension must be positive");
}

Vector HashingEmbedder::embed_one(std::string_view text) const {
  Vector v(dimension_, 0.0);
  for (const auto& tok : alnum_tokens(text)) v[fnv1a64(tok) % dimension_] += 1.0;
  const double n = norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

std::vector<Vector> HashingEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::size_t dimension,
                                             std::chrono::milliseconds timeout,
                                             std::size_t batch_size)
    : url_(std::move(url)), dimension_(dimension), timeout_(timeout), batch_size_(batch_size) {
  if (batch_size_ == 0) throw ValidationError("embedding batch size must be positive");
}

std::vector<Vector> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const std::size_t end = std::min(texts.size(), start + batch_size_);
    nlohmann::json body{{"texts", std::vector<std::string>(texts.begin() + static_cast<long>(start),
                                                           texts.begin() + static_cast<long>(end))}};
    auto res = http::post_json(url_, body, timeout_);
    if (res.status < 200 || res.status >= 300) {
      throw IoError("embedding endpoint returned HTTP " + std::to_string(res.status));
    }
    std::vector<Vector> batch;
    try {
      batch = nlohmann::json::parse(res.body).at("vectors").get<std::vector<Vector>>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed embedding response: ") + e.what());
    }
    if (batch.size() != end - start) {
      throw IoError("embedding endpoint returned " + std::to_string(batch.size()) +
                    " vectors for " + std::to_string(end - start) + " texts");
    }
    for (auto& v : batch) {
      if (v.size() != dimension_) {
        throw ValidationError("embedding dimension " + std::to_string(v.size()) +
                              " does not match configured " + std::to_string(dimension_));
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<PersonaEmbedding> embed_personas(const std::vector<Persona>& personas,
                                             EmbeddingProvider& provider) {
  std::vector<std::string> texts;
  texts.reserve(personas.size());
  for (const auto& p : personas) texts.push_back(p.description);
  auto vectors = provider.embed(texts);
  if (vectors.size() != personas.size()) {
    throw IoError("embedding provider returned the wrong number of vectors");
  }
  std::vector<PersonaEmbedding> out;
  out.reserve(personas.size());
  for (std::size_t i = 0; i < personas.size(); ++i) {
    if (vectors[i].size() != provider.dimension()) {
      throw ValidationError("embedding dimension mismatch for persona '" + personas[i].id + "'");
    }
    out.push_back({personas[i].id, std::move(vectors[i])});
  }
  return out;
}

std::vector<LabelVector> label_vectors(const RunStore& store,
                                       const std::vector<std::string>& persona_ids,
                                       const MultiLabelDataset& dataset) {
  std::unordered_map<std::string, std::size_t> inst_index;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i)
    inst_index.emplace(dataset.instances[i].instance_id, i);
  std::unordered_map<std::string, std::size_t> persona_index;
  for (std::size_t p = 0; p < persona_ids.size(); ++p) persona_index.emplace(persona_ids[p], p);

  const double unset = std::numeric_limits<double>::quiet_NaN();
  std::vector<LabelVector> out;
  out.reserve(persona_ids.size());
  for (const auto& id : persona_ids) out.push_back({id, Vector(dataset.instances.size(), unset)});

  for (const auto& r : store.records()) {
    if (r.template_id != TemplateId::T3 || !r.persona_id) continue;
    auto p = persona_index.find(*r.persona_id);
    auto i = inst_index.find(r.instance_id);
    if (p == persona_index.end() || i == inst_index.end()) continue;
    double& slot = out[p->second].vector[i->second];
    if (!std::isnan(slot)) {
      throw ValidationError("multiple likert labels for (" + *r.persona_id + ", " +
                            r.instance_id + ")");
    }
    slot = r.label.as_likert();
  }

  std::vector<RunKey> missing;
  for (const auto& lv : out)
    for (std::size_t i = 0; i < lv.vector.size(); ++i)
      if (std::isnan(lv.vector[i])) missing.emplace_back(lv.persona_id, dataset.instances[i].instance_id);
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " likert labels missing:";
    for (const auto& [p, i] : missing) msg += " (" + p + ", " + i + ")";
    throw MissingLabelsError(msg, std::move(missing));
  }
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine: dimension mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine: zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  return 1.0 - cosine_similarity(u, v);
}

// ------------------------------------------------------------- clustering

std::size_t Clustering::retained() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.members.size();
  return n;
}

Clustering threshold_cluster(std::span<const SpacePoint> points, double similarity_threshold,
                             std::size_t min_size) {
  if (!(similarity_threshold > 0.0 && similarity_threshold < 1.0)) {
    throw ValidationError("similarity threshold must lie in (0, 1)");
  }
  if (min_size < 1) throw ValidationError("min_size must be >= 1");
  check_dimensions(points);

  struct Group {
    Vector leader;
    double leader_norm;
    std::vector<std::string> members;
  };
  std::vector<Group> groups;
  for (const auto& p : points) {
    const double pn = norm(p.vector);
    if (pn == 0.0) throw ValidationError("zero vector for '" + p.persona_id + "'");
    Group* home = nullptr;
    for (auto& g : groups) {
      // Same expression as cosine_similarity, so membership decisions agree
      // bit-for-bit with any later check.
      const double sim = std::clamp(dot(p.vector, g.leader) / (pn * g.leader_norm), -1.0, 1.0);
      if (sim >= similarity_threshold) {
        home = &g;
        break;
      }
    }
    if (home) {
      home->members.push_back(p.persona_id);
    } else {
      groups.push_back({p.vector, pn, {p.persona_id}});
    }
  }

  Clustering out;
  for (auto& g : groups) {
    if (g.members.size() >= min_size) {
      out.clusters.push_back({out.clusters.size(), std::move(g.members), std::move(g.leader)});
    } else {
      for (auto& m : g.members) out.unassigned.push_back(std::move(m));
    }
  }
  return out;
}

KMeansResult kmeans(std::span<const SpacePoint> points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters) {
  const std::size_t n = points.size();
  if (k == 0) throw ValidationError("kmeans: k must be positive");
  if (k > n) {
    throw ValidationError("kmeans: k=" + std::to_string(k) + " exceeds " + std::to_string(n) +
                          " points");
  }
  check_dimensions(points);
  const std::size_t d = points.front().vector.size();
  auto sq = [&](const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<Vector> centroids;
  std::vector<char> chosen(n, 0);
  std::size_t first = static_cast<std::size_t>(uniform_below(rng, n));
  centroids.push_back(points[first].vector);
  chosen[first] = 1;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq(points[i].vector, centroids[0]);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!chosen[i]) total += d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] == 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    }
    if (pick == n) {
      // Remaining points coincide with existing centroids.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) free.push_back(i);
      pick = free[static_cast<std::size_t>(uniform_below(rng, free.size()))];
    }
    chosen[pick] = 1;
    centroids.push_back(points[pick].vector);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq(points[i].vector, centroids.back()));
  }

  KMeansResult result;
  result.assignment.assign(n, k);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq(points[i].vector, centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double dc = sq(points[i].vector, centroids[c]);
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      if (result.assignment[i] != best) changed = true;
      result.assignment[i] = best;
      objective += best_d;
    }
    result.objective_trace.push_back(objective);
    result.iterations = iter + 1;
    if (!changed) break;

    std::vector<Vector> sums(k, Vector(d, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = result.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums[c][j] += points[i].vector[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }

  result.clustering.clusters.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    result.clustering.clusters[c].cluster_id = c;
    result.clustering.clusters[c].representative = centroids[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    result.clustering.clusters[result.assignment[i]].members.push_back(points[i].persona_id);
  }
  return result;
}

VectorLookup make_lookup(std::span<const SpacePoint> points) {
  VectorLookup out;
  for (const auto& p : points) {
    if (!out.emplace(p.persona_id, p.vector).second) {
      throw ValidationError("duplicate persona id '" + p.persona_id + "' in space");
    }
  }
  return out;
}

ClusterDistanceMatrix cluster_distance_matrix(const Clustering& clustering,
                                              const VectorLookup& space,
                                              MatrixNormalization normalize) {
  const std::size_t k = clustering.clusters.size();
  std::vector<std::vector<Vector>> members(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (const auto& id : clustering.clusters[c].members) {
      auto it = space.find(id);
      if (it == space.end()) throw ValidationError("no vector for cluster member '" + id + "'");
      members[c].push_back(unit(it->second, id));
    }
  }

  ClusterDistanceMatrix m;
  m.values.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t c = 0; c < k; ++c) m.cluster_ids.push_back(clustering.clusters[c].cluster_id);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& a = members[i];
    // Intra: distinct unordered pairs.
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t x = 0; x < a.size(); ++x)
      for (std::size_t y = x + 1; y < a.size(); ++y) {
        sum += std::max(0.0, 1.0 - dot(a[x], a[y]));
        ++pairs;
      }
    m.values[i][i] = pairs ? sum / static_cast<double>(pairs) : 0.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& b = members[j];
      double s = 0.0;
      for (const auto& u : a)
        for (const auto& v : b) s += std::max(0.0, 1.0 - dot(u, v));
      const double avg = (a.empty() || b.empty()) ? 0.0
                                                  : s / static_cast<double>(a.size() * b.size());
      m.values[i][j] = avg;
      m.values[j][i] = avg;
    }
  }

  if (normalize == MatrixNormalization::row_minmax) {
    m.normalized = true;
    for (auto& row : m.values) {
      if (row.empty()) continue;
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      const double min = *lo;
      const double range = *hi - *lo;
      for (double& x : row) x = range > 0.0 ? (x - min) / range : 0.0;
    }
  }
  return m;
}

std::vector<PersonaCorrelation> cross_space_correlations(std::span<const SpacePoint> persona_space,
                                                         std::span<const SpacePoint> label_space) {
  const std::size_t n = persona_space.size();
  if (label_space.size() != n) throw ValidationError("spaces hold different persona sets");
  if (n < 4) throw ValidationError("cross-space correlation needs at least 4 personas");
  const auto label_lookup = make_lookup(label_space);

  std::vector<Vector> pu;
  std::vector<Vector> lu;
  pu.reserve(n);
  lu.reserve(n);
  for (const auto& p : persona_space) {
    auto it = label_lookup.find(p.persona_id);
    if (it == label_lookup.end()) {
      throw ValidationError("persona '" + p.persona_id + "' missing from label space");
    }
    pu.push_back(unit(p.vector, p.persona_id));
    lu.push_back(unit(it->second, p.persona_id));
  }

  std::vector<PersonaCorrelation> out;
  out.reserve(n);
  std::vector<double> dp(n - 1);
  std::vector<double> dl(n - 1);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t k = 0;
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      dp[k] = std::max(0.0, 1.0 - dot(pu[p], pu[q]));
      dl[k] = std::max(0.0, 1.0 - dot(lu[p], lu[q]));
      ++k;
    }
    PersonaCorrelation pc;
    pc.persona_id = persona_space[p].persona_id;
    try {
      pc.result = spearman(dp, dl);
    } catch (const ValidationError&) {
      pc.result.defined = false;
      pc.result.n = n - 1;
      pc.result.rho = 0.0;
      pc.result.p_value = 1.0;
    }
    out.push_back(std::move(pc));
  }
  return out;
}

std::vector<std::vector<std::pair<std::string, double>>> cluster_top_terms(
    const Clustering& clustering, const std::unordered_map<std::string, std::string>& descriptions,
    std::size_t top_k) {
  const std::size_t k = clustering.clusters.size();
  std::vector<std::map<std::string, double>> tf(k);
  std::map<std::string, std::size_t> df;
  for (std::size_t c = 0; c < k; ++c) {
    for (const auto& id : clustering.clusters[c].members) {
      auto it = descriptions.find(id);
      if (it == descriptions.end()) throw ValidationError("no description for '" + id + "'");
      for (const auto& tok : alnum_tokens(it->second)) {
        if (is_english_stopword(tok)) continue;
        tf[c][tok] += 1.0;
      }
    }
    for (const auto& [term, _] : tf[c]) ++df[term];
  }
  std::vector<std::vector<std::pair<std::string, double>>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& terms = out[c];
    for (const auto& [term, count] : tf[c]) {
      const double idf = std::log(static_cast<double>(k) / static_cast<double>(df[term]));
      terms.emplace_back(term, count * idf);
    }
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (terms.size() > top_k) terms.resize(top_k);
  }
  return out;
}

// ------------------------------------------------------------- CSV

void write_matrix_csv(const std::string& path, const ClusterDistanceMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  csv::Row header{"cluster_id"};
  for (auto id : m.cluster_ids) header.push_back(std::to_string(id));
  csv::write_row(out, header);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    csv::Row row{std::to_string(m.cluster_ids[i])};
    for (double v : m.values[i]) row.push_back(format_double(v));
    csv::write_row(out, row);
  }
}

ClusterDistanceMatrix read_matrix_csv(const std::string& path) {
  const auto table = csv::read_file(path);
  if (table.header.empty() || table.header[0] != "cluster_id") {
    throw ValidationError(path + ": not a cluster matrix CSV");
  }
  ClusterDistanceMatrix m;
  for (std::size_t i = 1; i < table.header.size(); ++i)
    m.cluster_ids.push_back(std::stoul(table.header[i]));
  for (const auto& row : table.rows) {
    std::vector<double> values;
    for (std::size_t i = 1; i < row.size(); ++i) values.push_back(std::stod(row[i]));
    m.values.push_back(std::move(values));
  }
  if (m.values.size() != m.cluster_ids.size()) throw ValidationError(path + ": matrix not square");
  return m;
}

void write_points_csv(const std::string& path, std::span<const SpacePoint> points) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  const std::size_t d = points.empty() ? 0 : points.front().vector.size();
  csv::Row header{"persona_id"};
  for (std::size_t i = 0; i < d; ++i) header.push_back("d" + std::to_string(i));
  csv::write_row(out, header);
  for (const auto& p : points) {
    csv::Row row{p.persona_id};
    for (double v : p.vector) row.push_back(format_double(v));
    csv::write_row(out, row);
  }
}

std::vector<SpacePoint> read_points_csv(const std::string& path) {
  const auto table = csv::read_file(path);
  if (table.header.empty() || table.header[0] != "persona_id") {
    throw ValidationError(path + ": not a vector CSV");
  }
  std::vector<SpacePoint> out;
  for (const auto& row : table.rows) {
    SpacePoint p{row[0], {}};
    for (std::size_t i = 1; i < row.size(); ++i) p.vector.push_back(std::stod(row[i]));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace pcrowd
