#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "local_server.hpp"
#include "pcrowd/crowd.hpp"
#include "pcrowd/embedding_analysis.hpp"
#include "pcrowd/synthetic.hpp"
#include "test_support.hpp"

using namespace pcrowd;

namespace {

std::vector<SpacePoint> blobs(std::size_t per_blob, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SpacePoint> pts;
  const std::vector<Vector> centers{{10, 0, 0}, {0, 10, 0}};
  for (std::size_t b = 0; b < centers.size(); ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      Vector v = centers[b];
      for (double& x : v) x += 0.3 * standard_normal(rng);
      pts.push_back({"b" + std::to_string(b) + "_" + std::to_string(i), v});
    }
  }
  return pts;
}

std::vector<SpacePoint> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SpacePoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    Vector v(dim);
    for (double& x : v) x = standard_normal(rng);
    pts.push_back({"p" + std::to_string(i), v});
  }
  return pts;
}

}  // namespace

TEST(HashingEmbedder, DeterministicAndUnitLength) {
  HashingEmbedder e(64);
  const auto a = e.embed_one("A patient teacher who loves chess");
  EXPECT_EQ(a, e.embed_one("a patient TEACHER who loves chess!"));
  double norm = 0;
  for (double x : a) norm += x * x;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_EQ(e.embed({"x", "y"}).size(), 2u);
}

TEST(HashingEmbedder, SharedWordsAreCloser) {
  HashingEmbedder e;
  const auto t = e.embed_one("a high school teacher who enjoys poetry");
  const auto p = e.embed_one("a high school teacher who enjoys history");
  const auto q = e.embed_one("jazz trumpeter on tour");
  EXPECT_LT(cosine_distance(t, p), cosine_distance(t, q));
}

TEST(Cosine, KnownDistances) {
  const std::vector<double> x{1, 0}, y{0, 1}, nx{-2, 0}, zero{0, 0};
  EXPECT_NEAR(cosine_distance(x, x), 0.0, 1e-12);
  EXPECT_NEAR(cosine_distance(x, y), 1.0, 1e-12);
  EXPECT_NEAR(cosine_distance(x, nx), 2.0, 1e-12);
  EXPECT_THROW(cosine_distance(x, zero), ValidationError);
  EXPECT_THROW(cosine_distance(x, std::vector<double>{1, 0, 0}), ValidationError);
}

TEST(ThresholdCluster, MembersMeetThresholdAgainstLeader) {
  const auto pts = random_points(300, 8, 3);
  const auto lookup = make_lookup(pts);
  const auto c = threshold_cluster(pts, 0.3, 2);
  std::size_t total = c.unassigned.size();
  for (const auto& cl : c.clusters) {
    EXPECT_GE(cl.members.size(), 2u);
    total += cl.members.size();
    for (const auto& m : cl.members) {
      EXPECT_GE(cosine_similarity(lookup.at(m), cl.representative), 0.3 - 1e-12);
    }
  }
  EXPECT_EQ(total, pts.size());
  EXPECT_EQ(c.retained() + c.unassigned.size(), pts.size());
}

TEST(ThresholdCluster, IdenticalVectorsFormOneCluster) {
  std::vector<SpacePoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({"p" + std::to_string(i), {1, 2, 3}});
  const auto c = threshold_cluster(pts, 0.99, 1);
  ASSERT_EQ(c.clusters.size(), 1u);
  EXPECT_EQ(c.clusters[0].members.size(), 10u);
}

TEST(ThresholdCluster, RetainedCountMonotoneInThreshold) {
  // Greedy leader clustering is not monotone on arbitrary input; persona
  // descriptions with shared vocabulary are the intended regime.
  HashingEmbedder e;
  const auto pts = embed_personas(synthetic::personas(1500, 4), e);
  std::size_t prev = pts.size() + 1;
  for (double th : {0.50, 0.55, 0.60, 0.65, 0.70, 0.75}) {
    const auto c = threshold_cluster(pts, th, 5);
    EXPECT_LE(c.retained(), prev) << th;
    prev = c.retained();
  }
}

TEST(KMeans, SeparatesTwoBlobs) {
  const auto pts = blobs(40, 1);
  const auto r = kmeans(pts, 2, 7);
  ASSERT_EQ(r.assignment.size(), pts.size());
  for (std::size_t i = 1; i < 40; ++i) EXPECT_EQ(r.assignment[i], r.assignment[0]);
  for (std::size_t i = 41; i < 80; ++i) EXPECT_EQ(r.assignment[i], r.assignment[40]);
  EXPECT_NE(r.assignment[0], r.assignment[40]);
}

TEST(KMeans, KEqualsNGivesZeroObjective) {
  const auto pts = random_points(12, 3, 9);
  const auto r = kmeans(pts, 12, 1);
  ASSERT_FALSE(r.objective_trace.empty());
  EXPECT_NEAR(r.objective_trace.back(), 0.0, 1e-18);
}

TEST(KMeans, ObjectiveNonIncreasingAndReproducible) {
  const auto pts = random_points(500, 5, 10);
  const auto r = kmeans(pts, 8, 2);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-9);
  }
  EXPECT_EQ(r.assignment, kmeans(pts, 8, 2).assignment);
  EXPECT_THROW(kmeans(pts, 0, 1), ValidationError);
}

TEST(ClusterDistanceMatrix, TwoOrthogonalSingletons) {
  const std::vector<SpacePoint> pts{{"a", {1, 0}}, {"b", {0, 1}}};
  Clustering c;
  c.clusters = {{0, {"a"}, {1, 0}}, {1, {"b"}, {0, 1}}};
  const auto m = cluster_distance_matrix(c, make_lookup(pts), MatrixNormalization::none);
  EXPECT_EQ(m.values, (std::vector<std::vector<double>>{{0, 1}, {1, 0}}));
}

TEST(ClusterDistanceMatrix, MatchesBruteForceAndIsSymmetric) {
  const auto pts = random_points(60, 4, 11);
  const auto lookup = make_lookup(pts);
  const auto km = kmeans(pts, 4, 3);
  const auto m = cluster_distance_matrix(km.clustering, lookup, MatrixNormalization::none);
  const auto& cl = km.clustering.clusters;
  for (std::size_t i = 0; i < cl.size(); ++i) {
    for (std::size_t j = 0; j < cl.size(); ++j) {
      EXPECT_NEAR(m.values[i][j], m.values[j][i], 1e-12);
      double sum = 0;
      std::size_t n = 0;
      for (std::size_t a = 0; a < cl[i].members.size(); ++a) {
        for (std::size_t b = 0; b < cl[j].members.size(); ++b) {
          if (i == j && b <= a) continue;
          sum += cosine_distance(lookup.at(cl[i].members[a]), lookup.at(cl[j].members[b]));
          ++n;
        }
      }
      EXPECT_NEAR(m.values[i][j], n ? sum / n : 0.0, 1e-12);
    }
  }
  const auto norm = cluster_distance_matrix(km.clustering, lookup, MatrixNormalization::row_minmax);
  EXPECT_TRUE(norm.normalized);
  for (const auto& row : norm.values) {
    EXPECT_NEAR(*std::min_element(row.begin(), row.end()), 0.0, 1e-12);
    EXPECT_NEAR(*std::max_element(row.begin(), row.end()), 1.0, 1e-12);
  }
}

TEST(CrossSpace, IdenticalSpacesCorrelatePerfectly) {
  const auto pts = random_points(20, 5, 12);
  const auto r = cross_space_correlations(pts, pts);
  ASSERT_EQ(r.size(), pts.size());
  for (const auto& c : r) {
    EXPECT_EQ(c.persona_id, r[&c - &r[0]].persona_id);
    EXPECT_NEAR(c.result.rho, 1.0, 1e-12);
  }
}

TEST(ClusterTerms, DistinctiveWordsRankFirst) {
  Clustering c;
  c.clusters = {{0, {"a", "b"}, {}}, {1, {"c"}, {}}};
  const std::unordered_map<std::string, std::string> desc{
      {"a", "a chemist who loves chemistry"}, {"b", "a chemist in a lab"}, {"c", "a sailor at sea"}};
  const auto terms = cluster_top_terms(c, desc, 2);
  ASSERT_EQ(terms.size(), 2u);
  ASSERT_FALSE(terms[0].empty());
  EXPECT_EQ(terms[0][0].first, "chemist");
  EXPECT_NEAR(terms[0][0].second, 2 * std::log(2.0), 1e-12);
}

TEST(LabelVectors, ShapeAndMissingKeys) {
  TempDir dir;
  RunStore store(dir.file("s.jsonl"));
  MultiLabelDataset ds;
  ds.instances = {{"m1", "x", {}, {}}, {"m2", "y", {}, {}}};
  for (const char* pid : {"p1", "p2"}) {
    for (int i = 0; i < 2; ++i) {
      if (std::string(pid) == "p2" && i == 1) continue;
      RunRecord r;
      r.run_id = std::string("s2:label:") + pid;
      r.persona_id = pid;
      r.template_id = TemplateId::T3;
      r.instance_id = ds.instances[i].instance_id;
      r.label = Label::likert(i + 2);
      store.append(r);
    }
  }
  const auto one = label_vectors(store, {"p1"}, ds);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].vector, (Vector{2, 3}));
  EXPECT_THROW(label_vectors(store, {"p1", "p2"}, ds), MissingLabelsError);
}

TEST(HttpEmbedding, WireFormat) {
  nlohmann::json seen;
  LocalServer server("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    nlohmann::json out;
    out["vectors"] = nlohmann::json::array();
    for (const auto& t : seen["texts"]) {
      out["vectors"].push_back({double(t.get<std::string>().size()), 1.0, 0.0});
    }
    res.set_content(out.dump(), "application/json");
  });
  HttpEmbeddingProvider p(server.url("/embed"), 3);
  const auto v = p.embed({"ab", "abcd"});
  EXPECT_EQ(seen["texts"], nlohmann::json({"ab", "abcd"}));
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1], (Vector{4, 1, 0}));
  HttpEmbeddingProvider wrong(server.url("/embed"), 5);
  EXPECT_THROW(wrong.embed({"x"}), ValidationError);
}

TEST(EmbeddingCsv, RoundTrips) {
  TempDir dir;
  const auto pts = random_points(5, 3, 13);
  write_points_csv(dir.file("p.csv"), pts);
  const auto back = read_points_csv(dir.file("p.csv"));
  ASSERT_EQ(back.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(back[i].persona_id, pts[i].persona_id);
    EXPECT_EQ(back[i].vector, pts[i].vector);
  }
  const auto km = kmeans(pts, 2, 1);
  const auto m = cluster_distance_matrix(km.clustering, make_lookup(pts), MatrixNormalization::none);
  write_matrix_csv(dir.file("m.csv"), m);
  const auto mb = read_matrix_csv(dir.file("m.csv"));
  EXPECT_EQ(mb.cluster_ids, m.cluster_ids);
  EXPECT_EQ(mb.values, m.values);
}
