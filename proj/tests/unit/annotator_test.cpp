#include <gtest/gtest.h>

#include <atomic>
#include <mutex>

#include <json.hpp>

#include "local_server.hpp"
#include "pcrowd/annotator_backend.hpp"
#include "pcrowd/common.hpp"

using namespace pcrowd;
using nlohmann::json;

namespace {

Instance inst(std::string id, double mean, std::set<SubsetTag> tags = {}) {
  return {std::move(id), "post text", std::move(tags), mean};
}

AnnotationRequest request(TemplateId t, const std::optional<Persona>& p, const Instance& i,
                          std::string run_id = "run-1") {
  AnnotationRequest r;
  r.prompt = render(t, p ? &*p : nullptr, i);
  r.run_id = std::move(run_id);
  r.persona = p;
  r.instance = i;
  return r;
}

BackendConfig http_config(const std::string& url, int retries) {
  BackendConfig c;
  c.kind = BackendKind::http;
  c.endpoint_url = url;
  c.model_name = "test-model";
  c.max_retries = retries;
  c.request_timeout = std::chrono::milliseconds(5000);
  return c;
}

}  // namespace

TEST(Simulator, BinaryAlwaysParsesFirstTry) {
  SimulatorParams sim;
  sim.persona_bias_scale = 0.8;
  sim.noise_scale = 0.5;
  Annotator a(BackendConfig{}, std::make_shared<SimulatorBackend>(sim));
  const Persona p{"p1", "a nurse"};
  for (int k = 0; k < 20; ++k) {
    const auto r = a.annotate(request(TemplateId::T1, p, inst("i" + std::to_string(k), 2.4)));
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.attempts, 1);
    EXPECT_TRUE(r.raw_response == "TRUE" || r.raw_response == "FALSE");
  }
}

TEST(Simulator, DeterministicForIdenticalRequests) {
  SimulatorParams sim;
  sim.persona_bias_scale = 0.8;
  sim.noise_scale = 1.0;
  Annotator a(BackendConfig{}, std::make_shared<SimulatorBackend>(sim));
  const Persona p{"p1", "a nurse"};
  auto req = request(TemplateId::T3, p, inst("i1", 3.0));
  req.sampling_seed = 42;
  const auto x = a.annotate(req), y = a.annotate(req);
  EXPECT_EQ(x.raw_response, y.raw_response);
  EXPECT_EQ(x.label, y.label);
  EXPECT_EQ(x.attempts, y.attempts);
}

TEST(Simulator, NoiselessLabelsEqualRoundedHumanMean) {
  SimulatorParams sim;
  const Persona p{"p", "x"};
  for (double m : {1.0, 1.4, 2.0, 2.6, 3.49, 4.51, 5.0}) {
    const auto l = simulate_label(sim, &p, inst("i", m), LabelSchema::likert5(), 7);
    EXPECT_EQ(l.as_likert(), static_cast<int>(std::lround(m))) << m;
    const auto b = simulate_label(sim, &p, inst("i", m), LabelSchema::binary(), 7);
    EXPECT_EQ(b.as_binary(), m > 2.5 ? BinaryLabel::toxic : BinaryLabel::not_toxic);
  }
}

TEST(Simulator, PersonaBiasIsRunIndependent) {
  SimulatorParams sim;
  sim.persona_bias_scale = 1.0;
  const Persona p{"p7", "x"};
  for (int i = 0; i < 30; ++i) {
    const auto in = inst("i" + std::to_string(i), 1.0 + 0.13 * i);
    EXPECT_EQ(simulate_label(sim, &p, in, LabelSchema::likert5(), 1),
              simulate_label(sim, &p, in, LabelSchema::likert5(), 2));
  }
}

TEST(Simulator, PlantedGroupEffectRecovered) {
  SimulatorParams sim;
  sim.noise_scale = 0.2;
  sim.group_effects["black"][SubsetTag::aae] = -1.0;
  const auto v = expand_variants({"t1", "[ATOKEN] nurse who loves gardens"});
  // Rounding to the 1-5 scale adds per-instance jitter, so the +-0.1 band is
  // checked across many 50-instance draws rather than on a single one.
  Rng rng(3);
  int within = 0;
  double grand = 0.0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    double diff = 0.0;
    for (int i = 0; i < 50; ++i) {
      const auto in = inst("r" + std::to_string(rep) + "i" + std::to_string(i),
                           2.5 + 1.5 * uniform01(rng), {SubsetTag::aae});
      diff += simulate_label(sim, &v.black, in, LabelSchema::likert5(), rep).as_likert() -
              simulate_label(sim, &v.neutral, in, LabelSchema::likert5(), rep).as_likert();
    }
    diff /= 50.0;
    within += std::abs(diff + 1.0) <= 0.1;
    grand += diff;
  }
  EXPECT_NEAR(grand / reps, -1.0, 0.02);
  EXPECT_GE(within, 170) << "draws within +-0.1: " << within << " of " << reps;
  // Variants share the base persona's bias.
  sim.persona_bias_scale = 0.5;
  EXPECT_DOUBLE_EQ(persona_bias(sim, v.black.id), persona_bias(sim, v.neutral.id));
}

TEST(Simulator, MissingHumanMeanIsValidationError) {
  SimulatorParams sim;
  Instance in{"i", "t", {}, std::nullopt};
  EXPECT_THROW(simulate_score(sim, nullptr, in, 1), ValidationError);
  sim.base_source = BaseSource::constant;
  EXPECT_DOUBLE_EQ(simulate_score(sim, nullptr, in, 1), 3.0);
}

TEST(Batch, OrderPreservedWithParallelism) {
  SimulatorParams sim;
  sim.noise_scale = 0.7;
  BackendConfig cfg;
  cfg.max_parallel = 3;
  Annotator a(cfg, std::make_shared<SimulatorBackend>(sim));
  std::vector<AnnotationRequest> reqs;
  for (int i = 0; i < 10; ++i) {
    reqs.push_back(request(TemplateId::T2, std::nullopt, inst("i" + std::to_string(i), 2.5),
                           "r" + std::to_string(i)));
  }
  std::vector<std::size_t> sink_order;
  const auto res = a.run_batch(reqs, [&](std::size_t i, const AnnotationResult&) {
    sink_order.push_back(i);
  });
  ASSERT_EQ(res.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(res[i].run_id, "r" + std::to_string(i));
    EXPECT_EQ(res[i].provenance.instance_id, "i" + std::to_string(i));
    EXPECT_EQ(sink_order[i], i);
    EXPECT_EQ(res[i].label, a.annotate(reqs[i]).label);
  }
  EXPECT_TRUE(a.run_batch({}).empty());
}

TEST(Batch, SingleLabelDatasetSizedSmokeRun) {
  SimulatorParams sim;
  sim.noise_scale = 0.4;
  BackendConfig cfg;
  cfg.max_parallel = 4;
  Annotator a(cfg, std::make_shared<SimulatorBackend>(sim));
  std::vector<AnnotationRequest> reqs;
  for (int i = 0; i < 571; ++i) {
    reqs.push_back(request(TemplateId::T2, std::nullopt, inst("i" + std::to_string(i), 1 + i % 5)));
  }
  const auto res = a.run_batch(reqs);
  ASSERT_EQ(res.size(), 571u);
  for (const auto& r : res) EXPECT_TRUE(r.ok());
}

TEST(Batch, InputErrorsPropagate) {
  BackendConfig cfg;
  cfg.max_parallel = 2;
  Annotator a(cfg, std::make_shared<SimulatorBackend>(SimulatorParams{}));
  std::vector<AnnotationRequest> reqs;
  for (int i = 0; i < 6; ++i) {
    Instance in{"i" + std::to_string(i), "t", {}, std::nullopt};
    reqs.push_back(request(TemplateId::T2, std::nullopt, in));
  }
  EXPECT_THROW(a.run_batch(reqs), ValidationError);
}

TEST(Http, ParseExhaustionCountsAttempts) {
  std::atomic<int> calls{0};
  LocalServer server("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.set_content(json{{"choices", {{{"text", "maybe"}}}}}.dump(), "application/json");
  });
  Annotator a(http_config(server.url("/v1/completions"), 2),
              std::make_shared<HttpBackend>(http_config(server.url("/v1/completions"), 2)));
  try {
    a.annotate(request(TemplateId::T2, std::nullopt, inst("i1", 3)));
    FAIL() << "expected AnnotationError";
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.last_raw(), "maybe");
  }
  EXPECT_EQ(calls.load(), 3);
}

TEST(Http, WireFormatAndPointer) {
  json seen;
  std::string auth;
  std::mutex mu;
  LocalServer server("/gen", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"out":{"answer":" 4 "}})", "application/json");
  });
  ::setenv("PCROWD_TEST_KEY", "secret", 1);
  auto cfg = http_config(server.url("/gen"), 0);
  cfg.response_pointer = "/out/answer";
  cfg.api_key_env = "PCROWD_TEST_KEY";
  Annotator a(cfg, std::make_shared<HttpBackend>(cfg));
  const Persona p{"p", "a nurse"};
  auto req = request(TemplateId::T3, p, inst("i1", 3));
  req.sampling_seed = 99;
  const auto r = a.annotate(req);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.label->as_likert(), 4);
  EXPECT_EQ(r.backend_kind, BackendKind::http);
  EXPECT_EQ(seen["model"], "test-model");
  EXPECT_EQ(seen["prompt"], req.prompt.text);
  EXPECT_EQ(seen["allowed_choices"], json({"1", "2", "3", "4", "5"}));
  EXPECT_EQ(seen["max_tokens"], 4);
  EXPECT_EQ(seen["seed"], 99);
  EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 1.0);
  EXPECT_EQ(auth, "Bearer secret");
}

TEST(Http, ChatWrapping) {
  BackendConfig cfg = http_config("http://127.0.0.1:1/x", 0);
  cfg.chat_wrapping = ChatWrapping::chat_user_role;
  HttpBackend b(cfg);
  const auto body = b.request_body(request(TemplateId::T2, std::nullopt, inst("i", 3)));
  ASSERT_TRUE(body.contains("messages"));
  EXPECT_FALSE(body.contains("prompt"));
  EXPECT_EQ(body["messages"][0]["role"], "user");
}

TEST(Http, ServerErrorsRetriedClientErrorsFatal) {
  std::atomic<int> calls{0};
  LocalServer server("/c", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"text":"FALSE"}]})", "application/json");
  });
  auto cfg = http_config(server.url("/c"), 3);
  Annotator a(cfg, std::make_shared<HttpBackend>(cfg));
  const auto r = a.annotate(request(TemplateId::T2, std::nullopt, inst("i", 3)));
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(r.label->as_binary(), BinaryLabel::not_toxic);

  std::atomic<int> bad_calls{0};
  LocalServer bad("/c", [&](const httplib::Request&, httplib::Response& res) {
    ++bad_calls;
    res.status = 400;
  });
  auto bcfg = http_config(bad.url("/c"), 3);
  Annotator b(bcfg, std::make_shared<HttpBackend>(bcfg));
  EXPECT_THROW(b.annotate(request(TemplateId::T2, std::nullopt, inst("i", 3))), AnnotationError);
  EXPECT_EQ(bad_calls.load(), 1);
}

TEST(Http, BatchEmbedsPerRequestErrors) {
  LocalServer server("/c", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    const bool bad = body["prompt"].get<std::string>().find("BAD") != std::string::npos;
    res.set_content(json{{"choices", {{{"text", bad ? "???" : "TRUE"}}}}}.dump(),
                    "application/json");
  });
  auto cfg = http_config(server.url("/c"), 1);
  cfg.max_parallel = 2;
  Annotator a(cfg, std::make_shared<HttpBackend>(cfg));
  std::vector<AnnotationRequest> reqs;
  for (int i = 0; i < 4; ++i) {
    Instance in{"i" + std::to_string(i), i == 2 ? "BAD post" : "ok", {}, 3.0};
    reqs.push_back(request(TemplateId::T2, std::nullopt, in));
  }
  const auto res = a.run_batch(reqs);
  EXPECT_TRUE(res[0].ok());
  EXPECT_FALSE(res[2].ok());
  EXPECT_EQ(res[2].attempts, 2);
  EXPECT_FALSE(res[2].error.empty());
  EXPECT_TRUE(res[3].ok());
}

TEST(Http, UnreachableEndpointIsRetriedThenFails) {
  auto cfg = http_config("http://127.0.0.1:1/none", 1);
  cfg.request_timeout = std::chrono::milliseconds(500);
  Annotator a(cfg, std::make_shared<HttpBackend>(cfg));
  try {
    a.annotate(request(TemplateId::T2, std::nullopt, inst("i", 3)));
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.attempts(), 2);
  }
}

TEST(BackendConfig, Validation) {
  BackendConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_parallel = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = BackendConfig{};
  c.kind = BackendKind::http;
  EXPECT_THROW(c.validate(), ValidationError);  // no endpoint
  EXPECT_EQ(parse_backend_kind("simulator"), BackendKind::simulator);
  EXPECT_THROW(parse_backend_kind("gpt"), ValidationError);
}
