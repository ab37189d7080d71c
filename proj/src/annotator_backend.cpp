#include "pcrowd/annotator_backend.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "pcrowd/http.hpp"

namespace pcrowd {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::http ? "http" : "simulator";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "http") return BackendKind::http;
  if (text == "simulator") return BackendKind::simulator;
  throw ValidationError("unknown backend kind '" + std::string(text) + "'");
}

ChatWrapping parse_chat_wrapping(std::string_view text) {
  if (text == "plain") return ChatWrapping::plain;
  if (text == "chat_user_role") return ChatWrapping::chat_user_role;
  throw ValidationError("unknown chat_wrapping '" + std::string(text) + "'");
}

void BackendConfig::validate() const {
  if (temperature < 0) throw ValidationError("temperature must be >= 0");
  if (max_parallel < 1) throw ValidationError("max_parallel must be >= 1");
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (kind == BackendKind::http && endpoint_url.empty()) {
    throw ValidationError("http backend requires endpoint_url");
  }
}

void SimulatorParams::validate() const {
  if (persona_bias_scale < 0 || noise_scale < 0 || embedding_bias_scale < 0) {
    throw ValidationError("simulator scales must be non-negative");
  }
}

// ---------------------------------------------------------------- simulator

double persona_bias(const SimulatorParams& params, std::string_view persona_id) {
  Rng rng(combine_seeds(params.bias_seed ^ 0x5eedb1a5ULL, base_persona_id(persona_id)));
  return standard_normal(rng);
}

namespace {

std::vector<std::string> lower_word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double group_shift(const SimulatorParams& params, const Persona& persona,
                   const Instance& instance) {
  if (params.group_effects.empty()) return 0.0;
  const auto tokens = lower_word_tokens(persona.description);
  double shift = 0.0;
  for (const auto& [word, per_subset] : params.group_effects) {
    if (std::find(tokens.begin(), tokens.end(), to_lower(word)) == tokens.end()) continue;
    for (const auto& [tag, delta] : per_subset) {
      if (instance.has(tag)) shift += delta;
    }
  }
  return shift;
}

double embedding_term(const SimulatorParams& params, std::string_view persona_id,
                      const Instance& instance) {
  if (params.embedding_bias_scale == 0.0) return 0.0;
  auto it = params.persona_vectors.find(std::string(base_persona_id(persona_id)));
  if (it == params.persona_vectors.end()) {
    throw ValidationError("simulator: no embedding vector for persona '" +
                          std::string(persona_id) + "'");
  }
  const auto& v = it->second;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) return 0.0;
  // Direction for this instance, drawn from N(0, I); w.v/|v| is N(0,1).
  Rng rng(combine_seeds(params.bias_seed ^ 0xd1ec7104ULL, instance.instance_id));
  double dot = 0.0;
  for (double x : v) dot += standard_normal(rng) * x;
  return params.embedding_bias_scale * dot / std::sqrt(norm);
}

}  // namespace

double simulate_score(const SimulatorParams& params, const Persona* persona,
                      const Instance& instance, std::uint64_t run_seed) {
  double base = params.constant_base;
  if (params.base_source == BaseSource::human_mean) {
    if (!instance.human_mean) {
      throw ValidationError("simulator: instance '" + instance.instance_id +
                            "' has no human reference score");
    }
    base = *instance.human_mean;
  }
  double score = base;
  const std::string persona_id = persona ? persona->id : std::string();
  if (persona) {
    score += params.persona_bias_scale * persona_bias(params, persona->id);
    score += group_shift(params, *persona, instance);
    score += embedding_term(params, persona->id, instance);
  }
  if (params.noise_scale > 0.0) {
    std::uint64_t s = combine_seeds(run_seed, persona_id);
    s = combine_seeds(s, instance.instance_id);
    Rng rng(s);
    score += params.noise_scale * standard_normal(rng);
  }
  return score;
}

Label simulate_label(const SimulatorParams& params, const Persona* persona,
                     const Instance& instance, const LabelSchema& schema,
                     std::uint64_t run_seed) {
  const double score = simulate_score(params, persona, instance, run_seed);
  if (schema.kind == LabelKind::binary) {
    return Label::from_binary(score > 2.5 ? BinaryLabel::toxic : BinaryLabel::not_toxic);
  }
  const long r = std::lround(score);
  return Label::likert(static_cast<int>(std::clamp(r, 1L, 5L)));
}

SimulatorBackend::SimulatorBackend(SimulatorParams params) : params_(std::move(params)) {
  params_.validate();
}

std::string SimulatorBackend::complete(const AnnotationRequest& request) {
  const Persona* persona = request.persona ? &*request.persona : nullptr;
  return simulate_label(params_, persona, request.instance, request.prompt.schema,
                        effective_run_seed(request))
      .text();
}

std::uint64_t effective_run_seed(const AnnotationRequest& request) {
  return request.sampling_seed ? *request.sampling_seed : fnv1a64(request.run_id);
}

// ---------------------------------------------------------------- http

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

json HttpBackend::request_body(const AnnotationRequest& request) const {
  json body{{"model", config_.model_name},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_tokens},
            {"allowed_choices", request.prompt.schema.options}};
  if (config_.chat_wrapping == ChatWrapping::chat_user_role) {
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt.text}}});
  } else {
    body["prompt"] = request.prompt.text;
  }
  if (request.sampling_seed) body["seed"] = *request.sampling_seed;
  return body;
}

std::string HttpBackend::complete(const AnnotationRequest& request) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  http::Response res;
  try {
    res = http::post_json(config_.endpoint_url, request_body(request), config_.request_timeout,
                          headers);
  } catch (const IoError& e) {
    throw RetryableBackendError(e.what());
  }
  if (res.status == 429 || res.status >= 500) {
    throw RetryableBackendError("HTTP " + std::to_string(res.status) + " from " +
                                config_.endpoint_url);
  }
  if (res.status < 200 || res.status >= 300) {
    throw IoError("HTTP " + std::to_string(res.status) + " from " + config_.endpoint_url);
  }
  json parsed;
  try {
    parsed = json::parse(res.body);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed response body: ") + e.what());
  }
  const json::json_pointer ptr(config_.response_pointer);
  if (!parsed.contains(ptr) || !parsed.at(ptr).is_string()) {
    throw IoError("response has no string at " + config_.response_pointer);
  }
  return parsed.at(ptr).get<std::string>();
}

// ---------------------------------------------------------------- annotator

Annotator::Annotator(BackendConfig config, std::shared_ptr<CompletionBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
  config_.validate();
  if (!backend_) throw ValidationError("annotator requires a backend");
}

AnnotationResult Annotator::annotate(const AnnotationRequest& request) const {
  AnnotationResult result;
  result.run_id = request.run_id;
  result.provenance = request.prompt.provenance;
  result.backend_kind = backend_->kind();

  std::string last_error;
  const int max_attempts = config_.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    result.attempts = attempt;
    try {
      result.raw_response = backend_->complete(request);
    } catch (const RetryableBackendError& e) {
      last_error = e.what();
      continue;
    } catch (const IoError& e) {
      throw AnnotationError(e.what(), attempt, result.raw_response);
    }
    try {
      result.label = parse_response(result.raw_response, request.prompt.schema,
                                    config_.strict_parsing);
      return result;
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    }
  }
  throw AnnotationError("no valid label after " + std::to_string(max_attempts) +
                            " attempts for run '" + request.run_id + "', instance '" +
                            request.prompt.provenance.instance_id + "': " + last_error,
                        max_attempts, result.raw_response);
}

std::vector<AnnotationResult> Annotator::run_batch(const std::vector<AnnotationRequest>& requests,
                                                   const ResultSink& sink) const {
  const std::size_t n = requests.size();
  std::vector<AnnotationResult> results(n);
  if (n == 0) return results;

  std::mutex fatal_mu;
  std::exception_ptr fatal;
  auto has_fatal = [&] {
    std::lock_guard lock(fatal_mu);
    return fatal != nullptr;
  };
  auto run_one = [&](std::size_t i) {
    try {
      results[i] = annotate(requests[i]);
    } catch (const AnnotationError& e) {
      AnnotationResult r;
      r.run_id = requests[i].run_id;
      r.provenance = requests[i].prompt.provenance;
      r.backend_kind = backend_->kind();
      r.attempts = e.attempts();
      r.raw_response = e.last_raw();
      r.error = e.what();
      results[i] = std::move(r);
    } catch (const std::exception& e) {
      // Not a backend failure (e.g. a simulator input error): stop the batch
      // after the workers drain, and rethrow it on the calling thread.
      {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
      }
      AnnotationResult r;
      r.run_id = requests[i].run_id;
      r.provenance = requests[i].prompt.provenance;
      r.error = e.what();
      results[i] = std::move(r);
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_parallel), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      run_one(i);
      if (has_fatal()) std::rethrow_exception(fatal);
      if (sink) sink(i, results[i]);
    }
    return results;
  }

  std::vector<char> done(n, 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        run_one(i);
        {
          std::lock_guard lock(mu);
          done[i] = 1;
        }
        cv.notify_all();
      }
    });
  }
  // Hand completed results to the sink strictly in request order.
  for (std::size_t i = 0; i < n; ++i) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return done[i] != 0; });
    lock.unlock();
    if (has_fatal()) break;
    if (sink) sink(i, results[i]);
  }
  if (has_fatal()) {
    for (auto& t : pool) t.join();
    std::rethrow_exception(fatal);
  }
  return results;
}

std::shared_ptr<CompletionBackend> make_backend(const BackendConfig& config,
                                                const SimulatorParams& sim) {
  if (config.kind == BackendKind::http) return std::make_shared<HttpBackend>(config);
  return std::make_shared<SimulatorBackend>(sim);
}

}  // namespace pcrowd
