#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pcrowd/common.hpp"
#include "pcrowd/datasets.hpp"
#include "pcrowd/persona_corpus.hpp"
#include "pcrowd/prompting.hpp"

namespace pcrowd {

enum class BackendKind { http, simulator };
enum class ChatWrapping { plain, chat_user_role };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);
ChatWrapping parse_chat_wrapping(std::string_view text);

struct BackendConfig {
  BackendKind kind = BackendKind::simulator;
  std::string endpoint_url;  // http only, full URL including path
  std::string model_name = "simulator";
  double temperature = 1.0;
  int max_retries = 3;
  std::chrono::milliseconds request_timeout{30000};
  int max_parallel = 1;
  ChatWrapping chat_wrapping = ChatWrapping::plain;
  // JSON pointer to the generated text in the response body.
  std::string response_pointer = "/choices/0/text";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_tokens = 4;
  bool strict_parsing = false;

  void validate() const;
};

struct AnnotationRequest {
  RenderedPrompt prompt;
  std::string run_id;
  std::optional<std::uint64_t> sampling_seed;
  // Inputs the prompt was rendered from. The simulator reads them; remote
  // backends only see the prompt text.
  std::optional<Persona> persona;
  Instance instance;
};

struct AnnotationResult {
  std::string run_id;
  PromptProvenance provenance;
  std::string raw_response;
  std::optional<Label> label;
  int attempts = 0;
  BackendKind backend_kind = BackendKind::simulator;
  // Non-empty when the request failed (run_batch only).
  std::string error;

  bool ok() const { return label.has_value() && error.empty(); }
};

// Raised by Annotator::annotate when a request cannot produce a label.
class AnnotationError : public IoError {
 public:
  AnnotationError(const std::string& what, int attempts, std::string last_raw)
      : IoError(what), attempts_(attempts), last_raw_(std::move(last_raw)) {}
  int attempts() const { return attempts_; }
  const std::string& last_raw() const { return last_raw_; }

 private:
  int attempts_;
  std::string last_raw_;
};

// Transport failure worth retrying (connection errors, 429, 5xx).
class RetryableBackendError : public IoError {
 public:
  using IoError::IoError;
};

// Produces one raw response string per call. Implementations must be safe to
// call concurrently.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const AnnotationRequest& request) = 0;
  virtual BackendKind kind() const = 0;
};

enum class BaseSource { human_mean, constant };

struct SimulatorParams {
  double persona_bias_scale = 0.0;  // sigma_p
  double noise_scale = 0.0;         // sigma_n
  // marker word -> subset -> additive shift
  std::map<std::string, std::map<SubsetTag, double>> group_effects;
  BaseSource base_source = BaseSource::human_mean;
  double constant_base = 3.0;
  // Mixed into the persona-bias seed so that a configuration can draw a fresh
  // set of latent persona biases; within one configuration the bias depends
  // only on the persona id.
  std::uint64_t bias_seed = 0;
  // Per-instance linear read-out of the persona's embedding vector.
  double embedding_bias_scale = 0.0;
  std::unordered_map<std::string, std::vector<double>> persona_vectors;

  void validate() const;
};

// Latent standard-normal persona bias. Variants of one template ("id#black")
// share the bias of their base id.
double persona_bias(const SimulatorParams& params, std::string_view persona_id);

// Unrounded latent score for one (persona, instance, run) triple.
double simulate_score(const SimulatorParams& params, const Persona* persona,
                      const Instance& instance, std::uint64_t run_seed);

Label simulate_label(const SimulatorParams& params, const Persona* persona,
                     const Instance& instance, const LabelSchema& schema, std::uint64_t run_seed);

class SimulatorBackend final : public CompletionBackend {
 public:
  explicit SimulatorBackend(SimulatorParams params);
  std::string complete(const AnnotationRequest& request) override;
  BackendKind kind() const override { return BackendKind::simulator; }

 private:
  SimulatorParams params_;
};

// OpenAI-style completion endpoint with optional constrained choice.
class HttpBackend final : public CompletionBackend {
 public:
  explicit HttpBackend(BackendConfig config);
  std::string complete(const AnnotationRequest& request) override;
  BackendKind kind() const override { return BackendKind::http; }

  // Request body for one prompt; exposed for wire-format tests.
  nlohmann::json request_body(const AnnotationRequest& request) const;

 private:
  BackendConfig config_;
  std::string api_key_;
};

std::uint64_t effective_run_seed(const AnnotationRequest& request);

class Annotator {
 public:
  Annotator(BackendConfig config, std::shared_ptr<CompletionBackend> backend);

  // Retries parse failures and retryable transport errors up to max_retries
  // times with the identical prompt. Throws AnnotationError on exhaustion.
  AnnotationResult annotate(const AnnotationRequest& request) const;

  using ResultSink = std::function<void(std::size_t index, const AnnotationResult&)>;

  // Results in request order, at most max_parallel requests in flight.
  // `sink`, when set, is invoked on the calling thread in request order.
  std::vector<AnnotationResult> run_batch(const std::vector<AnnotationRequest>& requests,
                                          const ResultSink& sink = {}) const;

  const BackendConfig& config() const { return config_; }

 private:
  BackendConfig config_;
  std::shared_ptr<CompletionBackend> backend_;
};

std::shared_ptr<CompletionBackend> make_backend(const BackendConfig& config,
                                                const SimulatorParams& sim);

}  // namespace pcrowd
