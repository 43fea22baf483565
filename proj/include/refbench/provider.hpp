#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace refbench::provider {

struct Message {
  std::string role;  // "user" | "assistant" | "system"
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct SamplingParams {
  double temperature = 0.0;  // deterministic where the endpoint allows
  double top_p = 1.0;
  int max_tokens = 0;  // 0 = endpoint default
};

struct ModelConfig {
  std::string name;       // reporting label, unique per run
  std::string endpoint;   // "https://host[/base]" or "mock://script.json"
  std::string api_model;  // provider-side model string
  std::string auth_env;   // env var holding the API key ("" = no auth)
  SamplingParams sampling;
  int max_retries = 3;
  int rate_limit_per_min = 60;
};

struct ModelResponse {
  std::string text;
  std::string model;  // config name
  long long latency_ms = 0;
  bool cached = false;
  bool empty_body = false;  // endpoint returned no text; judged as "missing"
  std::string fingerprint;
  long long timestamp = 0;  // unix seconds; mock runs report 0 for reproducibility
};

std::string sha256_hex(std::string_view bytes);

// Digest of (model, full message list, sampling params) over a canonical JSON
// encoding; any byte change in any message changes the key.
std::string cache_key(const std::string& api_model,
                      const std::vector<Message>& messages,
                      const SamplingParams& params);

// Injectable time sources so retry backoff and rate limiting are testable with
// a simulated clock.
struct ClockHooks {
  std::function<long long()> now_ms;
  std::function<void(long long)> sleep_ms;

  static ClockHooks real();
  // now_ms reads *state; sleep_ms advances it. No real waiting.
  static ClockHooks simulated(std::shared_ptr<long long> state);
};

// Sliding-window limiter: never more than limit acquisitions in any 60 s span.
class RateLimiter {
 public:
  RateLimiter(int limit_per_min, ClockHooks hooks);
  void acquire();

 private:
  int limit_;
  ClockHooks hooks_;
  std::deque<long long> window_;
  std::mutex mu_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  // Full contract: rate-limited, retries retryable failures with exponential
  // backoff up to config().max_retries, then surfaces the error.
  virtual ModelResponse complete(const std::vector<Message>& messages) = 0;
  virtual const ModelConfig& config() const = 0;
};

// Scripted offline provider. Script shape:
//   { "by_fingerprint": {"<hex>": "text", ...},
//     "rules": [{"contains": ["needle", ...], "response": "text"}, ...],
//     "default": "text",
//     "fail_times": 0 }
// Resolution order: fingerprint map, then first rule whose needles all occur in
// the concatenated message contents, then "default". No match and no default is
// a hard error (keeps tests honest). fail_times injects that many retryable
// transport failures before the first success.
class MockProvider : public Provider {
 public:
  MockProvider(ModelConfig cfg, nlohmann::json script, ClockHooks hooks);
  static std::unique_ptr<MockProvider> from_file(ModelConfig cfg,
                                                 const std::filesystem::path& script_path,
                                                 ClockHooks hooks);

  ModelResponse complete(const std::vector<Message>& messages) override;
  const ModelConfig& config() const override { return cfg_; }

 private:
  ModelResponse attempt(const std::vector<Message>& messages);

  ModelConfig cfg_;
  nlohmann::json script_;
  ClockHooks hooks_;
  RateLimiter limiter_;
  int failures_left_;
  std::mutex mu_;
};

// OpenAI-style chat-completions client: POST {endpoint}/chat/completions.
class HttpProvider : public Provider {
 public:
  HttpProvider(ModelConfig cfg, ClockHooks hooks);

  ModelResponse complete(const std::vector<Message>& messages) override;
  const ModelConfig& config() const override { return cfg_; }

 private:
  ModelResponse attempt(const std::vector<Message>& messages);

  ModelConfig cfg_;
  ClockHooks hooks_;
  RateLimiter limiter_;
  std::string base_url_;     // scheme://host[:port]
  std::string path_prefix_;  // leading path component of the endpoint, if any
};

// Append-only JSONL response store keyed by fingerprint.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path file);

  bool contains(const std::string& fingerprint) const;
  // Returns the stored response with cached=true; nullopt on miss.
  std::optional<ModelResponse> load(const std::string& fingerprint) const;
  void store(const ModelResponse& response);

  std::size_t size() const { return index_.size(); }
  std::size_t malformed_lines() const { return malformed_; }

 private:
  std::filesystem::path file_;
  std::unordered_map<std::string, nlohmann::json> index_;
  std::size_t malformed_ = 0;
  mutable std::mutex mu_;
};

class CachingProvider : public Provider {
 public:
  CachingProvider(std::unique_ptr<Provider> inner, const std::filesystem::path& cache_dir);

  ModelResponse complete(const std::vector<Message>& messages) override;
  const ModelConfig& config() const override { return inner_->config(); }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::unique_ptr<Provider> inner_;
  ResponseCache cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// endpoint scheme selects the implementation; nonempty cache_dir wraps it in a
// CachingProvider (cache file cache_dir/<name>.jsonl).
std::unique_ptr<Provider> make_provider(const ModelConfig& cfg,
                                        const std::filesystem::path& cache_dir,
                                        ClockHooks hooks);

bool is_mock_endpoint(const std::string& endpoint);

}  // namespace refbench::provider
