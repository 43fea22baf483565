#include "refbench/provider.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"

namespace refbench::provider {

namespace {

constexpr long long kWindowMs = 60'000;
constexpr long long kBackoffBaseMs = 500;

nlohmann::json messages_json(const std::vector<Message>& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) {
    arr.push_back({{"role", m.role}, {"content", m.content}});
  }
  return arr;
}

// Shared retry loop: rate-limit every attempt, back off exponentially on
// retryable failures, give up after max_retries retries.
template <typename Attempt>
ModelResponse complete_with_retry(const ModelConfig& cfg, RateLimiter& limiter,
                                  const ClockHooks& hooks, Attempt&& attempt) {
  for (int tries = 0;; ++tries) {
    limiter.acquire();
    long long t0 = hooks.now_ms();
    try {
      ModelResponse r = attempt();
      r.latency_ms = hooks.now_ms() - t0;
      return r;
    } catch (const ProviderError& e) {
      if (!e.retryable() || tries >= cfg.max_retries) throw;
      hooks.sleep_ms(kBackoffBaseMs << std::min(tries, 20));
    }
  }
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string cache_key(const std::string& api_model,
                      const std::vector<Message>& messages,
                      const SamplingParams& params) {
  nlohmann::json canon{
      {"model", api_model},
      {"messages", messages_json(messages)},
      {"params",
       {{"temperature", params.temperature},
        {"top_p", params.top_p},
        {"max_tokens", params.max_tokens}}},
  };
  return sha256_hex(canon.dump());
}

ClockHooks ClockHooks::real() {
  return {
      [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
      },
      [](long long ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); },
  };
}

ClockHooks ClockHooks::simulated(std::shared_ptr<long long> state) {
  return {
      [state] { return *state; },
      [state](long long ms) { *state += ms; },
  };
}

RateLimiter::RateLimiter(int limit_per_min, ClockHooks hooks)
    : limit_(limit_per_min), hooks_(std::move(hooks)) {
  if (limit_ <= 0) throw ConfigError("rate_limit must be > 0");
}

void RateLimiter::acquire() {
  for (;;) {
    long long wait = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      long long now = hooks_.now_ms();
      while (!window_.empty() && window_.front() <= now - kWindowMs) {
        window_.pop_front();
      }
      if (static_cast<int>(window_.size()) < limit_) {
        window_.push_back(now);
        return;
      }
      wait = window_.front() + kWindowMs - now;
    }
    hooks_.sleep_ms(wait > 0 ? wait : 1);
  }
}

MockProvider::MockProvider(ModelConfig cfg, nlohmann::json script, ClockHooks hooks)
    : cfg_(std::move(cfg)),
      script_(std::move(script)),
      hooks_(std::move(hooks)),
      limiter_(cfg_.rate_limit_per_min, hooks_),
      failures_left_(script_.value("fail_times", 0)) {}

std::unique_ptr<MockProvider> MockProvider::from_file(ModelConfig cfg,
                                                      const std::filesystem::path& script_path,
                                                      ClockHooks hooks) {
  return std::make_unique<MockProvider>(std::move(cfg), jsonl::parse_file(script_path),
                                        std::move(hooks));
}

ModelResponse MockProvider::attempt(const std::vector<Message>& messages) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (failures_left_ > 0) {
      --failures_left_;
      throw ProviderError("mock: scripted transport failure", /*retryable=*/true);
    }
  }

  const std::string fp = cache_key(cfg_.api_model, messages, cfg_.sampling);
  std::string text;
  bool found = false;

  if (auto it = script_.find("by_fingerprint"); it != script_.end() && it->contains(fp)) {
    text = (*it)[fp].get<std::string>();
    found = true;
  }
  if (!found && script_.contains("rules")) {
    std::string haystack;
    for (const auto& m : messages) {
      haystack += m.content;
      haystack += '\n';
    }
    for (const auto& rule : script_["rules"]) {
      bool all = true;
      for (const auto& needle : rule.at("contains")) {
        if (haystack.find(needle.get<std::string>()) == std::string::npos) {
          all = false;
          break;
        }
      }
      if (all) {
        text = rule.at("response").get<std::string>();
        found = true;
        break;
      }
    }
  }
  if (!found) {
    if (!script_.contains("default")) {
      std::string head = messages.empty() ? "" : messages.back().content.substr(0, 120);
      throw ProviderError("mock: no scripted response for input starting '" + head + "'",
                          /*retryable=*/false);
    }
    text = script_["default"].get<std::string>();
  }

  ModelResponse r;
  r.text = text;
  r.model = cfg_.name;
  r.empty_body = text.empty();
  r.fingerprint = fp;
  r.timestamp = 0;
  return r;
}

ModelResponse MockProvider::complete(const std::vector<Message>& messages) {
  ModelResponse r =
      complete_with_retry(cfg_, limiter_, hooks_, [&] { return attempt(messages); });
  r.latency_ms = 0;  // mock runs are byte-reproducible
  return r;
}

bool is_mock_endpoint(const std::string& endpoint) {
  return endpoint.rfind("mock://", 0) == 0;
}

HttpProvider::HttpProvider(ModelConfig cfg, ClockHooks hooks)
    : cfg_(std::move(cfg)), hooks_(std::move(hooks)), limiter_(cfg_.rate_limit_per_min, hooks_) {
  const std::string& ep = cfg_.endpoint;
  auto scheme_end = ep.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint '" + ep + "' has no scheme");
  }
  auto path_start = ep.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_url_ = ep;
  } else {
    base_url_ = ep.substr(0, path_start);
    path_prefix_ = ep.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

ModelResponse HttpProvider::attempt(const std::vector<Message>& messages) {
  httplib::Headers headers;
  if (!cfg_.auth_env.empty()) {
    const char* key = std::getenv(cfg_.auth_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ProviderError("auth env var '" + cfg_.auth_env + "' is not set",
                          /*retryable=*/false);
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  nlohmann::json body{
      {"model", cfg_.api_model},
      {"messages", messages_json(messages)},
      {"temperature", cfg_.sampling.temperature},
  };
  if (cfg_.sampling.top_p != 1.0) body["top_p"] = cfg_.sampling.top_p;
  if (cfg_.sampling.max_tokens > 0) body["max_tokens"] = cfg_.sampling.max_tokens;

  httplib::Client client(base_url_);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                         "application/json");
  if (!res) {
    throw ProviderError("transport failure contacting " + base_url_ + ": " +
                            httplib::to_string(res.error()),
                        /*retryable=*/true);
  }
  if (res->status == 401 || res->status == 403) {
    throw ProviderError("auth rejected by " + base_url_ + " (status " +
                            std::to_string(res->status) + ")",
                        /*retryable=*/false);
  }
  if (res->status == 429 || res->status >= 500) {
    throw ProviderError("endpoint busy (status " + std::to_string(res->status) + ")",
                        /*retryable=*/true);
  }
  if (res->status != 200) {
    throw ProviderError("endpoint error (status " + std::to_string(res->status) +
                            "): " + res->body.substr(0, 200),
                        /*retryable=*/false);
  }

  ModelResponse r;
  r.model = cfg_.name;
  r.fingerprint = cache_key(cfg_.api_model, messages, cfg_.sampling);
  r.timestamp = static_cast<long long>(std::time(nullptr));
  try {
    auto parsed = nlohmann::json::parse(res->body);
    const auto& choices = parsed.at("choices");
    if (choices.empty()) {
      r.empty_body = true;
      return r;
    }
    const auto& content = choices.at(0).at("message").at("content");
    r.text = content.is_null() ? "" : content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed completion body: ") + e.what(),
                        /*retryable=*/false);
  }
  r.empty_body = r.text.empty();
  return r;
}

ModelResponse HttpProvider::complete(const std::vector<Message>& messages) {
  return complete_with_retry(cfg_, limiter_, hooks_, [&] { return attempt(messages); });
}

ResponseCache::ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
  if (!std::filesystem::exists(file_)) return;
  std::ifstream in(file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // Tolerate torn lines (crash mid-append); they are simply re-fetched.
    try {
      auto row = nlohmann::json::parse(line);
      auto fp = row.at("fingerprint").get<std::string>();
      index_[std::move(fp)] = std::move(row);
    } catch (const nlohmann::json::exception&) {
      ++malformed_;
    }
  }
}

bool ResponseCache::contains(const std::string& fingerprint) const {
  std::lock_guard<std::mutex> lock(mu_);
  return index_.count(fingerprint) > 0;
}

std::optional<ModelResponse> ResponseCache::load(const std::string& fingerprint) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(fingerprint);
  if (it == index_.end()) return std::nullopt;
  const auto& row = it->second;
  ModelResponse r;
  r.text = row.at("text").get<std::string>();
  r.model = row.at("model").get<std::string>();
  r.latency_ms = row.value("latency_ms", 0LL);
  r.empty_body = row.value("empty_body", false);
  r.fingerprint = fingerprint;
  r.timestamp = row.value("timestamp", 0LL);
  r.cached = true;
  return r;
}

void ResponseCache::store(const ModelResponse& response) {
  nlohmann::json row{
      {"fingerprint", response.fingerprint}, {"text", response.text},
      {"model", response.model},            {"latency_ms", response.latency_ms},
      {"timestamp", response.timestamp},    {"empty_body", response.empty_body},
  };
  std::lock_guard<std::mutex> lock(mu_);
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  std::ofstream out(file_, std::ios::app);
  if (!out) throw DataError("cannot append to cache " + file_.string());
  out << jsonl::dump_line(row) << '\n';
  index_[response.fingerprint] = std::move(row);
}

CachingProvider::CachingProvider(std::unique_ptr<Provider> inner,
                                 const std::filesystem::path& cache_dir)
    : inner_(std::move(inner)), cache_(cache_dir / (inner_->config().name + ".jsonl")) {}

ModelResponse CachingProvider::complete(const std::vector<Message>& messages) {
  const auto& cfg = inner_->config();
  const std::string fp = cache_key(cfg.api_model, messages, cfg.sampling);
  if (auto hit = cache_.load(fp)) {
    ++hits_;
    return *hit;
  }
  ModelResponse r = inner_->complete(messages);
  r.fingerprint = fp;
  cache_.store(r);
  ++misses_;
  return r;
}

std::unique_ptr<Provider> make_provider(const ModelConfig& cfg,
                                        const std::filesystem::path& cache_dir,
                                        ClockHooks hooks) {
  std::unique_ptr<Provider> base;
  if (is_mock_endpoint(cfg.endpoint)) {
    base = MockProvider::from_file(cfg, cfg.endpoint.substr(7), std::move(hooks));
  } else {
    base = std::make_unique<HttpProvider>(cfg, std::move(hooks));
  }
  if (cache_dir.empty()) return base;
  return std::make_unique<CachingProvider>(std::move(base), cache_dir);
}

}  // namespace refbench::provider
