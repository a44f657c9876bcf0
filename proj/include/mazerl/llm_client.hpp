#ifndef MAZERL_LLM_CLIENT_HPP_
#define MAZERL_LLM_CLIENT_HPP_

#include <atomic>
#include <stdexcept>
#include <string>

namespace mazerl {

struct LlmClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_retries = 3;
  double timeout_seconds = 60.0;
  std::string cache_dir = "llm_cache";
  int max_concurrent_requests = 4;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal chat-completion client: one user message per request, JSON
// body {model, messages[], temperature}. Responses are cached on disk
// keyed by the hash of (model, temperature, prompt); a cache hit makes
// no network call.
class LlmClient {
 public:
  explicit LlmClient(LlmClientConfig config);

  // Returns the assistant message content. Throws TransportError after
  // retries are exhausted.
  std::string complete(const std::string& prompt);

  std::string cache_key(const std::string& prompt) const;
  int64_t network_calls() const { return network_calls_.load(); }
  const LlmClientConfig& config() const { return config_; }

 private:
  std::string post_request(const std::string& body);

  LlmClientConfig config_;
  std::atomic<int64_t> network_calls_{0};
};

}  // namespace mazerl

#endif  // MAZERL_LLM_CLIENT_HPP_
