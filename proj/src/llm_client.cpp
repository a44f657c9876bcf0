#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "mazerl/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mazerl/rng.hpp"

namespace mazerl {

namespace {

struct ParsedUrl {
  std::string scheme_host_port;  // e.g. "https://api.openai.com"
  std::string path;              // e.g. "/v1/chat/completions"
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("llm: bad endpoint url " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = url;
    out.path = "/";
  } else {
    out.scheme_host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

std::string extract_content(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body);
  return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

}  // namespace

LlmClient::LlmClient(LlmClientConfig config) : config_(std::move(config)) {
  if (!config_.cache_dir.empty()) std::filesystem::create_directories(config_.cache_dir);
}

std::string LlmClient::cache_key(const std::string& prompt) const {
  char temp_buf[32];
  std::snprintf(temp_buf, sizeof(temp_buf), "%.6g", config_.temperature);
  uint64_t h = fnv1a64(config_.model);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(temp_buf, h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(prompt, h);
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

std::string LlmClient::post_request(const std::string& body) {
  const ParsedUrl url = parse_url(config_.endpoint);
  httplib::Client client(url.scheme_host_port);
  const auto timeout = std::chrono::milliseconds(
      static_cast<int64_t>(config_.timeout_seconds * 1000.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);

  httplib::Headers headers = {{"Content-Type", "application/json"}};
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(250 << std::min(attempt, 5)));
    network_calls_.fetch_add(1);
    auto res = client.Post(url.path, headers, body, "application/json");
    if (res && res->status == 200) return res->body;
    if (res)
      last_error = "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    else
      last_error = "transport failure (" + httplib::to_string(res.error()) + ")";
  }
  throw TransportError("llm: request failed after retries: " + last_error);
}

std::string LlmClient::complete(const std::string& prompt) {
  const std::string key = cache_key(prompt);
  const std::filesystem::path cache_file =
      std::filesystem::path(config_.cache_dir) / (key + ".json");

  if (!config_.cache_dir.empty() && std::filesystem::exists(cache_file)) {
    std::ifstream in(cache_file);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return extract_content(body);
  }

  nlohmann::json request = {
      {"model", config_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", config_.temperature},
  };
  const std::string body = post_request(request.dump());

  std::string content;
  try {
    content = extract_content(body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("llm: malformed response: ") + e.what());
  }
  if (!config_.cache_dir.empty()) {
    std::ofstream out(cache_file);
    out << body;
  }
  return content;
}

}  // namespace mazerl
