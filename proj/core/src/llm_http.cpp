#include <chrono>
#include <thread>

#include "fedtox/error.hpp"
#include "fedtox/llm_baseline.hpp"

#include <httplib.h>
#include <json.hpp>

namespace fedtox {
namespace {

class HttpTransport final : public CompletionTransport {
 public:
  explicit HttpTransport(EndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.base_url.rfind("http://", 0) != 0)
      throw ConfigError("endpoint base_url must start with http:// (got '" + config_.base_url + "')");
    while (!config_.base_url.empty() && config_.base_url.back() == '/') config_.base_url.pop_back();
  }

  std::string generate(const std::string& prompt) override {
    const nlohmann::json body = {{"model", config_.model}, {"prompt", prompt}, {"stream", false}};
    const std::string payload = body.dump();
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
      httplib::Client client(config_.base_url);
      const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
      const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
      const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
      client.set_connection_timeout(sec.count(), usec.count());
      client.set_read_timeout(sec.count(), usec.count());
      client.set_write_timeout(sec.count(), usec.count());
      auto res = client.Post("/api/generate", payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      try {
        const auto reply = nlohmann::json::parse(res->body);
        const auto it = reply.find("response");
        if (it == reply.end() || !it->is_string()) return std::string();
        return it->get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed reply: ") + e.what();
      }
    }
    throw EndpointUnavailable(config_.base_url + "/api/generate: " + last_error);
  }

 private:
  EndpointConfig config_;
};

}  // namespace

std::unique_ptr<CompletionTransport> make_http_transport(const EndpointConfig& config) {
  return std::make_unique<HttpTransport>(config);
}

}  // namespace fedtox
