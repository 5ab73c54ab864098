#pragma once

// Chat-completions client over cpp-httplib. Split from llm.hpp so tests
// and tools that only need the mocks don't pay for the HTTP dependency.

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "scamdetect/llm.hpp"

namespace scamdetect {

namespace detail {

struct ParsedUrl {
  std::string scheme;
  std::string host_port;  // host[:port], what httplib::Client wants
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  ParsedUrl p;
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint must start with http:// or https://");
  p.scheme = url.substr(0, scheme_end);
  if (p.scheme != "http" && p.scheme != "https")
    throw ConfigError("unsupported endpoint scheme \"" + p.scheme + "\"");
  std::size_t rest = scheme_end + 3;
  std::size_t slash = url.find('/', rest);
  if (slash == std::string::npos) {
    p.host_port = url.substr(rest);
    p.path = "/";
  } else {
    p.host_port = url.substr(rest, slash - rest);
    p.path = url.substr(slash);
  }
  if (p.host_port.empty()) throw ConfigError("endpoint is missing a host");
  return p;
}

}  // namespace detail

// Talks the OpenAI-style /v1/chat/completions dialect: one user message per
// request, answer read from choices[0].message.content. Retries are the
// evaluator's job; every call here is a single round trip.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(const BackendConfig& cfg) : cfg_(cfg) {
    if (cfg.model.empty()) throw ConfigError("remote backend needs a model name");
    url_ = detail::parse_url(cfg.endpoint);
    if (url_.scheme == "https") {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
      throw ConfigError("built without TLS support; use an http:// endpoint");
#endif
    }
    if (!cfg.api_key_env.empty()) {
      const char* key = std::getenv(cfg.api_key_env.c_str());
      if (!key || !*key)
        throw ConfigError("environment variable " + cfg.api_key_env +
                          " is not set");
      api_key_ = key;
    }
  }

  // Participates in the evaluator's cache key, so it must pin everything
  // that can change a completion: endpoint, model, and temperature.
  std::string id() const override {
    return "http:" + cfg_.endpoint + ":" + cfg_.model + ":t" +
           std::to_string(cfg_.temperature);
  }

 private:
  std::string do_complete(const std::string& prompt, int) override {
    nlohmann::json body{
        {"model", cfg_.model},
        {"temperature", cfg_.temperature},
        {"messages",
         nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
    };

    httplib::Client client((url_.scheme + "://" + url_.host_port).c_str());
    auto timeout = std::chrono::milliseconds(
        static_cast<long long>(cfg_.timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key_.empty())
      headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(url_.path, headers, body.dump(), "application/json");
    if (!res)
      throw BackendError("no response from " + cfg_.endpoint + ": " +
                         httplib::to_string(res.error()));
    if (res->status != 200)
      throw BackendError("HTTP " + std::to_string(res->status) + " from " +
                         cfg_.endpoint);
    try {
      nlohmann::json j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed completion payload: ") +
                         e.what());
    }
  }

  BackendConfig cfg_;
  detail::ParsedUrl url_;
  std::string api_key_;
};

}  // namespace scamdetect
