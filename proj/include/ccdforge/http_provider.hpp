#pragma once

// Remote chat-completion backend. Kept in its own header so that library
// users (and the test suite) only pay for the HTTP client when they
// actually construct one.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "ccdforge/gateway.hpp"
#include "ccdforge/result.hpp"

#include <httplib.h>

namespace ccdforge {

struct HttpProviderConfig {
    std::string base_url;  // scheme + host[:port], e.g. "https://api.example.com"
    std::string model;
    std::string api_key;              // normally injected from CCDFORGE_API_KEY
    std::string completions_path = "/v1/chat/completions";
    std::chrono::seconds timeout{60};
};

/// Read the environment overrides the CLI contract promises: the key is
/// only ever taken from the environment, never from flags or files.
inline HttpProviderConfig apply_env(HttpProviderConfig config) {
    if (const char* url = std::getenv("CCDFORGE_BASE_URL"); url != nullptr && *url != '\0') {
        config.base_url = url;
    }
    if (const char* key = std::getenv("CCDFORGE_API_KEY"); key != nullptr) {
        config.api_key = key;
    }
    return config;
}

/// JSON chat-completion client: posts messages/temperature/max tokens and
/// returns the first choice's message content verbatim.
class HttpProvider final : public Provider {
  public:
    explicit HttpProvider(HttpProviderConfig config)
        : config_(std::move(config)), client_(config_.base_url) {
        client_.set_connection_timeout(config_.timeout.count(), 0);
        client_.set_read_timeout(config_.timeout.count(), 0);
    }

    Result<ChatResponse> complete(const ChatRequest& request) override {
        nlohmann::ordered_json body;
        body["model"] = config_.model;
        nlohmann::ordered_json messages = nlohmann::ordered_json::array();
        for (const ChatMessage& m : request.messages) {
            nlohmann::ordered_json msg;
            msg["role"] = std::string(to_string(m.role));
            msg["content"] = m.content;
            messages.push_back(std::move(msg));
        }
        body["messages"] = std::move(messages);
        body["temperature"] = request.temperature;
        body["max_tokens"] = request.max_output_tokens;

        httplib::Headers headers;
        if (!config_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        }
        auto started = std::chrono::steady_clock::now();
        httplib::Result res =
            client_.Post(config_.completions_path, headers, body.dump(), "application/json");
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        if (!res) {
            ErrorKind kind = res.error() == httplib::Error::ConnectionTimeout ||
                                     res.error() == httplib::Error::Read
                                 ? ErrorKind::Timeout
                                 : ErrorKind::Transport;
            return make_error(kind, "http backend: " + httplib::to_string(res.error()));
        }
        if (res->status < 200 || res->status >= 300) {
            return make_error(ErrorKind::Transport,
                              "http backend: status " + std::to_string(res->status));
        }
        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
            reply["choices"].empty() || !reply["choices"][0].contains("message") ||
            !reply["choices"][0]["message"].contains("content") ||
            !reply["choices"][0]["message"]["content"].is_string()) {
            return make_error(ErrorKind::Transport, "http backend: unexpected response shape");
        }
        return ChatResponse{reply["choices"][0]["message"]["content"].get<std::string>(), id(),
                            elapsed};
    }

    std::string id() const override { return "http:" + config_.model; }

  private:
    HttpProviderConfig config_;
    httplib::Client client_;
};

inline Result<std::shared_ptr<Provider>> make_http_provider(HttpProviderConfig config) {
    config = apply_env(std::move(config));
    if (config.base_url.empty()) {
        return make_error(ErrorKind::InvalidArgument,
                          "http backend: no base URL (set CCDFORGE_BASE_URL)");
    }
    if (config.model.empty()) {
        return make_error(ErrorKind::InvalidArgument, "http backend: no model name");
    }
    return std::static_pointer_cast<Provider>(std::make_shared<HttpProvider>(std::move(config)));
}

}  // namespace ccdforge
