#pragma once

#include <algorithm>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "ccdforge/result.hpp"

namespace ccdforge {

enum class ChatRole { System, User, Assistant };

inline std::string_view to_string(ChatRole role) {
    switch (role) {
        case ChatRole::System: return "system";
        case ChatRole::User: return "user";
        case ChatRole::Assistant: return "assistant";
    }
    return "user";
}

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::string tag;  // free-text label carried through to logs

    bool operator==(const ChatRequest&) const = default;
};

inline Result<void> validate_request(const ChatRequest& request) {
    if (request.messages.empty()) {
        return make_error(ErrorKind::InvalidArgument, "chat request: no messages");
    }
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
        return make_error(ErrorKind::InvalidArgument, "chat request: temperature outside [0, 2]");
    }
    if (request.max_output_tokens <= 0) {
        return make_error(ErrorKind::InvalidArgument, "chat request: non-positive max_output_tokens");
    }
    return Result<void>{};
}

struct ChatResponse {
    std::string content;  // raw model output, unmodified
    std::string provider_id;
    std::chrono::milliseconds latency{0};
};

/// Backend contract. Implementations must tolerate concurrent calls.
class Provider {
  public:
    virtual ~Provider() = default;
    virtual Result<ChatResponse> complete(const ChatRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};  // delay after attempt k is base_delay * 2^k
};

/// Is this failure worth retrying? Only transient transport faults are;
/// an exhausted script or a malformed reply will not improve on a re-send.
inline bool is_retryable(const Error& err) {
    return err.kind == ErrorKind::Transport || err.kind == ErrorKind::Timeout;
}

/// Issue a request with exponential backoff on transport faults. The first
/// success is returned as-is; a non-retryable error aborts immediately.
inline Result<ChatResponse> chat(Provider& provider, const ChatRequest& request,
                                 const RetryPolicy& policy = {}) {
    if (auto ok = validate_request(request); !ok) return ok.error();
    Error last = make_error(ErrorKind::Transport, "chat: no attempts made");
    int attempts = std::max(policy.max_attempts, 1);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0 && policy.base_delay.count() > 0) {
            std::this_thread::sleep_for(policy.base_delay * (1LL << (attempt - 1)));
        }
        auto response = provider.complete(request);
        if (response) return response;
        last = response.error();
        if (!is_retryable(last)) return last;
    }
    return last;
}

/// Deterministic test backend: replays a fixed list of canned responses in
/// order, regardless of request content, and records every request it sees.
class ScriptedProvider final : public Provider {
  public:
    explicit ScriptedProvider(std::vector<std::string> script)
        : script_(std::move(script)) {}

    Result<ChatResponse> complete(const ChatRequest& request) override {
        std::lock_guard<std::mutex> lock(mutex_);
        requests_.push_back(request);
        if (cursor_ >= script_.size()) {
            return make_error(ErrorKind::ScriptExhausted,
                              "scripted provider: script exhausted after " +
                                  std::to_string(script_.size()) + " responses");
        }
        return ChatResponse{script_[cursor_++], id(), std::chrono::milliseconds{0}};
    }

    std::string id() const override { return "scripted"; }

    /// Snapshot of every request seen so far, in arrival order.
    std::vector<ChatRequest> recorded_requests() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return requests_;
    }

    std::size_t calls_made() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return requests_.size();
    }

    std::size_t responses_remaining() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return script_.size() - std::min(cursor_, script_.size());
    }

  private:
    std::vector<std::string> script_;
    std::size_t cursor_ = 0;
    std::vector<ChatRequest> requests_;
    mutable std::mutex mutex_;
};

inline std::shared_ptr<ScriptedProvider> make_scripted_provider(std::vector<std::string> script) {
    return std::make_shared<ScriptedProvider>(std::move(script));
}

}  // namespace ccdforge
