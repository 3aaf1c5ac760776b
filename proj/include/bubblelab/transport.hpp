#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace bubblelab {

struct ChatMessage {
    std::string role;  // "system", "user" or "assistant"
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 1.0;
};

struct ChatResponse {
    std::string text;
    std::string model_id;
    double latency_ms = 0.0;
    int attempts = 1;
};

// Raised once retries are exhausted. Callers turn this into a forfeit.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, int attempts) : std::runtime_error(what), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{500};
    double backoff_factor = 2.0;
    std::chrono::milliseconds timeout{60000};
};

// Chat-completions client: POST {model, messages, temperature} with a bearer
// token; the reply text is choices[0].message.content. Connection failures,
// 429 and 5xx are retried with exponential backoff.
class HttpTransport final : public Transport {
public:
    HttpTransport(std::string endpoint, std::string api_key, RetryPolicy policy = {});
    ChatResponse complete(const ChatRequest& request) override;

    const std::string& endpoint() const { return endpoint_; }

private:
    std::string endpoint_;
    std::string scheme_host_port_;
    std::string path_;
    std::string api_key_;
    RetryPolicy policy_;
};

// Canned replies for tests and offline runs. Backends:
//   fundamentalist-json  forecasts 14, bid 13 / ask 15 for one share each
//   malformed-once       prose on a fresh prompt, valid JSON on any repair re-prompt
//   malformed-always     never valid JSON
//   out-of-bounds        a period_t forecast far above the allowed bound
//   unreachable          throws TransportError as if the endpoint were down
// A fresh prompt is a request with no assistant turn in it.
class MockTransport final : public Transport {
public:
    explicit MockTransport(std::string backend);
    ChatResponse complete(const ChatRequest& request) override;

    static bool is_known_backend(const std::string& backend);
    int calls() const { return calls_.load(); }

private:
    std::string backend_;
    std::atomic<int> calls_{0};
};

// Splits "https://host:port/path" into ("https://host:port", "/path").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint);

}  // namespace bubblelab
