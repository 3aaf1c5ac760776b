#include "bubblelab/transport.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace bubblelab {

using nlohmann::json;

std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint lacks a scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

HttpTransport::HttpTransport(std::string endpoint, std::string api_key, RetryPolicy policy)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), policy_(policy) {
    std::tie(scheme_host_port_, path_) = split_endpoint(endpoint_);
}

ChatResponse HttpTransport::complete(const ChatRequest& request) {
    json body = {{"model", request.model}, {"temperature", request.temperature}, {"messages", json::array()}};
    for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto backoff = policy_.initial_backoff;
    std::string last_error;
    const int max_attempts = std::max(1, policy_.max_attempts);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * policy_.backoff_factor));
        }
        httplib::Client client(scheme_host_port_);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy_.timeout).count();
        client.set_connection_timeout(std::max<long long>(1, secs), 0);
        client.set_read_timeout(std::max<long long>(1, secs), 0);
        auto start = std::chrono::steady_clock::now();
        auto res = client.Post(path_, headers, payload, "application/json");
        double latency =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("HTTP " + std::to_string(res->status) + " from " + endpoint_, attempt);

        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) throw TransportError("response body is not JSON", attempt);
        try {
            ChatResponse out;
            out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            out.model_id = reply.value("model", request.model);
            out.latency_ms = latency;
            out.attempts = attempt;
            return out;
        } catch (const json::exception& e) {
            throw TransportError(std::string("unexpected response shape: ") + e.what(), attempt);
        }
    }
    throw TransportError(last_error + " after " + std::to_string(max_attempts) + " attempts", max_attempts);
}

// --- mock backend ------------------------------------------------------------------

namespace {

std::string fixture_reply(int period_t_forecast) {
    json doc = {
        {"cognitive_process",
         {{"market_analysis", "The price sits at the fundamental value of 14.0 implied by dividends and interest."},
          {"strategy_formulation", "Quote one share on each side around 14 and keep most of the budget idle."}}},
        {"price_forecasts",
         {{"period_t", period_t_forecast}, {"period_t_plus_2", 14}, {"period_t_plus_5", 14}, {"period_t_plus_10", 14}}},
        {"orders",
         json::array({{{"type", "BUY"}, {"price", 13}, {"quantity", 1}},
                      {{"type", "SELL"}, {"price", 15}, {"quantity", 1}}})},
        {"memory_update",
         {{"update_plans_txt", "Keep quoting around the fundamental value of 14."},
          {"update_insights_txt", "The stock is worth 14 in every period; deviations do not last."}}}};
    return doc.dump(2);
}

bool has_assistant_turn(const ChatRequest& r) {
    return std::any_of(r.messages.begin(), r.messages.end(), [](const ChatMessage& m) { return m.role == "assistant"; });
}

}  // namespace

MockTransport::MockTransport(std::string backend) : backend_(std::move(backend)) {
    if (!is_known_backend(backend_)) throw std::invalid_argument("unknown mock backend: " + backend_);
}

bool MockTransport::is_known_backend(const std::string& backend) {
    return backend == "fundamentalist-json" || backend == "malformed-once" || backend == "malformed-always" ||
           backend == "out-of-bounds" || backend == "unreachable";
}

ChatResponse MockTransport::complete(const ChatRequest& request) {
    ++calls_;
    ChatResponse out;
    out.model_id = "mock/" + backend_;
    if (backend_ == "unreachable") throw TransportError("mock endpoint unreachable", 1);
    if (backend_ == "malformed-always" || (backend_ == "malformed-once" && !has_assistant_turn(request)))
        out.text = "I think I'll buy";
    else if (backend_ == "out-of-bounds")
        out.text = fixture_reply(100000);
    else
        out.text = fixture_reply(14);
    return out;
}

}  // namespace bubblelab
