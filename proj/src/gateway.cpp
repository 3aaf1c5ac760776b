#include <algorithm>

#include "bubblelab/errors.hpp"
#include "bubblelab/llm.hpp"
#include "json.hpp"

namespace bubblelab {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<int, const char*>, 4> kForecastKeys{
    {{0, "period_t"}, {2, "period_t_plus_2"}, {5, "period_t_plus_5"}, {10, "period_t_plus_10"}}};

struct SchemaViolation {
    std::string detail;
};

const json& require(const json& obj, const char* key, json::value_t type, const char* where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaViolation{std::string(where) + ": missing \"" + key + "\""};
    bool ok = type == json::value_t::number_integer ? it->is_number_integer() : it->type() == type;
    if (!ok) throw SchemaViolation{std::string(where) + ": \"" + key + "\" has the wrong type"};
    return *it;
}

// Locates the outermost JSON object in free text (models often wrap it in
// prose or code fences).
std::optional<std::string> extract_object(const std::string& text) {
    auto first = text.find('{');
    auto last = text.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first) return std::nullopt;
    return text.substr(first, last - first + 1);
}

TurnForfeited forfeit(ForfeitReason reason, std::string detail, int attempts) {
    return {reason, std::move(detail), kForfeitMessage, attempts};
}

}  // namespace

ValidatedReply validate_reply(const RawModelReply& raw, int current_price, const ForecastBounds& bounds,
                              const AgentId& agent_id) {
    auto body = extract_object(raw.text);
    if (!body) return forfeit(ForfeitReason::Parse, "no JSON object in reply", raw.attempt);
    json doc = json::parse(*body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        return forfeit(ForfeitReason::Parse, "reply is not valid JSON", raw.attempt);

    try {
        AgentDecision d;
        const auto& cog = require(doc, "cognitive_process", json::value_t::object, "reply");
        d.reasoning.market_analysis =
            require(cog, "market_analysis", json::value_t::string, "cognitive_process").get<std::string>();
        d.reasoning.strategy_formulation =
            require(cog, "strategy_formulation", json::value_t::string, "cognitive_process").get<std::string>();

        const auto& fc = require(doc, "price_forecasts", json::value_t::object, "reply");
        for (auto [h, key] : kForecastKeys) {
            auto v = require(fc, key, json::value_t::number_integer, "price_forecasts").get<std::int64_t>();
            std::int64_t upper = bounds.upper(h, current_price);
            if (v < 0 || v > upper)
                throw SchemaViolation{std::string("forecast ") + key + "=" + std::to_string(v) + " outside [0, " +
                                      std::to_string(upper) + "]"};
            d.forecasts[h] = static_cast<int>(v);
        }

        const auto& orders = require(doc, "orders", json::value_t::array, "reply");
        for (const auto& o : orders) {
            if (!o.is_object()) throw SchemaViolation{"orders: entry is not an object"};
            auto type = require(o, "type", json::value_t::string, "order").get<std::string>();
            auto price = require(o, "price", json::value_t::number_integer, "order").get<std::int64_t>();
            auto qty = require(o, "quantity", json::value_t::number_integer, "order").get<std::int64_t>();
            if (type != "BUY" && type != "SELL") throw SchemaViolation{"order type \"" + type + "\""};
            if (price <= 0 || qty <= 0 || price > 1'000'000'000 || qty > 1'000'000'000)
                throw SchemaViolation{"order price and quantity must be positive"};
            d.orders.push_back({agent_id, type == "BUY" ? Side::Buy : Side::Sell, static_cast<int>(price),
                                static_cast<int>(qty), static_cast<int>(d.orders.size())});
        }

        const auto& mem = require(doc, "memory_update", json::value_t::object, "reply");
        d.memory_update.plans = require(mem, "update_plans_txt", json::value_t::string, "memory_update").get<std::string>();
        d.memory_update.insights =
            require(mem, "update_insights_txt", json::value_t::string, "memory_update").get<std::string>();
        return d;
    } catch (const SchemaViolation& v) {
        return forfeit(ForfeitReason::Validation, v.detail, raw.attempt);
    }
}

std::vector<ForecastOutcome> score_forecasts(std::span<const SubmittedForecast> forecasts,
                                             const std::map<int, int>& prices, const MarketParams& params,
                                             PortfolioMap* portfolios) {
    std::vector<ForecastOutcome> out;
    out.reserve(forecasts.size());
    for (const auto& f : forecasts) {
        ForecastOutcome o{f.agent_id, f.period, f.horizon, f.forecast, std::nullopt, false};
        int target = f.period + f.horizon;
        if (target <= params.main_periods) {
            auto it = prices.find(target);
            if (it != prices.end()) {
                o.realized = it->second;
                Money err = Money::from_int(std::abs(it->second - f.forecast));
                o.rewarded = err <= params.forecast_tolerance;
            }
        }
        if (o.rewarded && portfolios != nullptr) {
            auto p = portfolios->find(f.agent_id);
            if (p == portfolios->end()) throw InvariantViolation("forecast from unknown agent " + f.agent_id);
            p->second.forecast_bonus_accrued += params.forecast_reward;
        }
        out.push_back(std::move(o));
    }
    return out;
}

// --- LlmAgent ------------------------------------------------------------------------

LlmAgent::LlmAgent(AgentId id, std::string group, std::shared_ptr<Transport> transport, std::string model,
                   double temperature, int repair_attempts)
    : id_(std::move(id)),
      group_(std::move(group)),
      transport_(std::move(transport)),
      model_(std::move(model)),
      temperature_(temperature),
      repair_attempts_(std::max(0, repair_attempts)) {}

TurnResult LlmAgent::converse(std::vector<ChatMessage> messages, int current_price, const TurnContext& ctx) {
    int attempt = 0;
    while (true) {
        ++attempt;
        ChatResponse resp;
        try {
            resp = transport_->complete({model_, messages, temperature_});
        } catch (const TransportError& e) {
            return {std::nullopt, TurnForfeited{ForfeitReason::Transport, e.what(), kForfeitMessage, attempt}};
        }
        RawModelReply raw{resp.text, resp.model_id, resp.latency_ms, attempt};
        auto result = validate_reply(raw, current_price, ctx.bounds, id_);
        if (auto* d = std::get_if<AgentDecision>(&result)) return {std::move(*d), std::nullopt};
        auto& f = std::get<TurnForfeited>(result);
        if (attempt > repair_attempts_) return {std::nullopt, std::move(f)};
        messages.push_back({"assistant", resp.text});
        messages.push_back({"user", "Your previous reply could not be accepted (" + f.detail +
                                        "). Reply again with strictly valid JSON that follows the schema."});
    }
}

TurnResult LlmAgent::act(const AgentObservation& obs, const TurnContext& ctx) {
    MarketParams defaults;
    const MarketParams& params = ctx.params ? *ctx.params : defaults;
    auto bundle = build_prompts(obs, params, ctx.shock, false, ctx.bounds);
    std::vector<ChatMessage> messages{{"system", bundle.system_prompt},
                                      {"user", bundle.state_prompt + "\n\n" + bundle.schema_prompt}};
    return converse(std::move(messages), obs.current_price, ctx);
}

std::optional<Memory> LlmAgent::reflect(const AgentObservation& obs, const TurnContext& ctx) {
    MarketParams defaults;
    const MarketParams& params = ctx.params ? *ctx.params : defaults;
    auto bundle = build_prompts(obs, params, ctx.shock, true, ctx.bounds);
    std::vector<ChatMessage> messages{
        {"system", bundle.system_prompt},
        {"user", bundle.state_prompt + "\n\n" + *bundle.reflection_prompt + "\n\n" + bundle.schema_prompt}};
    auto result = converse(std::move(messages), obs.current_price, ctx);
    if (!result.decision) return std::nullopt;
    return result.decision->memory_update;
}

}  // namespace bubblelab
