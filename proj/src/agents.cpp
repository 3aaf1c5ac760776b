#include "bubblelab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "bubblelab/rng.hpp"

namespace bubblelab {

double period_return(double from_price, double to_price, ReturnConvention convention) {
    if (convention == ReturnConvention::Log) return std::log(to_price / from_price);
    return (to_price - from_price) / from_price;
}

const char* to_string(ForfeitReason r) {
    switch (r) {
        case ForfeitReason::Parse: return "parse";
        case ForfeitReason::Validation: return "validation";
        case ForfeitReason::Transport: return "transport";
    }
    return "?";
}

int ForecastBounds::upper(int horizon, int current_price) const {
    double m = horizon <= 2 ? near_multiplier : far_multiplier;
    return static_cast<int>(std::floor(m * current_price));
}

const char* to_string(ScriptedKind k) {
    switch (k) {
        case ScriptedKind::Fundamentalist: return "fundamentalist";
        case ScriptedKind::Extrapolator: return "extrapolator";
        case ScriptedKind::Disposition: return "disposition";
        case ScriptedKind::Momentum: return "momentum";
        case ScriptedKind::Noise: return "noise";
    }
    return "?";
}

std::optional<ScriptedKind> parse_scripted_kind(std::string_view text) {
    for (auto k : {ScriptedKind::Fundamentalist, ScriptedKind::Extrapolator, ScriptedKind::Disposition,
                   ScriptedKind::Momentum, ScriptedKind::Noise})
        if (text == to_string(k)) return k;
    return std::nullopt;
}

std::vector<double> recent_returns(const std::vector<PricePoint>& history, std::size_t max_lags,
                                   ReturnConvention convention) {
    std::vector<double> out(max_lags, 0.0);
    const auto n = static_cast<std::ptrdiff_t>(history.size());
    for (std::size_t k = 0; k < max_lags; ++k) {
        std::ptrdiff_t to = n - 1 - static_cast<std::ptrdiff_t>(k);
        std::ptrdiff_t from = to - 1;
        if (from < 0) break;
        out[k] = period_return(history[from].price, history[to].price, convention);
    }
    return out;
}

double disposition_sell_probability(const AgentObservation& obs, const ScriptedAgentConfig& config) {
    bool gain = Money::from_int(obs.current_price) > obs.portfolio.wapp;
    double p = config.disposition_base_sell + (gain ? config.disposition_sell_boost : 0.0);
    return std::clamp(p, 0.0, 1.0);
}

namespace {

bool is_trend_mechanism(const std::string& id) {
    static const std::array<const char*, 7> ids = {
        "momentum_vs_newswatcher", "feedback_trading",   "extrapolation_vs_anchor", "diagnostic_expectations",
        "rational_speculative_bubble", "new_era_thinking", "herding_contagion"};
    return std::any_of(ids.begin(), ids.end(), [&](const char* s) { return id == s; });
}

double trend_scale(const ScriptedAgentConfig& config, const TurnContext& ctx) {
    if (ctx.shock == nullptr || !is_trend_mechanism(ctx.shock->mechanism_id)) return 1.0;
    return ctx.shock->direction == ShockDirection::Amplify ? 1.0 + config.shock_sensitivity
                                                           : std::max(0.0, 1.0 - config.shock_sensitivity);
}

int fundamental_anchor(const TurnContext& ctx) {
    MarketParams defaults;
    const MarketParams& params = ctx.params ? *ctx.params : defaults;
    return static_cast<int>(std::lround(fundamental_value(params).to_double()));
}

std::int64_t buy_quantity(const AgentObservation& obs, const ScriptedAgentConfig& config, int price) {
    if (price < 1) return 0;
    double budget = config.order_fraction * obs.portfolio.cash.to_double();
    return static_cast<std::int64_t>(std::floor(budget / price));
}

std::int64_t sell_quantity(const AgentObservation& obs, const ScriptedAgentConfig& config) {
    return static_cast<std::int64_t>(std::floor(config.order_fraction * static_cast<double>(obs.portfolio.shares)));
}

void add_order(AgentDecision& d, const AgentObservation& obs, Side side, int price, std::int64_t qty) {
    if (qty < 1 || price < 1) return;
    d.orders.push_back({obs.agent_id, side, price, static_cast<int>(qty), static_cast<int>(d.orders.size())});
}

int round_forecast(double value, const ScriptedAgentConfig& config, Rng& rng) {
    if (config.stochastic_rounding) return static_cast<int>(std::floor(value + rng.uniform()));
    return static_cast<int>(std::floor(value + 0.5));
}

void set_forecast(AgentDecision& d, int horizon, int value, int current_price, const TurnContext& ctx) {
    d.forecasts[horizon] = std::clamp(value, 0, ctx.bounds.upper(horizon, current_price));
}

std::string format_pct(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * r);
    return buf;
}

std::string describe_orders(const std::vector<LimitOrder>& orders) {
    std::int64_t bq = 0, sq = 0;
    int bp = 0, sp = 0;
    for (const auto& o : orders) {
        if (o.side == Side::Buy) {
            bq += o.quantity;
            bp = std::max(bp, o.price);
        } else {
            sq += o.quantity;
            sp = sp == 0 ? o.price : std::min(sp, o.price);
        }
    }
    char buf[160];
    if (bq > 0 && sq > 0)
        std::snprintf(buf, sizeof buf, "I will buy up to %lld shares at %d and sell %lld shares at %d.",
                      static_cast<long long>(bq), bp, static_cast<long long>(sq), sp);
    else if (bq > 0)
        std::snprintf(buf, sizeof buf, "I will buy up to %lld shares at %d.", static_cast<long long>(bq), bp);
    else if (sq > 0)
        std::snprintf(buf, sizeof buf, "I will sell %lld shares at %d.", static_cast<long long>(sq), sp);
    else
        std::snprintf(buf, sizeof buf, "I will hold my position this period.");
    return buf;
}

std::string lesson_for(ScriptedKind kind, int fv, double last_return) {
    switch (kind) {
        case ScriptedKind::Fundamentalist:
            return "Prices away from the fundamental value of " + std::to_string(fv) +
                   " revert; trade only against mispricing.";
        case ScriptedKind::Extrapolator:
            return "Recent returns carry momentum; the latest move was " + format_pct(last_return) +
                   " and the trend should continue.";
        case ScriptedKind::Momentum:
            return "Price moves tend to continue from one period to the next.";
        case ScriptedKind::Noise:
            return "Quotes stay near the fundamental value with some randomness.";
        case ScriptedKind::Disposition:
            return "When the price is above my average purchase price I lock in gains.";
    }
    return {};
}

void fill_text(AgentDecision& d, const AgentObservation& obs, const ScriptedAgentConfig& config,
               const TurnContext& ctx, double last_return) {
    int fv = fundamental_anchor(ctx);
    d.reasoning.market_analysis = "Last price " + std::to_string(obs.current_price) + " against a fundamental value of " +
                                  std::to_string(fv) + "; most recent return " + format_pct(last_return) + ".";
    std::string intent = describe_orders(d.orders);
    d.reasoning.strategy_formulation = intent;
    d.memory_update.plans = "Plan for the next period: " + intent;
    d.memory_update.insights = lesson_for(config.kind, fv, last_return);
    if (ctx.shock != nullptr && !ctx.shock->clause.empty()) {
        d.memory_update.plans += " Guidance I am following: " + ctx.shock->clause;
        d.memory_update.insights += " Guidance I am following: " + ctx.shock->clause;
    }
}

AgentDecision decide_fundamentalist(const AgentObservation& obs, const ScriptedAgentConfig& config,
                                    const TurnContext& ctx) {
    AgentDecision d;
    int fv = fundamental_anchor(ctx);
    for (int h : kForecastHorizons) set_forecast(d, h, fv, obs.current_price, ctx);
    add_order(d, obs, Side::Buy, fv - 1, buy_quantity(obs, config, fv - 1));
    add_order(d, obs, Side::Sell, fv + 1, sell_quantity(obs, config));
    return d;
}

AgentDecision decide_extrapolator(const AgentObservation& obs, const ScriptedAgentConfig& config,
                                  const TurnContext& ctx, Rng& rng) {
    AgentDecision d;
    const int price = obs.current_price;
    auto returns = recent_returns(obs.price_history, config.extrapolation_weights.size());
    double signal = 0.0;
    for (std::size_t k = 0; k < returns.size(); ++k) signal += config.extrapolation_weights[k] * returns[k];
    signal *= trend_scale(config, ctx);

    for (int h : kForecastHorizons) {
        auto it = config.horizon_multipliers.find(h);
        double m = it == config.horizon_multipliers.end() ? 1.0 : it->second;
        set_forecast(d, h, round_forecast(price * (1.0 + m * signal), config, rng), price, ctx);
    }

    int value = d.forecasts.count(config.trade_horizon) ? d.forecasts[config.trade_horizon] : d.forecasts[2];
    // Shares still held after the last period are redeemed at the buyout value.
    if (!obs.practice && obs.period + config.trade_horizon > obs.total_periods) value = fundamental_anchor(ctx);

    if (value > price) {
        add_order(d, obs, Side::Buy, value, buy_quantity(obs, config, value));
    } else if (value < price) {
        add_order(d, obs, Side::Sell, std::max(1, value), sell_quantity(obs, config));
    } else {
        add_order(d, obs, Side::Buy, price - 1, buy_quantity(obs, config, price - 1));
        add_order(d, obs, Side::Sell, price + 1, sell_quantity(obs, config));
    }
    return d;
}

AgentDecision decide_momentum(const AgentObservation& obs, const ScriptedAgentConfig& config, const TurnContext& ctx) {
    AgentDecision d;
    const int price = obs.current_price;
    double r1 = recent_returns(obs.price_history, 1)[0] * trend_scale(config, ctx);
    for (int h : kForecastHorizons)
        set_forecast(d, h, static_cast<int>(std::floor(price * (1.0 + r1) + 0.5)), price, ctx);
    if (r1 > 0.0)
        add_order(d, obs, Side::Buy, price + 1, buy_quantity(obs, config, price + 1));
    else if (r1 < 0.0)
        add_order(d, obs, Side::Sell, std::max(1, price - 1), sell_quantity(obs, config));
    return d;
}

AgentDecision decide_noise(const AgentObservation& obs, const ScriptedAgentConfig& config, const TurnContext& ctx,
                           Rng& rng) {
    AgentDecision d;
    const int price = obs.current_price;
    const auto k = static_cast<std::int64_t>(std::lround(config.noise_scale));
    for (int h : kForecastHorizons)
        set_forecast(d, h, static_cast<int>(price + rng.uniform_int(-k, k)), price, ctx);
    int fv = fundamental_anchor(ctx);
    int bid = std::max(1, fv - 1 + static_cast<int>(rng.uniform_int(-k, k)));
    int ask = std::max(1, fv + 1 + static_cast<int>(rng.uniform_int(-k, k)));
    add_order(d, obs, Side::Buy, bid, buy_quantity(obs, config, bid));
    add_order(d, obs, Side::Sell, ask, sell_quantity(obs, config));
    return d;
}

AgentDecision decide_inner(const AgentObservation& obs, const ScriptedAgentConfig& config, const TurnContext& ctx,
                           Rng& rng) {
    switch (config.kind) {
        case ScriptedKind::Fundamentalist: return decide_fundamentalist(obs, config, ctx);
        case ScriptedKind::Extrapolator: return decide_extrapolator(obs, config, ctx, rng);
        case ScriptedKind::Momentum: return decide_momentum(obs, config, ctx);
        case ScriptedKind::Noise:
        case ScriptedKind::Disposition: return decide_noise(obs, config, ctx, rng);
    }
    return {};
}

AgentDecision decide_disposition(const AgentObservation& obs, const ScriptedAgentConfig& config,
                                 const TurnContext& ctx, Rng& rng) {
    ScriptedAgentConfig inner_config = config;
    inner_config.kind = config.disposition_inner == ScriptedKind::Disposition ? ScriptedKind::Noise
                                                                              : config.disposition_inner;
    AgentDecision inner = decide_inner(obs, inner_config, ctx, rng);

    Rng coin(mix64(ctx.stream_seed ^ 0xd15b05171011ULL));
    bool sell_mode = coin.uniform() < disposition_sell_probability(obs, config);

    AgentDecision d;
    d.forecasts = inner.forecasts;
    const int price = obs.current_price;
    for (const auto& o : inner.orders)
        if ((o.side == Side::Sell) == sell_mode) add_order(d, obs, o.side, o.price, o.quantity);
    if (d.orders.empty()) {
        // Keep the side decision visible even when the inner policy had nothing
        // to quote; enforcement trims anything infeasible.
        if (sell_mode)
            add_order(d, obs, Side::Sell, std::max(1, price), std::max<std::int64_t>(1, sell_quantity(obs, config)));
        else
            add_order(d, obs, Side::Buy, std::max(1, price),
                      std::max<std::int64_t>(1, buy_quantity(obs, config, std::max(1, price))));
    }
    return d;
}

}  // namespace

AgentDecision decide(const AgentObservation& obs, const ScriptedAgentConfig& config, const TurnContext& ctx) {
    Rng rng(ctx.stream_seed);
    AgentDecision d = config.kind == ScriptedKind::Disposition ? decide_disposition(obs, config, ctx, rng)
                                                               : decide_inner(obs, config, ctx, rng);
    double last_return = recent_returns(obs.price_history, 1)[0];
    fill_text(d, obs, config, ctx, last_return);
    return d;
}

Memory scripted_reflection(const AgentObservation& obs, const ScriptedAgentConfig& config, const MarketParams& params) {
    Memory m = obs.memory;
    int fv = static_cast<int>(std::lround(fundamental_value(params).to_double()));
    m.insights = "Practice review as a " + std::string(to_string(config.kind)) + " trader: the last practice price was " +
                 std::to_string(obs.current_price) + " against a fundamental value of " + std::to_string(fv) +
                 ". Rule: compare every quote with the fundamental value before trading.";
    return m;
}

ScriptedAgent::ScriptedAgent(AgentId id, std::string group, ScriptedAgentConfig config)
    : id_(std::move(id)), group_(std::move(group)), config_(std::move(config)) {}

TurnResult ScriptedAgent::act(const AgentObservation& obs, const TurnContext& ctx) {
    TurnContext own = ctx;
    own.stream_seed = mix64(ctx.stream_seed ^ config_.rng_seed);
    return {decide(obs, config_, own), std::nullopt};
}

std::optional<Memory> ScriptedAgent::reflect(const AgentObservation& obs, const TurnContext& ctx) {
    MarketParams defaults;
    return scripted_reflection(obs, config_, ctx.params ? *ctx.params : defaults);
}

}  // namespace bubblelab
