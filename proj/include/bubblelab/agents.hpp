#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bubblelab/market.hpp"
#include "bubblelab/taxonomy.hpp"

namespace bubblelab {

inline constexpr std::array<int, 4> kForecastHorizons{0, 2, 5, 10};

// One return convention for agents and analytics alike.
enum class ReturnConvention { Simple, Log };
double period_return(double from_price, double to_price, ReturnConvention convention = ReturnConvention::Simple);

struct PricePoint {
    int period = 0;
    int price = 0;
    std::int64_t volume = 0;
    Money dividend;
};

struct TradeRecap {
    int period = 0;
    std::int64_t bought = 0;
    std::int64_t sold = 0;
    int price = 0;
};

struct Memory {
    std::string plans;
    std::string insights;

    bool operator==(const Memory&) const = default;
};

struct AgentObservation {
    AgentId agent_id;
    int period = 1;  // practice periods are -2, -1, 0
    bool practice = false;
    int total_periods = 20;
    Portfolio portfolio;
    std::vector<PricePoint> price_history;  // strictly period-ordered
    std::vector<TradeRecap> recent_trades;
    Memory memory;
    int current_price = 14;
    std::optional<std::string> notice;  // e.g. the forfeit message from last turn
};

struct Reasoning {
    std::string market_analysis;
    std::string strategy_formulation;

    bool operator==(const Reasoning&) const = default;
};

struct AgentDecision {
    std::map<int, int> forecasts;  // horizon -> price
    std::vector<LimitOrder> orders;
    Reasoning reasoning;
    Memory memory_update;
};

enum class ForfeitReason { Parse, Validation, Transport };
const char* to_string(ForfeitReason r);

// Error-as-value for a lost turn: zero orders, no forecasts, memory unchanged.
struct TurnForfeited {
    ForfeitReason reason = ForfeitReason::Parse;
    std::string detail;
    std::string message;  // text fed back to the agent next period
    int attempts = 0;
};

// Upper limits on forecasts as multiples of the current price.
struct ForecastBounds {
    double near_multiplier = 2.0;  // h in {0, 2}
    double far_multiplier = 4.0;   // h in {5, 10}

    int upper(int horizon, int current_price) const;
};

enum class ScriptedKind { Fundamentalist, Extrapolator, Disposition, Momentum, Noise };
const char* to_string(ScriptedKind k);
std::optional<ScriptedKind> parse_scripted_kind(std::string_view text);

struct ScriptedAgentConfig {
    ScriptedKind kind = ScriptedKind::Fundamentalist;
    // Weight on the k-th most recent return, k = 1, 2, ...
    std::vector<double> extrapolation_weights{0.3, 0.2, 0.1, 0.05};
    // Horizon amplification m_h; missing horizons use 1.
    std::map<int, double> horizon_multipliers;
    double disposition_sell_boost = 0.0;
    double disposition_base_sell = 0.3;
    ScriptedKind disposition_inner = ScriptedKind::Noise;
    double noise_scale = 1.0;
    std::uint64_t rng_seed = 0;
    // Share of cash (buys) or shares (sells) risked per round, rounded down.
    double order_fraction = 0.5;
    // Horizon whose forecast drives an extrapolator's quotes.
    int trade_horizon = 2;
    // Round forecasts up or down at random with probability equal to the
    // fractional part, so the integer forecast is unbiased.
    bool stochastic_rounding = false;
    // Trend weights are scaled by (1 +/- sensitivity) under a trend shock.
    double shock_sensitivity = 0.5;
};

struct TurnContext {
    int sim = 0;
    std::uint64_t stream_seed = 0;
    const MarketParams* params = nullptr;
    const ShockSpec* shock = nullptr;
    ForecastBounds bounds;
};

// Most recent first: element 0 is the return into the latest price.
std::vector<double> recent_returns(const std::vector<PricePoint>& history, std::size_t max_lags,
                                   ReturnConvention convention = ReturnConvention::Simple);

// Probability that a disposition agent enters the round as a seller.
double disposition_sell_probability(const AgentObservation& obs, const ScriptedAgentConfig& config);

// Deterministic given (observation, config, ctx.stream_seed). Orders are
// pre-enforcement; the budget is applied downstream.
AgentDecision decide(const AgentObservation& obs, const ScriptedAgentConfig& config, const TurnContext& ctx);

// Text written to INSIGHTS.txt after the practice periods.
Memory scripted_reflection(const AgentObservation& obs, const ScriptedAgentConfig& config, const MarketParams& params);

// --- agent interface used by the session runner -------------------------------

struct TurnResult {
    std::optional<AgentDecision> decision;
    std::optional<TurnForfeited> forfeit;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual const AgentId& id() const = 0;
    // Label used for grouping in the panel: a model name or scripted kind.
    virtual const std::string& group() const = 0;
    virtual TurnResult act(const AgentObservation& obs, const TurnContext& ctx) = 0;
    // Practice reflection; returns the memory to carry into the main market.
    virtual std::optional<Memory> reflect(const AgentObservation& obs, const TurnContext& ctx) = 0;
};

class ScriptedAgent final : public Agent {
public:
    ScriptedAgent(AgentId id, std::string group, ScriptedAgentConfig config);

    const AgentId& id() const override { return id_; }
    const std::string& group() const override { return group_; }
    const ScriptedAgentConfig& config() const { return config_; }
    TurnResult act(const AgentObservation& obs, const TurnContext& ctx) override;
    std::optional<Memory> reflect(const AgentObservation& obs, const TurnContext& ctx) override;

private:
    AgentId id_;
    std::string group_;
    ScriptedAgentConfig config_;
};

}  // namespace bubblelab
