#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bubblelab/agents.hpp"
#include "bubblelab/transport.hpp"

namespace bubblelab {

// Text the agent sees after losing a turn.
inline constexpr const char* kForfeitMessage =
    "Invalid JSON format. You have lost your turn for this period. Please output strictly valid JSON.";

struct PromptBundle {
    std::string system_prompt;
    std::string state_prompt;
    std::string schema_prompt;
    std::optional<std::string> reflection_prompt;

    bool operator==(const PromptBundle&) const = default;
};

std::string render_system_prompt(const MarketParams& params, const ShockSpec* shock);
std::string render_state_prompt(const AgentObservation& obs, const MarketParams& params);
std::string render_schema_prompt(const MarketParams& params, const ForecastBounds& bounds);
const std::string& reflection_prompt_text();

PromptBundle build_prompts(const AgentObservation& obs, const MarketParams& params, const ShockSpec* shock,
                           bool with_reflection = false, const ForecastBounds& bounds = {});

// FNV-1a over all prompt parts; stable across runs and platforms.
std::uint64_t prompt_hash(const PromptBundle& bundle);

struct RawModelReply {
    std::string text;
    std::string model_id;
    double latency_ms = 0.0;
    int attempt = 1;
};

using ValidatedReply = std::variant<AgentDecision, TurnForfeited>;

// Parses a reply against the structured schema. Orders are stamped with
// `agent_id` and submission sequence numbers.
ValidatedReply validate_reply(const RawModelReply& raw, int current_price, const ForecastBounds& bounds = {},
                              const AgentId& agent_id = {});

// --- forecast scoring -------------------------------------------------------------

struct ForecastOutcome {
    AgentId agent_id;
    int period = 0;
    int horizon = 0;
    int forecast = 0;
    std::optional<int> realized;  // absent when period + horizon > T
    bool rewarded = false;
};

struct SubmittedForecast {
    AgentId agent_id;
    int period = 0;
    int horizon = 0;
    int forecast = 0;
};

// `prices` maps main period -> reported price. Credits are added to each
// portfolio's forecast_bonus_accrued.
std::vector<ForecastOutcome> score_forecasts(std::span<const SubmittedForecast> forecasts,
                                             const std::map<int, int>& prices, const MarketParams& params,
                                             PortfolioMap* portfolios = nullptr);

// --- model-backed agent -------------------------------------------------------------

class LlmAgent final : public Agent {
public:
    LlmAgent(AgentId id, std::string group, std::shared_ptr<Transport> transport, std::string model,
             double temperature, int repair_attempts = 1);

    const AgentId& id() const override { return id_; }
    const std::string& group() const override { return group_; }
    TurnResult act(const AgentObservation& obs, const TurnContext& ctx) override;
    std::optional<Memory> reflect(const AgentObservation& obs, const TurnContext& ctx) override;

private:
    // Runs one prompt through transport and validation with repair re-prompts.
    TurnResult converse(std::vector<ChatMessage> messages, int current_price, const TurnContext& ctx);

    AgentId id_;
    std::string group_;
    std::shared_ptr<Transport> transport_;
    std::string model_;
    double temperature_;
    int repair_attempts_;
};

}  // namespace bubblelab
