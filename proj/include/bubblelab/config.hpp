#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bubblelab/agents.hpp"
#include "bubblelab/market.hpp"
#include "bubblelab/taxonomy.hpp"

namespace bubblelab {

enum class MarketType { Single, Mixed, Scripted };
const char* to_string(MarketType t);

// One model-backed agent population.
struct ModelSpec {
    std::string name;                    // group label in the panel
    std::string backend = "http";        // "http" or "mock"
    std::string mock_reply = "fundamentalist-json";
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 1.0;
    int max_attempts = 4;
    int backoff_ms = 500;
    int timeout_s = 60;
};

struct ScriptedGroup {
    std::string name;
    int count = 1;
    ScriptedAgentConfig config;
};

struct SessionConfig {
    MarketType market_type = MarketType::Scripted;
    std::string label;  // free-form market label; defaults to the type name
    std::vector<ModelSpec> models;
    int agents_per_model = 20;
    std::vector<ScriptedGroup> scripted;
    MarketParams params;
    std::uint64_t seed = 0;
    std::optional<ShockSpec> shock;
    int n_simulations = 1;
    std::filesystem::path output_dir = "out";
    int parallelism = 4;
    ForecastBounds bounds;
    int repair_attempts = 1;
    // Portfolios and prices return to the endowment after practice; memory stays.
    bool reset_after_practice = true;

    int n_agents() const;
    std::string market_label() const;
    // Throws ConfigError with a message naming the offending field.
    void validate() const;
};

// YAML. Unknown keys are rejected so typos fail loudly.
SessionConfig parse_session_config(const std::string& yaml_text);
SessionConfig load_session_config(const std::filesystem::path& path);

// "mechanism:amplify" -> ShockSpec using the default clause catalog.
ShockSpec parse_shock_argument(const std::string& text);

}  // namespace bubblelab
