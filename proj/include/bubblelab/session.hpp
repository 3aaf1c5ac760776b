#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bubblelab/agents.hpp"
#include "bubblelab/config.hpp"
#include "bubblelab/panel.hpp"

namespace bubblelab {

// Draws the period dividend from its own substream, so the sequence does
// not depend on how many other draws happened.
Money dividend_draw(const MarketParams& params, std::uint64_t seed, int sim, int period);

// Instantiates the agents for one simulation. Throws ConfigError when a live
// model's API key variable is unset.
std::vector<std::unique_ptr<Agent>> build_agents(const SessionConfig& config);

// Runs practice, reflection, reset and the main periods for one simulation.
SimulationPanel run_simulation(const SessionConfig& config, int sim, std::vector<std::unique_ptr<Agent>>& agents);

// Re-derives every conservation identity from a finished panel; throws
// InvariantViolation on the first mismatch.
void check_conservation(const SimulationPanel& panel);

struct RunOptions {
    bool write = true;   // persist artifacts under config.output_dir
    bool force = false;  // replace existing sim_* directories
    // Called after each finished simulation (progress reporting).
    std::function<void(const SimulationPanel&)> on_simulation = {};
};

std::string sim_dir_name(int sim);

// All simulations of a session. Configuration problems (including missing
// API keys and an occupied output directory) surface before any file is written.
std::vector<SimulationPanel> run_session(const SessionConfig& config, const RunOptions& options = {});

}  // namespace bubblelab
