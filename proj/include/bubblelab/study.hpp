#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bubblelab/audit.hpp"
#include "bubblelab/config.hpp"
#include "bubblelab/panel.hpp"

namespace bubblelab {

// Main-period reasoning of one simulation, with the price and returns the
// agent saw while writing it. Forfeited turns carry no text and are skipped.
std::vector<AuditInputRow> audit_inputs(const SimulationPanel& panel);

// Audit scores as "<mechanism>/<source>" features of one arm.
std::vector<ArmObservation> arm_observations(const std::string& arm, std::span<const AuditScoreRecord> scores);

struct ShockStudyOptions {
    std::string mechanism;
    // Second benchmark arm on a different seed, the placebo contrast.
    bool placebo_arm = true;
    bool write = false;  // persist arm sessions and scores under config.output_dir/<arm>
    bool force = false;
    AuditOptions audit;
    std::function<void(const std::string& arm)> on_arm;
};

struct ShockArmResult {
    std::string arm;
    std::vector<SimulationPanel> panels;
    std::vector<AuditScoreRecord> scores;
    int judge_failures = 0;
};

struct ShockStudyResult {
    std::vector<ShockArmResult> arms;
    std::vector<ShockComparisonRow> comparison;
};

// Benchmark, amplify and suppress arms on a shared seed (plus the placebo
// arm), each audited by `judge`, then compared feature by feature.
ShockStudyResult run_shock_study(const SessionConfig& base, Judge& judge, const ShockStudyOptions& options);

void print_shock_comparison(std::ostream& os, std::span<const ShockComparisonRow> rows);
void write_shock_comparison_csv(const std::filesystem::path& path, std::span<const ShockComparisonRow> rows);

}  // namespace bubblelab
