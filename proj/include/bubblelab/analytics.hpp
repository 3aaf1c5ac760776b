#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bubblelab/agents.hpp"
#include "bubblelab/audit.hpp"
#include "bubblelab/econometrics.hpp"
#include "bubblelab/panel.hpp"

namespace bubblelab {

enum class BidOfferUnit { Shares, Orders };

struct AnalysisOptions {
    ReturnConvention convention = ReturnConvention::Simple;
    BidOfferUnit bid_offer_unit = BidOfferUnit::Shares;
    // Average expectation in the disposition table: mean forecast / price - 1
    // (default) or the raw mean forecast level.
    bool average_expectation_level = false;
    // Expectation formation on forecast levels instead of implied returns.
    bool expectation_level = false;
    std::vector<int> horizons{0, 2, 5, 10};
    // Restrict agent-level analyses to one agent group (empty = all).
    std::string group;
};

// Known analysis ids, in presentation order.
const std::vector<std::string>& analysis_ids();
bool is_analysis_id(const std::string& id);

// Identifies a simulation across sessions: label, shock tag and index.
std::string sim_key(const SessionMeta& meta);
std::string investor_key(const SessionMeta& meta, const std::string& agent);

struct MarketRoundAggregate {
    std::string sim_key;
    std::string market;
    int sim = 0;
    int period = 0;
    int price = 0;
    std::optional<int> prior_price;  // absent in the first main period
    std::int64_t volume = 0;
    double dollar_volume = 0.0;
    std::int64_t bid_total = 0;
    std::int64_t offer_total = 0;
    std::optional<double> disagreement;  // needs two agents with forecasts
    bool bubble = false;                 // strict: price > 14
};

// Main periods only, ordered by (simulation, period).
std::vector<MarketRoundAggregate> market_aggregates(std::span<const SimulationPanel> panels,
                                                    BidOfferUnit unit = BidOfferUnit::Shares);

// Population standard deviation; nullopt for fewer than two values.
std::optional<double> cross_sectional_sd(std::span<const double> values);

// One column of a regression table. A column whose design is degenerate keeps
// the estimator's message instead of a fit.
struct AnalysisColumn {
    std::string label;
    std::optional<FitResult> fit;
    std::string error;
};

struct AnalysisTable {
    std::string id;
    std::string title;
    std::string response;
    std::vector<std::string> regressors;  // display order
    std::vector<AnalysisColumn> columns;
};

AnalysisTable disposition_analysis(std::span<const SimulationPanel> panels, const AnalysisOptions& options = {});
AnalysisTable expectation_formation_analysis(std::span<const SimulationPanel> panels,
                                             const AnalysisOptions& options = {});
AnalysisTable expectation_trading_analysis(std::span<const SimulationPanel> panels,
                                           const AnalysisOptions& options = {});
AnalysisTable bid_offer_analysis(std::span<const SimulationPanel> panels, const AnalysisOptions& options = {});
AnalysisTable disagreement_volume_analysis(std::span<const SimulationPanel> panels,
                                           const AnalysisOptions& options = {});

// Stated action from reasoning text regressed against forecasts and trading.
AnalysisTable stated_action_expectations(std::span<const SimulationPanel> panels, const Lexicon& lexicon,
                                         const AnalysisOptions& options = {});
AnalysisTable stated_action_trading(std::span<const SimulationPanel> panels, const Lexicon& lexicon,
                                    const AnalysisOptions& options = {});

struct BubbleMetrics {
    std::string market;
    double mse_fv = 0.0;
    double pv_variance = 0.0;
    std::size_t simulations = 0;
    std::size_t rounds = 0;
};

// Per market label, main periods only.
std::vector<BubbleMetrics> bubble_metrics(std::span<const SimulationPanel> panels);

struct EpisodeDiffRow {
    std::string mechanism;
    TextSource source = TextSource::Plans;
    std::optional<GroupDifference> diff;
    std::string error;
};

// Audit scores in bubble rounds minus the rest, per mechanism and source,
// with investor, round and simulation fixed effects.
std::vector<EpisodeDiffRow> bubble_episode_diffs(std::span<const SimulationPanel> panels,
                                                 std::span<const AuditScoreRecord> scores);

struct PricePathPoint {
    int period = 0;
    double mean_price = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double mean_volume = 0.0;
    std::size_t n = 0;
};

// Cross-simulation mean price per main period with a 1.96 standard-error band.
std::vector<PricePathPoint> mean_price_path(std::span<const SimulationPanel> panels);

// Rises above the fundamental value by at least `min_excess` before the final
// period and falls back so the last mean price is below the peak by at least
// half the excess.
bool hump_shaped(std::span<const PricePathPoint> path, double fundamental, double min_excess = 1.0);

// Text rendering and CSV output.
void print_table(std::ostream& os, const AnalysisTable& table);
void write_table_csv(const std::filesystem::path& path, const AnalysisTable& table);
void print_bubble_metrics(std::ostream& os, std::span<const BubbleMetrics> rows);
void write_bubble_metrics_csv(const std::filesystem::path& path, std::span<const BubbleMetrics> rows);
void print_episode_diffs(std::ostream& os, std::span<const EpisodeDiffRow> rows);
void write_episode_diffs_csv(const std::filesystem::path& path, std::span<const EpisodeDiffRow> rows);

}  // namespace bubblelab
