#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubblelab/market.hpp"
#include "bubblelab/taxonomy.hpp"

namespace bubblelab {

inline constexpr int kPanelSchemaVersion = 1;

class SchemaVersionError : public std::runtime_error {
public:
    SchemaVersionError(const std::string& file, int expected, int found);
    int expected() const { return expected_; }
    int found() const { return found_; }

private:
    int expected_;
    int found_;
};

// Malformed panel file (bad header, unparsable line, duplicate key).
class PanelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PriceSource { Clearing, Midpoint, CarriedForward };
const char* to_string(PriceSource s);

struct RoundRecord {
    int sim = 0;
    int period = 0;
    bool practice = false;
    int price = 0;
    PriceSource price_source = PriceSource::Clearing;
    std::int64_t volume = 0;
    Money dividend;
    // Post-enforcement book.
    std::int64_t bid_orders = 0;
    std::int64_t bid_shares = 0;
    std::int64_t ask_orders = 0;
    std::int64_t ask_shares = 0;
    // As submitted, before budget enforcement.
    std::int64_t submitted_bid_orders = 0;
    std::int64_t submitted_bid_shares = 0;
    std::int64_t submitted_ask_orders = 0;
    std::int64_t submitted_ask_shares = 0;
    int forfeits = 0;

    bool operator==(const RoundRecord&) const = default;
};

struct OrderRecord {
    Side side = Side::Buy;
    int price = 0;
    int quantity = 0;

    bool operator==(const OrderRecord&) const = default;
};

struct AgentRoundRecord {
    int sim = 0;
    std::string agent;
    std::string group;
    int period = 0;
    bool practice = false;
    bool forfeited = false;
    std::optional<std::string> forfeit_reason;
    std::vector<OrderRecord> submitted_orders;  // before enforcement
    std::vector<OrderRecord> accepted_orders;   // after enforcement
    std::int64_t bought_shares = 0;
    std::int64_t sold_shares = 0;
    Money bought_cash;
    Money sold_cash;
    Money interest;
    Money dividend;
    // End of period.
    Money cash;
    std::int64_t shares = 0;
    Money wapp;
    Money portfolio_value;  // cash + shares x reported price
    // Start-of-period state the dummies refer to.
    int prior_price = 0;
    Money prior_wapp;
    int buy_dummy = 0;                // executed net buyer this period
    std::optional<int> sell_dummy;    // null on a forfeited turn
    int gain_dummy = 0;               // prior price above prior wapp

    bool operator==(const AgentRoundRecord&) const = default;
};

struct ForecastRecord {
    int sim = 0;
    std::string agent;
    int period = 0;  // decision period
    bool practice = false;
    int horizon = 0;
    int forecast = 0;
    int base_price = 0;  // price known when the forecast was made
    int target_period = 0;
    std::optional<int> realized;
    std::optional<int> error;  // realized - forecast
    double expected_return = 0.0;
    bool rewarded = false;

    bool operator==(const ForecastRecord&) const = default;
};

struct ReasoningRecord {
    int sim = 0;
    std::string agent;
    int period = 0;
    bool practice = false;
    bool forfeited = false;
    std::string plans;
    std::string insights;
    std::string market_analysis;
    std::string strategy;

    bool operator==(const ReasoningRecord&) const = default;
};

struct AgentMeta {
    std::string id;
    std::string group;
    std::string kind;  // "llm" or a scripted kind
};

struct TerminalRecord {
    std::string agent;
    std::int64_t redeemed_shares = 0;
    Money buyout;
    Money bonus;
    Money final_wealth;
};

struct SessionMeta {
    int sim = 0;
    std::uint64_t seed = 0;
    std::string market_label;
    std::string market_type;
    MarketParams params;
    std::optional<ShockSpec> shock;
    std::vector<AgentMeta> agents;
    bool reset_after_practice = true;
    std::vector<TerminalRecord> terminal;
    Money total_interest;
    Money total_dividends;
    Money total_bonus;
    Money total_buyout;
    Money initial_cash_total;
    Money final_wealth_total;
};

// One simulation's artifacts.
struct SimulationPanel {
    SessionMeta meta;
    std::vector<RoundRecord> rounds;
    std::vector<AgentRoundRecord> agent_rounds;
    std::vector<ForecastRecord> forecasts;
    std::vector<ReasoningRecord> reasoning;
};

// Fills buy/sell/gain dummies from the raw fields.
void derive_dummies(AgentRoundRecord& record);
int sell_dummy_from_orders(std::span<const OrderRecord> submitted);

// Record-level JSON text (one line, no header).
std::string to_json_line(const RoundRecord& r);
std::string to_json_line(const AgentRoundRecord& r);
std::string to_json_line(const ForecastRecord& r);
std::string to_json_line(const ReasoningRecord& r);

void write_rounds(const std::filesystem::path& path, std::span<const RoundRecord> rows);
void write_agent_rounds(const std::filesystem::path& path, std::span<const AgentRoundRecord> rows);
void write_forecasts(const std::filesystem::path& path, std::span<const ForecastRecord> rows);
void write_reasoning(const std::filesystem::path& path, std::span<const ReasoningRecord> rows);
void write_session_meta(const std::filesystem::path& path, const SessionMeta& meta);

std::vector<RoundRecord> read_rounds(const std::filesystem::path& path);
std::vector<AgentRoundRecord> read_agent_rounds(const std::filesystem::path& path);
std::vector<ForecastRecord> read_forecasts(const std::filesystem::path& path);
std::vector<ReasoningRecord> read_reasoning(const std::filesystem::path& path);
SessionMeta read_session_meta(const std::filesystem::path& path);

void write_simulation(const std::filesystem::path& dir, const SimulationPanel& panel);
SimulationPanel read_simulation(const std::filesystem::path& dir);

// Accepts a simulation directory or a directory of sim_* subdirectories
// (searched one level deeper as well, so a shock-study root works).
std::vector<SimulationPanel> load_panels(const std::filesystem::path& root);

// Schema header helpers shared by every JSONL artifact.
std::string jsonl_header(const std::string& schema);
// Throws PanelFormatError or SchemaVersionError.
void check_jsonl_header(const std::string& line, const std::string& schema, const std::string& file);

// CSV exports; columns documented in the README.
void export_forecasts_csv(const std::filesystem::path& path, std::span<const SimulationPanel> panels);
void export_rounds_csv(const std::filesystem::path& path, std::span<const SimulationPanel> panels);

}  // namespace bubblelab
