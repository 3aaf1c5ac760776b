#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bubblelab/money.hpp"

namespace bubblelab {

using AgentId = std::string;

struct MarketParams {
    Money interest_rate = Money::parse("0.05");
    Money dividend_low = Money::parse("0.4");
    Money dividend_high = Money::parse("1.0");
    Money dividend_prob_high = Money::parse("0.5");
    int main_periods = 20;
    int practice_periods = 3;
    Money buyout_value = Money::from_int(14);
    Money initial_cash = Money::from_int(100);
    int initial_shares = 4;
    Money forecast_reward = Money::from_int(5);
    Money forecast_tolerance = Money::parse("2.5");

    // Throws ConfigError on any violated invariant.
    void validate() const;
    Money expected_dividend() const;
};

// E[D] / r, exact in fixed point. Throws ConfigError when r is not positive.
Money fundamental_value(const MarketParams& params);

enum class Side { Buy, Sell };

struct LimitOrder {
    AgentId agent_id;
    Side side = Side::Buy;
    int price = 0;
    int quantity = 0;
    int seq = 0;

    bool operator==(const LimitOrder&) const = default;
};

struct OrderBook {
    int round = 0;
    std::vector<LimitOrder> bids;
    std::vector<LimitOrder> asks;
};

struct Fill {
    AgentId buyer_id;
    AgentId seller_id;
    int price = 0;
    int quantity = 0;

    bool operator==(const Fill&) const = default;
};

struct CandidateDiagnostic {
    int price = 0;
    std::int64_t demand = 0;
    std::int64_t supply = 0;
    std::int64_t volume = 0;

    bool operator==(const CandidateDiagnostic&) const = default;
};

struct ClearingOutcome {
    bool crossed = false;
    // Clearing price when crossed, floored midpoint when not crossed,
    // empty when either side of the book is empty.
    std::optional<int> price;
    std::int64_t volume = 0;
    std::vector<Fill> fills;
    std::vector<CandidateDiagnostic> candidate_diagnostics;

    bool operator==(const ClearingOutcome&) const = default;
};

struct Portfolio {
    Money cash;
    std::int64_t shares = 0;
    Money wapp;
    Money forecast_bonus_accrued;

    bool operator==(const Portfolio&) const = default;
};

Portfolio initial_portfolio(const MarketParams& params);

// --- budget enforcement ---------------------------------------------------

enum class CancelReason { ShortSale, Margin, Invalid };

struct Cancellation {
    LimitOrder order;  // as submitted
    int removed_quantity = 0;
    CancelReason reason = CancelReason::Margin;

    bool operator==(const Cancellation&) const = default;
};

struct EnforcementResult {
    std::vector<LimitOrder> bids;
    std::vector<LimitOrder> asks;
    std::vector<Cancellation> cancellations;
};

// Makes one agent's orders feasible: no short sales, no margin buying.
// Excess sells come off the lowest asks first; bids are cancelled
// lowest price first with a partial cut on the marginal bid.
EnforcementResult enforce_budget(std::span<const LimitOrder> orders, const Portfolio& portfolio);

// --- clearing ----------------------------------------------------------------

std::vector<int> candidate_prices(const OrderBook& book);
std::int64_t cumulative_demand(const OrderBook& book, int price);
std::int64_t cumulative_supply(const OrderBook& book, int price);

ClearingOutcome clear(const OrderBook& book);

// Price priority, then ascending (agent_id, seq) at equal prices. Buyer and
// seller queues are zipped greedily. Throws InvariantViolation when the book
// cannot supply `volume` on either side.
std::vector<Fill> allocate_fills(const OrderBook& book, int price, std::int64_t volume);

// --- settlement --------------------------------------------------------------

struct LedgerEntry {
    Money trade_cash;  // signed
    std::int64_t trade_shares = 0;  // signed
    std::int64_t bought_shares = 0;
    std::int64_t sold_shares = 0;
    Money bought_cash;
    Money sold_cash;
    Money interest;
    Money dividend;

    bool operator==(const LedgerEntry&) const = default;
};

struct RoundLedger {
    Money dividend_per_share;
    std::map<AgentId, LedgerEntry> entries;
};

using PortfolioMap = std::map<AgentId, Portfolio>;

// Trades, then interest on post-trade cash, then dividends.
RoundLedger settle_round(PortfolioMap& portfolios, std::span<const Fill> fills, Money dividend,
                         const MarketParams& params);

struct TerminalEntry {
    Money buyout;
    std::int64_t redeemed_shares = 0;
    Money bonus;
    Money final_wealth;
};

std::map<AgentId, TerminalEntry> terminal_settlement(PortfolioMap& portfolios, const MarketParams& params);

const char* to_string(Side side);
const char* to_string(CancelReason reason);

}  // namespace bubblelab
