#include <cstdio>
#include <sstream>

#include "bubblelab/llm.hpp"

namespace bubblelab {

namespace {

// "1" -> "1.0", "0.4" -> "0.4", "14" -> "14.0"
std::string one_decimal_at_least(Money m) {
    std::string s = m.to_string();
    if (s.find('.') == std::string::npos) s += ".0";
    return s;
}

std::string percent(Money rate) { return (rate * 100).to_string() + "%"; }

}  // namespace

std::string render_system_prompt(const MarketParams& params, const ShockSpec* shock) {
    const std::string fv = one_decimal_at_least(fundamental_value(params));
    const std::string ed = one_decimal_at_least(params.expected_dividend());
    const bool equal_odds = params.dividend_prob_high == Money::parse("0.5");
    std::ostringstream out;
    out << "System Role: You are a rational, profit-maximizing participant in a simulated financial market. "
           "Your sole objective is to maximize your final wealth (total cash balance) at the end of the experiment.\n"
        << "\n"
        << "Market Environment and Asset Fundamentals:\n"
        << "- Duration: The market operates for exactly " << params.main_periods << " trading periods.\n"
        << "- Assets: You can hold Cash and Stock.\n"
        << "- Risk-Free Rate: Uninvested Cash held at the end of a period earns an interest rate of r = "
        << percent(params.interest_rate) << ".\n"
        << "- Dividends: Each share of Stock pays a stochastic dividend at the end of each period. The dividend is "
           "drawn from a uniform distribution: D in {"
        << one_decimal_at_least(params.dividend_low) << ", " << one_decimal_at_least(params.dividend_high) << "} with "
        << (equal_odds ? std::string("equal probability")
                       : "probability " + params.dividend_prob_high.to_string() + " on the higher value")
        << ". The expected dividend is E[D] = " << ed << ".\n"
        << "- Terminal Value: At the end of period " << params.main_periods
        << ", the market closes. All outstanding shares of Stock are automatically liquidated for Cash at a fixed "
           "fundamental value of "
        << one_decimal_at_least(params.buyout_value) << " units per share.\n"
        << "- Note on Valuation: Because the expected dividend is " << ed << " and the interest rate is "
        << percent(params.interest_rate) << ", the fundamental value of the stock is exactly " << ed << "/"
        << params.interest_rate.to_string() << " = " << fv << " at all times.";
    if (shock != nullptr && !shock->clause.empty()) out << "\n\n" << shock->clause;
    return out.str();
}

std::string render_state_prompt(const AgentObservation& obs, const MarketParams& params) {
    std::ostringstream out;
    if (obs.notice) out << *obs.notice << "\n\n";
    out << "--- CURRENT PERIOD: " << obs.period << " of " << params.main_periods;
    if (obs.practice) out << " (practice)";
    out << " ---\n"
        << "Your Current Portfolio:\n"
        << "- Cash Balance: " << obs.portfolio.cash.to_string() << " units\n"
        << "- Stock Holdings: " << obs.portfolio.shares << " shares\n"
        << "\n"
        << "Market History (Last 3 Periods):\n";
    if (obs.price_history.empty()) out << "- No completed periods yet.\n";
    int shown = 0;
    for (auto it = obs.price_history.rbegin(); it != obs.price_history.rend() && shown < 3; ++it, ++shown)
        out << "- Period " << it->period << ": Clearing Price = " << it->price << ", Volume = " << it->volume
            << ", Dividend Paid = " << one_decimal_at_least(it->dividend) << "\n";
    out << "\n"
        << "Your Recent Trades:\n";
    if (obs.recent_trades.empty()) out << "- None yet.\n";
    for (const auto& t : obs.recent_trades) {
        out << "- Period " << t.period << ": ";
        if (t.bought > 0)
            out << "Bought " << t.bought << " shares at price " << t.price;
        else
            out << "Bought 0 shares";
        out << "; ";
        if (t.sold > 0)
            out << "Sold " << t.sold << " shares at price " << t.price;
        else
            out << "Sold 0 shares";
        out << "\n";
    }
    out << "\n"
        << "Current Market Price: " << obs.current_price << "\n"
        << "\n"
        << "Your PLANS.txt:\n"
        << (obs.memory.plans.empty() ? "(empty)" : obs.memory.plans) << "\n"
        << "\n"
        << "Your INSIGHTS.txt:\n"
        << (obs.memory.insights.empty() ? "(empty)" : obs.memory.insights) << "\n"
        << "\n"
        << "Reminder: the fundamental value of the stock is exactly "
        << one_decimal_at_least(fundamental_value(params)) << ".";
    return out.str();
}

std::string render_schema_prompt(const MarketParams& params, const ForecastBounds& bounds) {
    std::ostringstream out;
    out << "Respond with a single JSON object that follows this schema exactly:\n"
        << R"({
  "cognitive_process": {
    "market_analysis": "<string: Analyze recent price trends relative to the fundamental value of 14.0>",
    "strategy_formulation": "<string: Detail your planned orders and justify the prices based on your budget>"
  },
  "price_forecasts": {
    "period_t": <integer: expected clearing price for the current period>,
    "period_t_plus_2": <integer: expected clearing price 2 periods from now>,
    "period_t_plus_5": <integer: expected clearing price 5 periods from now>,
    "period_t_plus_10": <integer: expected clearing price 10 periods from now>
  },
  "orders": [
    {
      "type": "<string: strictly 'BUY' or 'SELL'>",
      "price": <integer: limit price, must be > 0>,
      "quantity": <integer: number of shares, must be > 0>
    }
  ],
  "memory_update": {
    "update_plans_txt": "<string: Forward-looking strategies to save for next round>",
    "update_insights_txt": "<string: Lessons learned or mistakes to avoid>"
  }
})"
        << "\n\n"
        << "Incentivized Forecasting Rules: for every forecast falling within +/-"
        << params.forecast_tolerance.to_string() << " units of the realized market-clearing price, a bonus of "
        << one_decimal_at_least(params.forecast_reward) << " Cash units will be added to your final wealth. "
        << "Forecasts must be non-negative integers no larger than " << bounds.near_multiplier
        << " times the current market price for period_t and period_t_plus_2, and no larger than "
        << bounds.far_multiplier << " times the current market price for period_t_plus_5 and period_t_plus_10.\n"
        << "\n"
        << "Rules:\n"
        << "- No Short Selling: if the sum of quantities across all SELL orders exceeds your Stock Holdings, the "
           "excess sell orders are cancelled, keeping the orders with the highest ask prices.\n"
        << "- No Margin Buying: if the total outlay of your BUY orders (price times quantity) exceeds your Cash "
           "Balance, the lowest-priced bids are cancelled until the outlay fits.\n"
        << "- Formatting Errors: if you fail to return valid JSON, or return strings instead of integers for "
           "prices/quantities, you lose your turn and submit zero orders for the period.";
    return out.str();
}

const std::string& reflection_prompt_text() {
    static const std::string text =
        "You have completed 3 practice rounds. Review your trading performance. Did you buy above the fundamental "
        "value? Did you sell below it? Write a comprehensive set of rules for yourself in your INSIGHTS.txt file to "
        "guide your behavior in the real market.";
    return text;
}

PromptBundle build_prompts(const AgentObservation& obs, const MarketParams& params, const ShockSpec* shock,
                           bool with_reflection, const ForecastBounds& bounds) {
    PromptBundle b;
    b.system_prompt = render_system_prompt(params, shock);
    b.state_prompt = render_state_prompt(obs, params);
    b.schema_prompt = render_schema_prompt(params, bounds);
    if (with_reflection) b.reflection_prompt = reflection_prompt_text();
    return b;
}

std::uint64_t prompt_hash(const PromptBundle& bundle) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;  // part separator
        h *= 0x100000001b3ULL;
    };
    feed(bundle.system_prompt);
    feed(bundle.state_prompt);
    feed(bundle.schema_prompt);
    feed(bundle.reflection_prompt.value_or(""));
    return h;
}

}  // namespace bubblelab
