#include "bubblelab/market.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "bubblelab/errors.hpp"

namespace bubblelab {

void MarketParams::validate() const {
    if (interest_rate <= Money{}) throw ConfigError("interest_rate must be positive");
    if (!(dividend_low < dividend_high)) throw ConfigError("dividend_low must be below dividend_high");
    if (dividend_low < Money{}) throw ConfigError("dividends must be non-negative");
    if (dividend_prob_high < Money{} || dividend_prob_high > Money::from_int(1))
        throw ConfigError("dividend_prob_high must lie in [0, 1]");
    if (main_periods < 1 || practice_periods < 0) throw ConfigError("period counts must be positive");
    if (initial_cash < Money{} || initial_shares < 0) throw ConfigError("endowment must be non-negative");
    if (buyout_value < Money{}) throw ConfigError("buyout_value must be non-negative");
    if (forecast_reward < Money{} || forecast_tolerance < Money{})
        throw ConfigError("forecast reward and tolerance must be non-negative");
}

Money MarketParams::expected_dividend() const {
    Money p_low = Money::from_int(1) - dividend_prob_high;
    return dividend_prob_high.times(dividend_high) + p_low.times(dividend_low);
}

Money fundamental_value(const MarketParams& params) {
    if (params.interest_rate <= Money{}) throw ConfigError("fundamental value undefined: interest_rate must be positive");
    // Work at 8 fractional digits so E[D] is not rounded before dividing.
    const Money one = Money::from_int(1);
    __int128 num = static_cast<__int128>(params.dividend_prob_high.raw()) * params.dividend_high.raw() +
                   static_cast<__int128>((one - params.dividend_prob_high).raw()) * params.dividend_low.raw();
    return Money::from_raw(div_round_half_even(num, params.interest_rate.raw()));
}

Portfolio initial_portfolio(const MarketParams& params) {
    Portfolio p;
    p.cash = params.initial_cash;
    p.shares = params.initial_shares;
    p.wapp = fundamental_value(params);
    return p;
}

const char* to_string(Side side) { return side == Side::Buy ? "BUY" : "SELL"; }

const char* to_string(CancelReason reason) {
    switch (reason) {
        case CancelReason::ShortSale: return "short_sale";
        case CancelReason::Margin: return "margin";
        case CancelReason::Invalid: return "invalid";
    }
    return "?";
}

// --- budget enforcement ---------------------------------------------------

namespace {

// Lowest price first; among equal prices the later submission goes first.
std::vector<std::size_t> removal_order(const std::vector<LimitOrder>& orders) {
    std::vector<std::size_t> idx(orders.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (orders[a].price != orders[b].price) return orders[a].price < orders[b].price;
        return orders[a].seq > orders[b].seq;
    });
    return idx;
}

void compact(std::vector<LimitOrder>& orders) {
    std::erase_if(orders, [](const LimitOrder& o) { return o.quantity <= 0; });
}

}  // namespace

EnforcementResult enforce_budget(std::span<const LimitOrder> orders, const Portfolio& portfolio) {
    EnforcementResult out;
    for (const auto& o : orders) {
        if (o.price < 1 || o.quantity < 1) {
            out.cancellations.push_back({o, std::max(o.quantity, 0), CancelReason::Invalid});
            continue;
        }
        (o.side == Side::Buy ? out.bids : out.asks).push_back(o);
    }

    std::int64_t offered = 0;
    for (const auto& a : out.asks) offered += a.quantity;
    std::int64_t excess_shares = offered - std::max<std::int64_t>(portfolio.shares, 0);
    if (excess_shares > 0) {
        for (std::size_t i : removal_order(out.asks)) {
            if (excess_shares <= 0) break;
            auto& ask = out.asks[i];
            int cut = static_cast<int>(std::min<std::int64_t>(ask.quantity, excess_shares));
            out.cancellations.push_back({ask, cut, CancelReason::ShortSale});
            ask.quantity -= cut;
            excess_shares -= cut;
        }
        compact(out.asks);
    }

    __int128 outlay = 0;
    for (const auto& b : out.bids) outlay += static_cast<__int128>(b.price) * b.quantity * Money::kScale;
    __int128 excess_cash = outlay - std::max<std::int64_t>(portfolio.cash.raw(), 0);
    if (excess_cash > 0) {
        for (std::size_t i : removal_order(out.bids)) {
            if (excess_cash <= 0) break;
            auto& bid = out.bids[i];
            __int128 unit = static_cast<__int128>(bid.price) * Money::kScale;
            __int128 whole = unit * bid.quantity;
            int cut = bid.quantity;
            if (whole > excess_cash) cut = static_cast<int>((excess_cash + unit - 1) / unit);
            out.cancellations.push_back({bid, cut, CancelReason::Margin});
            bid.quantity -= cut;
            excess_cash -= unit * cut;
        }
        compact(out.bids);
    }
    return out;
}

// --- clearing ----------------------------------------------------------------

std::vector<int> candidate_prices(const OrderBook& book) {
    std::set<int> prices;
    for (const auto& b : book.bids) prices.insert(b.price);
    for (const auto& a : book.asks) prices.insert(a.price);
    return {prices.begin(), prices.end()};
}

std::int64_t cumulative_demand(const OrderBook& book, int price) {
    std::int64_t q = 0;
    for (const auto& b : book.bids)
        if (b.price >= price) q += b.quantity;
    return q;
}

std::int64_t cumulative_supply(const OrderBook& book, int price) {
    std::int64_t q = 0;
    for (const auto& a : book.asks)
        if (a.price <= price) q += a.quantity;
    return q;
}

ClearingOutcome clear(const OrderBook& book) {
    ClearingOutcome out;
    const CandidateDiagnostic* best = nullptr;
    auto candidates = candidate_prices(book);
    out.candidate_diagnostics.reserve(candidates.size());
    for (int p : candidates) {
        std::int64_t qb = cumulative_demand(book, p);
        std::int64_t qa = cumulative_supply(book, p);
        out.candidate_diagnostics.push_back({p, qb, qa, std::min(qb, qa)});
    }
    for (const auto& c : out.candidate_diagnostics) {
        if (best == nullptr || c.volume > best->volume ||
            (c.volume == best->volume && std::llabs(c.demand - c.supply) < std::llabs(best->demand - best->supply)))
            best = &c;
    }

    if (best != nullptr && best->volume >= 1) {
        out.crossed = true;
        out.price = best->price;  // candidates are integers; flooring is the identity
        out.volume = best->volume;
        out.fills = allocate_fills(book, best->price, best->volume);
        return out;
    }
    if (!book.bids.empty() && !book.asks.empty()) {
        int max_bid = std::max_element(book.bids.begin(), book.bids.end(), [](auto& a, auto& b) {
                          return a.price < b.price;
                      })->price;
        int min_ask = std::min_element(book.asks.begin(), book.asks.end(), [](auto& a, auto& b) {
                          return a.price < b.price;
                      })->price;
        out.price = (max_bid + min_ask) / 2;
    }
    return out;
}

namespace {

struct QueueEntry {
    const LimitOrder* order;
    std::int64_t remaining;
};

std::vector<QueueEntry> build_queue(const std::vector<LimitOrder>& orders, bool buy_side, int price,
                                    std::int64_t volume) {
    std::vector<const LimitOrder*> eligible;
    for (const auto& o : orders)
        if (buy_side ? o.price >= price : o.price <= price) eligible.push_back(&o);
    std::stable_sort(eligible.begin(), eligible.end(), [buy_side](const LimitOrder* a, const LimitOrder* b) {
        if (a->price != b->price) return buy_side ? a->price > b->price : a->price < b->price;
        return std::tie(a->agent_id, a->seq) < std::tie(b->agent_id, b->seq);
    });
    std::vector<QueueEntry> queue;
    std::int64_t left = volume;
    for (const auto* o : eligible) {
        if (left == 0) break;
        std::int64_t take = std::min<std::int64_t>(o->quantity, left);
        queue.push_back({o, take});
        left -= take;
    }
    if (left != 0)
        throw InvariantViolation("allocate_fills: " + std::string(buy_side ? "demand" : "supply") +
                                 " short of clearing volume");
    return queue;
}

}  // namespace

std::vector<Fill> allocate_fills(const OrderBook& book, int price, std::int64_t volume) {
    auto buyers = build_queue(book.bids, true, price, volume);
    auto sellers = build_queue(book.asks, false, price, volume);
    std::vector<Fill> fills;
    std::size_t bi = 0, si = 0;
    while (bi < buyers.size() && si < sellers.size()) {
        std::int64_t q = std::min(buyers[bi].remaining, sellers[si].remaining);
        fills.push_back({buyers[bi].order->agent_id, sellers[si].order->agent_id, price, static_cast<int>(q)});
        buyers[bi].remaining -= q;
        sellers[si].remaining -= q;
        if (buyers[bi].remaining == 0) ++bi;
        if (sellers[si].remaining == 0) ++si;
    }
    std::int64_t executed = 0;
    for (const auto& f : fills) executed += f.quantity;
    if (executed != volume) throw InvariantViolation("allocate_fills: executed quantity differs from volume");
    return fills;
}

// --- settlement --------------------------------------------------------------

RoundLedger settle_round(PortfolioMap& portfolios, std::span<const Fill> fills, Money dividend,
                         const MarketParams& params) {
    RoundLedger ledger;
    ledger.dividend_per_share = dividend;
    for (const auto& [id, _] : portfolios) ledger.entries[id];

    for (const auto& f : fills) {
        if (!portfolios.contains(f.buyer_id) || !portfolios.contains(f.seller_id))
            throw InvariantViolation("fill references unknown agent");
        Money value = Money::from_int(f.price) * f.quantity;
        auto& buyer = ledger.entries[f.buyer_id];
        buyer.bought_shares += f.quantity;
        buyer.bought_cash += value;
        auto& seller = ledger.entries[f.seller_id];
        seller.sold_shares += f.quantity;
        seller.sold_cash += value;
    }

    for (auto& [id, pf] : portfolios) {
        auto& e = ledger.entries[id];
        if (e.bought_shares > 0) {
            // Purchases average against holdings at the start of the round.
            __int128 num = static_cast<__int128>(pf.shares) * pf.wapp.raw() + e.bought_cash.raw();
            pf.wapp = Money::from_raw(div_round_half_even(num, pf.shares + e.bought_shares));
        }
        e.trade_cash = e.sold_cash - e.bought_cash;
        e.trade_shares = e.bought_shares - e.sold_shares;
        pf.cash += e.trade_cash;
        pf.shares += e.trade_shares;
        if (pf.cash < Money{} || pf.shares < 0)
            throw InvariantViolation("settlement left agent " + id + " with cash " + pf.cash.to_string() +
                                     " and shares " + std::to_string(pf.shares));
        e.interest = pf.cash.times(params.interest_rate);
        pf.cash += e.interest;
        e.dividend = dividend * pf.shares;
        pf.cash += e.dividend;
    }
    return ledger;
}

std::map<AgentId, TerminalEntry> terminal_settlement(PortfolioMap& portfolios, const MarketParams& params) {
    std::map<AgentId, TerminalEntry> out;
    for (auto& [id, pf] : portfolios) {
        TerminalEntry t;
        t.redeemed_shares = pf.shares;
        t.buyout = params.buyout_value * pf.shares;
        t.bonus = pf.forecast_bonus_accrued;
        pf.cash += t.buyout;
        pf.shares = 0;
        pf.cash += t.bonus;
        pf.forecast_bonus_accrued = Money{};
        t.final_wealth = pf.cash;
        out[id] = t;
    }
    return out;
}

}  // namespace bubblelab
