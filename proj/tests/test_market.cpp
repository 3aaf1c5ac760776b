#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "bubblelab/errors.hpp"
#include "bubblelab/market.hpp"
#include "bubblelab/rng.hpp"
#include "oracles/oracles.hpp"

using namespace bubblelab;

namespace {

LimitOrder bid(const std::string& who, int p, int q, int seq = 0) { return {who, Side::Buy, p, q, seq}; }
LimitOrder ask(const std::string& who, int p, int q, int seq = 0) { return {who, Side::Sell, p, q, seq}; }

OrderBook worked_book() {
    OrderBook b;
    b.bids = {bid("A", 16, 2), bid("B", 15, 1)};
    b.asks = {ask("C", 14, 1), ask("D", 15, 2)};
    return b;
}

Portfolio holding(int cash, int shares) {
    Portfolio p;
    p.cash = Money::from_int(cash);
    p.shares = shares;
    p.wapp = Money::from_int(14);
    return p;
}

OrderBook random_book(Rng& rng) {
    OrderBook b;
    int n = static_cast<int>(rng.uniform_int(0, 12));
    for (int i = 0; i < n; ++i) {
        std::string who = "a" + std::to_string(rng.uniform_int(0, 5));
        int p = static_cast<int>(rng.uniform_int(1, 40));
        int q = static_cast<int>(rng.uniform_int(1, 5));
        if (rng.bernoulli(0.5)) b.bids.push_back(bid(who, p, q, i));
        else b.asks.push_back(ask(who, p, q, i));
    }
    return b;
}

}  // namespace

TEST_CASE("fundamental value of the default parameters") {
    MarketParams p;
    CHECK(fundamental_value(p) == Money::from_int(14));
    CHECK(p.expected_dividend() == Money::parse("0.7"));

    p.dividend_low = Money::parse("1.0");
    CHECK(fundamental_value(p) == Money::from_int(20));

    MarketParams q;
    q.dividend_prob_high = Money::parse("0.25");
    CHECK(fundamental_value(q).to_double() == doctest::Approx(oracle::perpetuity_value(0.4, 1.0, 0.25, 0.05)));
    CHECK(fundamental_value(q) == Money::from_int(11));

    MarketParams bad;
    bad.interest_rate = Money{};
    CHECK_THROWS_AS(fundamental_value(bad), ConfigError);
}

TEST_CASE("candidate prices and cumulative schedules") {
    auto b = worked_book();
    CHECK(candidate_prices(b) == std::vector<int>{14, 15, 16});
    CHECK(cumulative_demand(b, 15) == 3);
    CHECK(cumulative_supply(b, 15) == 3);
    CHECK(cumulative_demand(b, 14) == 3);
    CHECK(cumulative_supply(b, 14) == 1);
    CHECK(cumulative_demand(b, 16) == 2);
    CHECK(cumulative_supply(b, 16) == 3);

    OrderBook one;
    one.bids = {bid("A", 10, 5)};
    CHECK(candidate_prices(one) == std::vector<int>{10});
    OrderBook dup;
    dup.bids = {bid("A", 12, 1)};
    dup.asks = {ask("B", 12, 3)};
    CHECK(candidate_prices(dup) == std::vector<int>{12});
    CHECK(candidate_prices(OrderBook{}).empty());
}

TEST_CASE("clear: worked examples") {
    auto out = clear(worked_book());
    CHECK(out.crossed);
    REQUIRE(out.price);
    CHECK(*out.price == 15);
    CHECK(out.volume == 3);
    REQUIRE(out.candidate_diagnostics.size() == 3);
    CHECK(out.candidate_diagnostics[0].volume == 1);
    CHECK(out.candidate_diagnostics[1].volume == 3);
    CHECK(out.candidate_diagnostics[2].volume == 2);

    OrderBook nocross;
    nocross.bids = {bid("A", 12, 1)};
    nocross.asks = {ask("B", 16, 1)};
    auto nc = clear(nocross);
    CHECK_FALSE(nc.crossed);
    CHECK(nc.price == 14);
    CHECK(nc.volume == 0);
    CHECK(nc.fills.empty());

    OrderBook touch;
    touch.bids = {bid("A", 14, 1)};
    touch.asks = {ask("B", 14, 1)};
    auto t = clear(touch);
    CHECK(t.price == 14);
    CHECK(t.volume == 1);

    // Midpoint floors.
    OrderBook odd;
    odd.bids = {bid("A", 12, 1)};
    odd.asks = {ask("B", 15, 1)};
    CHECK(clear(odd).price == 13);

    OrderBook one_sided;
    one_sided.bids = {bid("A", 12, 1)};
    auto os = clear(one_sided);
    CHECK_FALSE(os.crossed);
    CHECK_FALSE(os.price.has_value());
    CHECK_FALSE(clear(OrderBook{}).price.has_value());
}

TEST_CASE("clear matches the brute-force oracle on random books") {
    Rng rng(20260101);
    for (int i = 0; i < 1000; ++i) {
        auto book = random_book(rng);
        auto got = clear(book);
        auto want = oracle::brute_force_clear(book);
        CHECK(got.volume == want.volume);
        if (want.volume > 0) {
            CHECK(got.crossed);
            CHECK(got.price == want.price);
            std::int64_t filled = 0;
            for (const auto& f : got.fills) {
                CHECK(f.price == *got.price);
                filled += f.quantity;
            }
            CHECK(filled == got.volume);
        } else {
            CHECK_FALSE(got.crossed);
            CHECK(got.fills.empty());
        }
    }
}

TEST_CASE("demand is non-increasing and supply non-decreasing over candidates") {
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        auto book = random_book(rng);
        auto cands = candidate_prices(book);
        for (std::size_t j = 1; j < cands.size(); ++j) {
            CHECK(cumulative_demand(book, cands[j]) <= cumulative_demand(book, cands[j - 1]));
            CHECK(cumulative_supply(book, cands[j]) >= cumulative_supply(book, cands[j - 1]));
        }
    }
}

TEST_CASE("clear is deterministic") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        auto book = random_book(rng);
        CHECK(clear(book) == clear(book));
    }
}

TEST_CASE("fill allocation priority") {
    auto fills = allocate_fills(worked_book(), 15, 3);
    std::map<std::string, std::int64_t> bought, sold;
    for (const auto& f : fills) {
        bought[f.buyer_id] += f.quantity;
        sold[f.seller_id] += f.quantity;
    }
    CHECK(bought["A"] == 2);
    CHECK(bought["B"] == 1);
    CHECK(sold["C"] == 1);
    CHECK(sold["D"] == 2);

    OrderBook rationed;
    rationed.bids = {bid("A", 15, 3)};
    rationed.asks = {ask("C", 15, 1)};
    auto r = allocate_fills(rationed, 15, 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].quantity == 1);
    CHECK(r[0].buyer_id == "A");

    OrderBook tie;
    tie.bids = {bid("Z", 15, 1)};
    tie.asks = {ask("b_seller", 15, 1), ask("a_seller", 15, 1)};
    auto t = allocate_fills(tie, 15, 1);
    REQUIRE(t.size() == 1);
    CHECK(t[0].seller_id == "a_seller");

    CHECK_THROWS_AS(allocate_fills(rationed, 15, 2), InvariantViolation);
}

TEST_CASE("enforce_budget: documented examples") {
    SUBCASE("margin: whole lowest bid cancelled") {
        std::vector<LimitOrder> orders{bid("A", 20, 2, 0), bid("A", 15, 1, 1)};
        auto r = enforce_budget(orders, holding(50, 0));
        REQUIRE(r.bids.size() == 1);
        CHECK(r.bids[0].price == 20);
        CHECK(r.bids[0].quantity == 2);
        REQUIRE(r.cancellations.size() == 1);
        CHECK(r.cancellations[0].order.price == 15);
        CHECK(r.cancellations[0].removed_quantity == 1);
        CHECK(r.cancellations[0].reason == CancelReason::Margin);
    }
    SUBCASE("short sale: lowest ask reduced") {
        std::vector<LimitOrder> orders{ask("A", 16, 2, 0), ask("A", 14, 2, 1)};
        auto r = enforce_budget(orders, holding(0, 3));
        REQUIRE(r.asks.size() == 2);
        std::int64_t total = 0;
        for (const auto& o : r.asks) {
            total += o.quantity;
            if (o.price == 16) CHECK(o.quantity == 2);
            if (o.price == 14) CHECK(o.quantity == 1);
        }
        CHECK(total == 3);
        REQUIRE(r.cancellations.size() == 1);
        CHECK(r.cancellations[0].reason == CancelReason::ShortSale);
    }
    SUBCASE("exactly binding") {
        std::vector<LimitOrder> orders{ask("A", 15, 4, 0), bid("A", 10, 10, 1)};
        auto r = enforce_budget(orders, holding(100, 4));
        CHECK(r.cancellations.empty());
        CHECK(r.asks.size() == 1);
        CHECK(r.bids.size() == 1);
    }
    SUBCASE("partial cut on the marginal bid") {
        std::vector<LimitOrder> orders{bid("A", 20, 2, 0), bid("A", 15, 3, 1)};
        auto r = enforce_budget(orders, holding(70, 0));
        // 40 + 45 > 70: one share comes off the 15 bid, which is exactly enough.
        std::int64_t outlay = 0;
        for (const auto& o : r.bids) outlay += static_cast<std::int64_t>(o.price) * o.quantity;
        CHECK(outlay <= 70);
        CHECK(outlay == 70);
        REQUIRE(r.cancellations.size() == 1);
        CHECK(r.cancellations[0].removed_quantity == 1);
    }
}

TEST_CASE("enforce_budget always returns a feasible set") {
    Rng rng(424242);
    for (int i = 0; i < 10000; ++i) {
        std::vector<LimitOrder> orders;
        int n = static_cast<int>(rng.uniform_int(0, 8));
        for (int j = 0; j < n; ++j) {
            int p = static_cast<int>(rng.uniform_int(1, 60));
            int q = static_cast<int>(rng.uniform_int(1, 12));
            orders.push_back(rng.bernoulli(0.5) ? bid("A", p, q, j) : ask("A", p, q, j));
        }
        Portfolio pf = holding(static_cast<int>(rng.uniform_int(0, 200)), static_cast<int>(rng.uniform_int(0, 10)));
        auto r = enforce_budget(orders, pf);
        Money outlay;
        std::int64_t sells = 0;
        for (const auto& o : r.bids) {
            CHECK(o.quantity >= 1);
            outlay += Money::from_int(o.price) * o.quantity;
        }
        for (const auto& o : r.asks) {
            CHECK(o.quantity >= 1);
            sells += o.quantity;
        }
        CHECK(outlay <= pf.cash);
        CHECK(sells <= pf.shares);
        // Nothing is lost silently: kept + removed = submitted.
        std::int64_t submitted = 0, kept = 0, removed = 0;
        for (const auto& o : orders) submitted += o.quantity;
        for (const auto& o : r.bids) kept += o.quantity;
        kept += sells;
        for (const auto& c : r.cancellations) removed += c.removed_quantity;
        CHECK(kept + removed == submitted);
    }
}

TEST_CASE("settle_round: trades, interest, dividend") {
    MarketParams params;
    SUBCASE("purchase updates wapp") {
        PortfolioMap pm{{"A", holding(100, 4)}, {"B", holding(100, 4)}};
        std::vector<Fill> fills{{"A", "B", 20, 2}};
        auto ledger = settle_round(pm, fills, Money{}, params);
        CHECK(ledger.entries["A"].trade_cash == Money::from_int(-40));
        CHECK(pm["A"].shares == 6);
        CHECK(pm["A"].wapp == Money::from_int(16));
        CHECK(pm["B"].wapp == Money::from_int(14));  // sales leave wapp alone
        CHECK(pm["A"].cash == Money::from_int(63));  // 60 * 1.05
        CHECK(pm["B"].cash == Money::parse("147"));  // 140 * 1.05
    }
    SUBCASE("interest only") {
        PortfolioMap pm{{"A", holding(100, 0)}};
        settle_round(pm, {}, Money::parse("1.0"), params);
        CHECK(pm["A"].cash == Money::from_int(105));
    }
    SUBCASE("dividend only") {
        PortfolioMap pm{{"A", holding(0, 4)}};
        auto ledger = settle_round(pm, {}, Money::parse("0.4"), params);
        CHECK(pm["A"].cash == Money::parse("1.6"));
        CHECK(pm["A"].shares == 4);
        CHECK(ledger.entries["A"].dividend == Money::parse("1.6"));
    }
    SUBCASE("self-fill nets to nothing") {
        PortfolioMap pm{{"A", holding(100, 4)}};
        std::vector<Fill> fills{{"A", "A", 15, 1}};
        auto ledger = settle_round(pm, fills, Money{}, params);
        CHECK(ledger.entries["A"].trade_cash == Money{});
        CHECK(ledger.entries["A"].trade_shares == 0);
        CHECK(pm["A"].shares == 4);
    }
}

TEST_CASE("wapp stays between old wapp and trade price") {
    Rng rng(8);
    MarketParams params;
    for (int i = 0; i < 500; ++i) {
        PortfolioMap pm{{"A", holding(1000, static_cast<int>(rng.uniform_int(0, 6)))}, {"B", holding(0, 50)}};
        pm["A"].wapp = Money::from_int(rng.uniform_int(1, 40));
        const Money old = pm["A"].wapp;
        int price = static_cast<int>(rng.uniform_int(1, 40));
        std::vector<Fill> fills{{"A", "B", price, static_cast<int>(rng.uniform_int(1, 5))}};
        settle_round(pm, fills, Money{}, params);
        Money lo = std::min(old, Money::from_int(price));
        Money hi = std::max(old, Money::from_int(price));
        if (pm["A"].shares == fills[0].quantity) lo = hi = Money::from_int(price);
        CHECK(pm["A"].wapp >= lo);
        CHECK(pm["A"].wapp <= hi);
    }
}

TEST_CASE("terminal settlement") {
    MarketParams params;
    PortfolioMap pm{{"A", holding(50, 4)}, {"B", holding(10, 0)}};
    pm["A"].forecast_bonus_accrued = Money::from_int(15);
    auto t = terminal_settlement(pm, params);
    CHECK(t["A"].final_wealth == Money::from_int(121));
    CHECK(t["A"].buyout == Money::from_int(56));
    CHECK(t["A"].redeemed_shares == 4);
    CHECK(t["B"].final_wealth == Money::from_int(10));
    CHECK(pm["A"].shares == 0);
}
