#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bubblelab/analytics.hpp"
#include "bubblelab/config.hpp"
#include "bubblelab/errors.hpp"
#include "bubblelab/rng.hpp"
#include "bubblelab/session.hpp"
#include "oracles/oracles.hpp"

using namespace bubblelab;
namespace fs = std::filesystem;

namespace {

// Hand-built panel: main periods 1..prices.size(), one record per agent per period.
SimulationPanel synthetic_panel(const std::string& label, int sim, const std::vector<int>& prices, int agents,
                                Rng& rng) {
    SimulationPanel p;
    p.meta.market_label = label;
    p.meta.sim = sim;
    for (int a = 0; a < agents; ++a) p.meta.agents.push_back({"a" + std::to_string(a), "g", "noise"});
    for (std::size_t t = 0; t < prices.size(); ++t) {
        RoundRecord r;
        r.sim = sim;
        r.period = static_cast<int>(t) + 1;
        r.price = prices[t];
        r.volume = rng.uniform_int(0, 10);
        r.bid_shares = rng.uniform_int(0, 30);
        r.ask_shares = rng.uniform_int(0, 30);
        r.bid_orders = rng.uniform_int(0, 10);
        r.ask_orders = rng.uniform_int(0, 10);
        p.rounds.push_back(r);
        const int base = t == 0 ? 14 : prices[t - 1];
        for (int a = 0; a < agents; ++a) {
            AgentRoundRecord ar;
            ar.sim = sim;
            ar.agent = "a" + std::to_string(a);
            ar.group = "g";
            ar.period = r.period;
            ar.prior_price = base;
            ar.portfolio_value = Money::from_int(100 + a * 10);
            ar.bought_shares = rng.uniform_int(0, 2);
            ar.sold_shares = rng.uniform_int(0, 2);
            ar.submitted_orders = {{rng.bernoulli(0.5) ? Side::Buy : Side::Sell, base, 1}};
            ar.prior_wapp = Money::from_int(rng.uniform_int(10, 18));
            derive_dummies(ar);
            p.agent_rounds.push_back(ar);
            for (int h : kForecastHorizons) {
                ForecastRecord f;
                f.sim = sim;
                f.agent = ar.agent;
                f.period = r.period;
                f.horizon = h;
                f.base_price = base;
                f.forecast = std::max(1, base + static_cast<int>(rng.uniform_int(-3, 5)));
                f.target_period = f.period + h;
                f.expected_return = static_cast<double>(f.forecast) / base - 1.0;
                p.forecasts.push_back(f);
            }
        }
    }
    return p;
}

std::vector<int> random_prices(Rng& rng, int n = 20) {
    std::vector<int> out;
    int p = 14;
    for (int i = 0; i < n; ++i) {
        p = std::max(2, p + static_cast<int>(rng.uniform_int(-3, 3)));
        out.push_back(p);
    }
    return out;
}

const FitResult& fitted(const AnalysisTable& t, std::size_t column) {
    REQUIRE(column < t.columns.size());
    INFO(t.columns[column].error);
    REQUIRE(t.columns[column].fit.has_value());
    return *t.columns[column].fit;
}

}  // namespace

TEST_CASE("bubble metrics by hand") {
    SimulationPanel p;
    p.meta.market_label = "m";
    for (int t = 1; t <= 2; ++t) {
        RoundRecord r;
        r.period = t;
        r.price = t == 1 ? 15 : 13;
        p.rounds.push_back(r);
        for (int a = 0; a < 2; ++a) {
            AgentRoundRecord ar;
            ar.period = t;
            ar.agent = "a" + std::to_string(a);
            ar.portfolio_value = Money::from_int(a == 0 ? 100 : 110);
            p.agent_rounds.push_back(ar);
        }
    }
    RoundRecord practice;
    practice.practice = true;
    practice.period = 0;
    practice.price = 40;
    p.rounds.push_back(practice);
    std::vector<SimulationPanel> panels{p};
    auto m = bubble_metrics(panels);
    REQUIRE(m.size() == 1);
    CHECK(m[0].mse_fv == doctest::Approx(1.0));
    CHECK(m[0].pv_variance == doctest::Approx(25.0));
    CHECK(m[0].rounds == 2);

    // Fundamental value follows the market parameters.
    panels[0].meta.params.dividend_low = Money::parse("0.6");  // E[D] = 0.8, FV = 16
    auto m16 = bubble_metrics(panels);
    CHECK(m16[0].mse_fv == doctest::Approx((1.0 + 9.0) / 2.0));
}

TEST_CASE("cross-sectional dispersion") {
    std::vector<double> one{3.0};
    CHECK_FALSE(cross_sectional_sd(one).has_value());
    std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(*cross_sectional_sd(v) == doctest::Approx(2.0));
}

TEST_CASE("market aggregates") {
    Rng rng(1);
    auto p = synthetic_panel("m", 0, {14, 16, 15}, 3, rng);
    std::vector<SimulationPanel> panels{p};
    auto shares = market_aggregates(panels, BidOfferUnit::Shares);
    auto orders = market_aggregates(panels, BidOfferUnit::Orders);
    REQUIRE(shares.size() == 3);
    CHECK_FALSE(shares[0].prior_price.has_value());
    CHECK(shares[1].prior_price == 14);
    CHECK(shares[1].bubble);
    CHECK_FALSE(shares[0].bubble);
    CHECK(shares[2].dollar_volume == doctest::Approx(15.0 * p.rounds[2].volume));
    CHECK(shares[1].bid_total == p.rounds[1].bid_shares);
    CHECK(orders[1].bid_total == p.rounds[1].bid_orders);

    // Disagreement oracle: population SD of per-agent mean forecasts.
    for (int t = 1; t <= 3; ++t) {
        std::vector<double> means;
        for (int a = 0; a < 3; ++a) {
            double s = 0;
            for (const auto& f : p.forecasts)
                if (f.period == t && f.agent == "a" + std::to_string(a)) s += f.forecast;
            means.push_back(s / 4);
        }
        double m = (means[0] + means[1] + means[2]) / 3;
        double var = 0;
        for (double x : means) var += (x - m) * (x - m) / 3;
        CHECK(*shares[t - 1].disagreement == doctest::Approx(std::sqrt(var)));
    }
}

TEST_CASE("bid-offer table matches the oracle") {
    Rng rng(2);
    std::vector<SimulationPanel> panels;
    for (int s = 0; s < 12; ++s) panels.push_back(synthetic_panel(s < 6 ? "A" : "B", s, random_prices(rng), 2, rng));
    for (auto unit : {BidOfferUnit::Shares, BidOfferUnit::Orders}) {
        AnalysisOptions opt;
        opt.bid_offer_unit = unit;
        auto table = bid_offer_analysis(panels, opt);
        REQUIRE(table.columns.size() == 6);

        std::vector<double> y, gap;
        std::vector<std::string> sim, round, market;
        for (const auto& p : panels)
            for (std::size_t t = 1; t < p.rounds.size(); ++t) {
                const auto& prev = p.rounds[t - 1];
                y.push_back(p.rounds[t].price - prev.price);
                gap.push_back(unit == BidOfferUnit::Shares ? double(prev.bid_shares - prev.ask_shares)
                                                           : double(prev.bid_orders - prev.ask_orders));
                sim.push_back(p.meta.market_label + std::to_string(p.meta.sim));
                round.push_back(std::to_string(p.rounds[t].period));
                market.push_back(p.meta.market_label);
            }
        const std::vector<std::vector<std::vector<std::string>>> fes{{}, {round}, {sim}, {sim, round}};
        for (std::size_t c = 0; c < fes.size(); ++c) {
            CAPTURE(c);
            auto want = oracle::dummy_variable_ols(y, {gap}, fes[c], sim);
            const auto& got = fitted(table, c);
            CHECK(got.coef("bid_offer_gap").estimate == doctest::Approx(want.beta[0]).epsilon(1e-8));
            CHECK(got.coef("bid_offer_gap").std_error == doctest::Approx(want.se[0]).epsilon(1e-8));
            CHECK(got.n == y.size());
            CHECK(got.clusters == 12);
        }
        // Market FE nested in sim leaves the sim-FE estimate unchanged.
        CHECK(fitted(table, 4).coef("bid_offer_gap").estimate ==
              doctest::Approx(fitted(table, 2).coef("bid_offer_gap").estimate).epsilon(1e-8));
        CHECK(fitted(table, 5).coef("bid_offer_gap").estimate ==
              doctest::Approx(fitted(table, 3).coef("bid_offer_gap").estimate).epsilon(1e-8));
    }
}

TEST_CASE("expectation formation matches the oracle") {
    Rng rng(3);
    std::vector<SimulationPanel> panels;
    for (int s = 0; s < 6; ++s) panels.push_back(synthetic_panel("A", s, random_prices(rng), 3, rng));
    auto table = expectation_formation_analysis(panels);
    REQUIRE(table.columns.size() == 8);
    for (std::size_t hi = 0; hi < 4; ++hi) {
        const int h = kForecastHorizons[hi];
        std::vector<double> y;
        std::vector<std::vector<double>> lags(4);
        std::vector<std::string> investor, round, sim;
        for (const auto& p : panels) {
            std::map<int, double> price;
            for (const auto& r : p.rounds) price[r.period] = r.price;
            for (const auto& f : p.forecasts) {
                if (f.horizon != h || f.period < 6) continue;
                y.push_back(static_cast<double>(f.forecast) / f.base_price - 1.0);
                for (int k = 1; k <= 4; ++k)
                    lags[k - 1].push_back(price[f.period - k] / price[f.period - 1 - k] - 1.0);
                sim.push_back(std::to_string(p.meta.sim));
                investor.push_back(sim.back() + f.agent);
                round.push_back(std::to_string(f.period));
            }
        }
        CAPTURE(h);
        auto inv = oracle::dummy_variable_ols(y, lags, {investor}, investor);
        auto full = oracle::dummy_variable_ols(y, lags, {investor, round, sim}, investor);
        const auto& c1 = fitted(table, 2 * hi);
        const auto& c2 = fitted(table, 2 * hi + 1);
        for (int k = 0; k < 4; ++k) {
            CHECK(c1.coefficients[k].estimate == doctest::Approx(inv.beta[k]).epsilon(1e-8));
            CHECK(c1.coefficients[k].std_error == doctest::Approx(inv.se[k]).epsilon(1e-8));
            CHECK(c2.coefficients[k].estimate == doctest::Approx(full.beta[k]).epsilon(1e-7));
        }
    }
}

TEST_CASE("expectation trading matches the oracle") {
    Rng rng(4);
    std::vector<SimulationPanel> panels;
    for (int s = 0; s < 5; ++s) panels.push_back(synthetic_panel("A", s, random_prices(rng), 4, rng));
    auto table = expectation_trading_analysis(panels);
    REQUIRE(table.columns.size() == 8);
    std::vector<double> y, er;
    std::vector<std::string> investor;
    for (const auto& p : panels)
        for (const auto& ar : p.agent_rounds) {
            for (const auto& f : p.forecasts)
                if (f.agent == ar.agent && f.period == ar.period && f.horizon == 2)
                    er.push_back(static_cast<double>(f.forecast) / f.base_price - 1.0);
            y.push_back(ar.buy_dummy);
            investor.push_back(std::to_string(p.meta.sim) + ar.agent);
        }
    auto want = oracle::dummy_variable_ols(y, {er}, {investor}, investor);
    const auto& got = fitted(table, 2);  // h=2, investor FE
    CHECK(got.coefficients[0].estimate == doctest::Approx(want.beta[0]).epsilon(1e-8));
    CHECK(got.coefficients[0].std_error == doctest::Approx(want.se[0]).epsilon(1e-8));
}

TEST_CASE("disposition table matches the oracle") {
    Rng rng(5);
    std::vector<SimulationPanel> panels;
    for (int s = 0; s < 5; ++s) panels.push_back(synthetic_panel("A", s, random_prices(rng), 4, rng));
    auto table = disposition_analysis(panels);
    REQUIRE(table.columns.size() >= 2);
    std::vector<double> y, gain;
    std::vector<std::string> investor;
    for (const auto& p : panels)
        for (const auto& ar : p.agent_rounds) {
            y.push_back(*ar.sell_dummy);
            gain.push_back(ar.gain_dummy);
            investor.push_back(std::to_string(p.meta.sim) + ar.agent);
        }
    auto want = oracle::dummy_variable_ols(y, {gain}, {investor}, investor);
    const auto& got = fitted(table, 0);
    CHECK(got.coef("gain_dummy").estimate == doctest::Approx(want.beta[0]).epsilon(1e-8));
    CHECK(got.coef("gain_dummy").std_error == doctest::Approx(want.se[0]).epsilon(1e-8));
}

TEST_CASE("no disposition effect without the sell boost") {
    auto cfg = parse_session_config(R"(
market: {type: scripted, label: no_boost}
seed: 8
simulations: 10
agents:
  - {kind: disposition, count: 20, disposition_sell_boost: 0.0, disposition_base_sell: 0.4, noise_scale: 2}
)");
    auto panels = run_session(cfg, {.write = false});
    auto table = disposition_analysis(panels);
    const auto& f = fitted(table, 0);
    CHECK(std::abs(f.coef("gain_dummy").t_stat) < 2.0);
}

TEST_CASE("disagreement with identical forecasts is degenerate") {
    Rng rng(6);
    std::vector<SimulationPanel> panels;
    for (int s = 0; s < 4; ++s) {
        auto p = synthetic_panel("A", s, random_prices(rng), 3, rng);
        for (auto& f : p.forecasts) f.forecast = 14;
        panels.push_back(p);
    }
    auto table = disagreement_volume_analysis(panels);
    REQUIRE(table.columns.size() == 4);
    for (const auto& c : table.columns) {
        CHECK_FALSE(c.fit.has_value());
        CHECK(c.error.find("zero variance") != std::string::npos);
    }
    // Printing a table with failed columns still works.
    std::ostringstream os;
    print_table(os, table);
    CHECK(os.str().find("disagreement") != std::string::npos);
}

TEST_CASE("mean price path and hump detection") {
    std::vector<PricePathPoint> hump, flat, late, rising;
    for (int t = 1; t <= 20; ++t) {
        double h = t <= 10 ? 14 + t : 24 - (t - 10);
        hump.push_back({t, h, h, h, 0, 1});
        flat.push_back({t, 14, 14, 14, 0, 1});
        double l = t < 20 ? 14 + 0.5 * t : 30;
        late.push_back({t, l, l, l, 0, 1});
        rising.push_back({t, 14.0 + t, 0, 0, 0, 1});
    }
    CHECK(hump_shaped(hump, 14));
    CHECK_FALSE(hump_shaped(flat, 14));
    CHECK_FALSE(hump_shaped(late, 14));
    CHECK_FALSE(hump_shaped(rising, 14));

    Rng rng(7);
    std::vector<SimulationPanel> panels;
    panels.push_back(synthetic_panel("A", 0, std::vector<int>(5, 10), 1, rng));
    panels.push_back(synthetic_panel("A", 1, std::vector<int>(5, 20), 1, rng));
    auto path = mean_price_path(panels);
    REQUIRE(path.size() == 5);
    CHECK(path[0].mean_price == doctest::Approx(15));
    CHECK(path[0].n == 2);
    // SE of {10, 20} is 5; band is 1.96 SE wide each way.
    CHECK(path[0].ci_hi - path[0].mean_price == doctest::Approx(1.96 * 5.0));
}

TEST_CASE("episode diffs reject ambiguous sim indices") {
    Rng rng(8);
    std::vector<SimulationPanel> panels{synthetic_panel("A", 0, random_prices(rng), 2, rng),
                                        synthetic_panel("B", 0, random_prices(rng), 2, rng)};
    std::vector<AuditScoreRecord> scores{{0, "a0", 5, TextSource::Plans, "loss_aversion", "l", 0.5, 0.4}};
    CHECK_THROWS_AS(bubble_episode_diffs(panels, scores), ConfigError);
}

TEST_CASE("episode diffs recover a planted bubble-round shift") {
    Rng rng(9);
    std::vector<SimulationPanel> panels;
    std::vector<AuditScoreRecord> scores;
    for (int s = 0; s < 6; ++s) {
        auto p = synthetic_panel("A", s, random_prices(rng), 3, rng);
        for (const auto& r : p.rounds)
            for (int a = 0; a < 3; ++a) {
                double v = 0.4 + 0.02 * rng.normal() + (r.price > 14 ? 0.1 : 0.0);
                scores.push_back({s, "a" + std::to_string(a), r.period, TextSource::Plans, "herding_contagion", "x",
                                  0.8, v});
            }
        panels.push_back(p);
    }
    auto rows = bubble_episode_diffs(panels, scores);
    const EpisodeDiffRow* row = nullptr;
    for (const auto& r : rows)
        if (r.mechanism == "herding_contagion" && r.source == TextSource::Plans) row = &r;
    REQUIRE(row);
    REQUIRE(row->diff);
    CHECK(row->diff->difference == doctest::Approx(0.1).epsilon(0.15));
}

TEST_CASE("analysis ids and table output") {
    CHECK(analysis_ids().size() == 9);
    CHECK(is_analysis_id("bid_offer"));
    CHECK_FALSE(is_analysis_id("table_9"));

    Rng rng(10);
    std::vector<SimulationPanel> panels;
    for (int s = 0; s < 4; ++s) panels.push_back(synthetic_panel("A", s, random_prices(rng), 2, rng));
    auto table = bid_offer_analysis(panels);
    auto dir = fs::temp_directory_path() / "bubblelab_analytics_csv";
    fs::create_directories(dir);
    write_table_csv(dir / "t.csv", table);
    std::ifstream in(dir / "t.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("analysis,column,term,estimate", 0) == 0);
    fs::remove_all(dir);
}
