#include "doctest.h"

#include <atomic>
#include <thread>

#include "bubblelab/errors.hpp"
#include "bubblelab/llm.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace bubblelab;
using nlohmann::json;

namespace {

json valid_reply() {
    return {{"cognitive_process", {{"market_analysis", "Price is at value."}, {"strategy_formulation", "Hold."}}},
            {"price_forecasts", {{"period_t", 14}, {"period_t_plus_2", 15}, {"period_t_plus_5", 16}, {"period_t_plus_10", 14}}},
            {"orders", json::array({{{"type", "BUY"}, {"price", 13}, {"quantity", 2}},
                                    {{"type", "SELL"}, {"price", 16}, {"quantity", 1}}})},
            {"memory_update", {{"update_plans_txt", "Buy below 14."}, {"update_insights_txt", "Value is 14."}}}};
}

ValidatedReply check(const std::string& text, int price = 14) {
    return validate_reply({text, "m", 0.0, 1}, price, {}, "agent_7");
}

}  // namespace

TEST_CASE("system prompt carries the market parameters") {
    MarketParams p;
    auto text = render_system_prompt(p, nullptr);
    CHECK(text.find("exactly 20 trading periods") != std::string::npos);
    CHECK(text.find("r = 5%") != std::string::npos);
    CHECK(text.find("D in {0.4, 1.0} with equal probability") != std::string::npos);
    CHECK(text.find("E[D] = 0.7") != std::string::npos);
    CHECK(text.find("0.7/0.05 = 14.0") != std::string::npos);
    CHECK(text.find("fundamental value of 14.0 units per share") != std::string::npos);

    ShockSpec shock{"herding_contagion", ShockDirection::Amplify, "Do what everyone else does."};
    auto shocked = render_system_prompt(p, &shock);
    CHECK(shocked.size() > text.size());
    CHECK(shocked.substr(shocked.size() - shock.clause.size()) == shock.clause);
}

TEST_CASE("state prompt lists the last three periods, newest first") {
    AgentObservation obs;
    obs.period = 6;
    obs.portfolio = initial_portfolio(MarketParams{});
    for (int i = 1; i <= 5; ++i) obs.price_history.push_back({i, 10 + i, i, Money::parse("0.4")});
    obs.recent_trades.push_back({5, 2, 0, 15});
    obs.current_price = 15;
    obs.notice = kForfeitMessage;
    auto text = render_state_prompt(obs, MarketParams{});
    CHECK(text.rfind(kForfeitMessage, 0) == 0);
    CHECK(text.find("CURRENT PERIOD: 6 of 20") != std::string::npos);
    auto p5 = text.find("Period 5: Clearing Price = 15");
    auto p3 = text.find("Period 3: Clearing Price = 13");
    CHECK(p5 != std::string::npos);
    CHECK(p3 != std::string::npos);
    CHECK(p5 < p3);
    CHECK(text.find("Period 2: Clearing Price") == std::string::npos);
    CHECK(text.find("Bought 2 shares at price 15; Sold 0 shares") != std::string::npos);
    CHECK(text.find("Your PLANS.txt:\n(empty)") != std::string::npos);
}

TEST_CASE("prompt hash is stable and content-sensitive") {
    AgentObservation obs;
    obs.portfolio = initial_portfolio(MarketParams{});
    auto a = build_prompts(obs, MarketParams{}, nullptr);
    auto b = build_prompts(obs, MarketParams{}, nullptr);
    CHECK(prompt_hash(a) == prompt_hash(b));
    auto r = build_prompts(obs, MarketParams{}, nullptr, true);
    REQUIRE(r.reflection_prompt);
    CHECK(*r.reflection_prompt == reflection_prompt_text());
    CHECK(prompt_hash(a) != prompt_hash(r));
    obs.current_price = 15;
    CHECK(prompt_hash(a) != prompt_hash(build_prompts(obs, MarketParams{}, nullptr)));
}

TEST_CASE("validate_reply accepts a well-formed reply") {
    auto result = check(valid_reply().dump());
    REQUIRE(std::holds_alternative<AgentDecision>(result));
    const auto& d = std::get<AgentDecision>(result);
    CHECK(d.forecasts == std::map<int, int>{{0, 14}, {2, 15}, {5, 16}, {10, 14}});
    REQUIRE(d.orders.size() == 2);
    CHECK(d.orders[0] == LimitOrder{"agent_7", Side::Buy, 13, 2, 0});
    CHECK(d.orders[1] == LimitOrder{"agent_7", Side::Sell, 16, 1, 1});
    CHECK(d.memory_update.plans == "Buy below 14.");
    CHECK(d.reasoning.market_analysis == "Price is at value.");

    // Prose or code fences around the object are tolerated.
    auto fenced = check("Here you go:\n```json\n" + valid_reply().dump(2) + "\n```");
    CHECK(std::holds_alternative<AgentDecision>(fenced));

    auto empty_orders = valid_reply();
    empty_orders["orders"] = json::array();
    CHECK(std::holds_alternative<AgentDecision>(check(empty_orders.dump())));
}

TEST_CASE("validate_reply forfeits on every malformation") {
    auto expect_forfeit = [](const std::string& text, ForfeitReason reason) {
        auto r = check(text);
        REQUIRE(std::holds_alternative<TurnForfeited>(r));
        const auto& f = std::get<TurnForfeited>(r);
        CHECK(f.reason == reason);
        CHECK(f.message == kForfeitMessage);
    };
    expect_forfeit("I think I'll buy", ForfeitReason::Parse);
    expect_forfeit("{\"orders\": [", ForfeitReason::Parse);

    auto j = valid_reply();
    j["orders"][0]["price"] = "13";
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    j = valid_reply();
    j["orders"][0]["price"] = 13.5;
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    j = valid_reply();
    j["orders"][0]["type"] = "buy";
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    j = valid_reply();
    j["orders"][1]["quantity"] = 0;
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    j = valid_reply();
    j["price_forecasts"].erase("period_t_plus_5");
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    j = valid_reply();
    j["price_forecasts"]["period_t"] = 29;  // 2 x 14 = 28
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    j = valid_reply();
    j["price_forecasts"]["period_t_plus_10"] = -1;
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    j = valid_reply();
    j.erase("memory_update");
    expect_forfeit(j.dump(), ForfeitReason::Validation);

    // Far horizons allow four times the price.
    j = valid_reply();
    j["price_forecasts"]["period_t_plus_10"] = 56;
    CHECK(std::holds_alternative<AgentDecision>(check(j.dump())));
}

TEST_CASE("forecast scoring") {
    MarketParams params;
    std::map<int, int> prices{{1, 14}, {2, 15}, {3, 20}, {20, 14}};
    std::vector<SubmittedForecast> f{
        {"a", 1, 0, 14},   // exact
        {"a", 1, 2, 17},   // |20 - 17| = 3 > 2.5
        {"a", 1, 2, 18},   // |20 - 18| = 2
        {"b", 18, 2, 16},  // target 20, |14 - 16| = 2
        {"b", 15, 10, 14}, // target 25 beyond the market
    };
    PortfolioMap pm{{"a", initial_portfolio(params)}, {"b", initial_portfolio(params)}};
    auto out = score_forecasts(f, prices, params, &pm);
    REQUIRE(out.size() == 5);
    CHECK(out[0].rewarded);
    CHECK_FALSE(out[1].rewarded);
    CHECK(out[1].realized == 20);
    CHECK(out[2].rewarded);
    CHECK(out[3].rewarded);
    CHECK_FALSE(out[4].realized.has_value());
    CHECK_FALSE(out[4].rewarded);
    CHECK(pm["a"].forecast_bonus_accrued == Money::from_int(10));
    CHECK(pm["b"].forecast_bonus_accrued == Money::from_int(5));

    std::vector<SubmittedForecast> stranger{{"zz", 1, 0, 14}};
    CHECK_THROWS_AS(score_forecasts(stranger, prices, params, &pm), InvariantViolation);
}

TEST_CASE("mock transport backends") {
    CHECK_THROWS_AS(MockTransport("nope"), std::invalid_argument);
    ChatRequest fresh{"m", {{"system", "s"}, {"user", "u"}}, 1.0};

    MockTransport ok("fundamentalist-json");
    CHECK(std::holds_alternative<AgentDecision>(check(ok.complete(fresh).text)));

    MockTransport down("unreachable");
    CHECK_THROWS_AS(down.complete(fresh), TransportError);

    MockTransport oob("out-of-bounds");
    auto r = check(oob.complete(fresh).text);
    REQUIRE(std::holds_alternative<TurnForfeited>(r));
    CHECK(std::get<TurnForfeited>(r).reason == ForfeitReason::Validation);
}

TEST_CASE("llm agent repair and forfeit paths") {
    MarketParams params;
    AgentObservation obs;
    obs.agent_id = "L1";
    obs.portfolio = initial_portfolio(params);
    TurnContext ctx;
    ctx.params = &params;

    SUBCASE("one repair fixes a malformed reply") {
        auto t = std::make_shared<MockTransport>("malformed-once");
        LlmAgent agent("L1", "mock", t, "m", 1.0, 1);
        auto res = agent.act(obs, ctx);
        REQUIRE(res.decision);
        CHECK(t->calls() == 2);
        CHECK(res.decision->orders.front().agent_id == "L1");
    }
    SUBCASE("no repair budget means a forfeit") {
        auto t = std::make_shared<MockTransport>("malformed-once");
        LlmAgent agent("L1", "mock", t, "m", 1.0, 0);
        auto res = agent.act(obs, ctx);
        REQUIRE(res.forfeit);
        CHECK(res.forfeit->reason == ForfeitReason::Parse);
        CHECK(t->calls() == 1);
    }
    SUBCASE("persistent garbage") {
        auto t = std::make_shared<MockTransport>("malformed-always");
        LlmAgent agent("L1", "mock", t, "m", 1.0, 2);
        auto res = agent.act(obs, ctx);
        REQUIRE(res.forfeit);
        CHECK(res.forfeit->attempts == 3);
        CHECK_FALSE(agent.reflect(obs, ctx).has_value());
    }
    SUBCASE("transport failure") {
        auto t = std::make_shared<MockTransport>("unreachable");
        LlmAgent agent("L1", "mock", t, "m", 1.0, 1);
        auto res = agent.act(obs, ctx);
        REQUIRE(res.forfeit);
        CHECK(res.forfeit->reason == ForfeitReason::Transport);
    }
}

TEST_CASE("endpoint splitting") {
    CHECK(split_endpoint("https://api.example.com/v1/chat/completions") ==
          std::pair<std::string, std::string>{"https://api.example.com", "/v1/chat/completions"});
    CHECK(split_endpoint("http://127.0.0.1:8080") == std::pair<std::string, std::string>{"http://127.0.0.1:8080", "/"});
    CHECK_THROWS(split_endpoint("localhost/v1"));
}

TEST_CASE("http transport retries server errors against a local endpoint") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth, seen_body;
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        if (n <= 2) {
            res.status = n == 1 ? 503 : 429;
            return;
        }
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        json body = {{"model", "served-model"}, {"choices", {{{"message", {{"role", "assistant"}, {"content", "hello"}}}}}}};
        res.set_content(body.dump(), "application/json");
    });
    server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    server.Post("/always503", [&](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RetryPolicy fast;
    fast.initial_backoff = std::chrono::milliseconds(1);
    fast.max_attempts = 4;
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    HttpTransport t(base + "/v1/chat", "secret", fast);
    auto resp = t.complete({"gpt-test", {{"user", "hi"}}, 0.5});
    CHECK(resp.text == "hello");
    CHECK(resp.model_id == "served-model");
    CHECK(resp.attempts == 3);
    CHECK(seen_auth == "Bearer secret");
    auto sent = json::parse(seen_body);
    CHECK(sent["model"] == "gpt-test");
    CHECK(sent["messages"][0]["content"] == "hi");
    CHECK(sent["temperature"] == 0.5);

    // Client errors are not retried.
    HttpTransport bad(base + "/bad", "", fast);
    try {
        bad.complete({"m", {{"user", "x"}}, 1.0});
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts() == 1);
    }

    // Exhausting retries.
    fast.max_attempts = 2;
    HttpTransport always(base + "/always503", "", fast);
    try {
        always.complete({"m", {{"user", "x"}}, 1.0});
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts() == 2);
    }

    server.stop();
    worker.join();

    // Nothing listening: connection failures are retried, then surface.
    HttpTransport dead(base + "/v1/chat", "", fast);
    CHECK_THROWS_AS(dead.complete({"m", {{"user", "x"}}, 1.0}), TransportError);
}
