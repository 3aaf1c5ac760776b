// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "bubblelab/analytics.hpp"
#include "bubblelab/audit.hpp"
#include "bubblelab/config.hpp"
#include "bubblelab/econometrics.hpp"
#include "bubblelab/errors.hpp"
#include "bubblelab/llm.hpp"
#include "bubblelab/market.hpp"
#include "bubblelab/rng.hpp"
#include "bubblelab/session.hpp"
#include "bubblelab/study.hpp"
#include "json.hpp"
#include "oracles/oracles.hpp"

using namespace bubblelab;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kClearingBudgetSeconds = 2.0;
constexpr double kBubbleBudgetSeconds = 30.0;
constexpr int kBubbleMinPeak = 16;
constexpr double kMinT = 2.0;
constexpr double kDispositionTarget = 0.3;
constexpr double kDispositionTolerance = 0.05;
constexpr double kWeightRelTolerance = 0.20;
constexpr double kOlsTolerance = 1e-8;
constexpr double kInvarianceTolerance = 1e-10;
constexpr double kShockShift = 0.2;
constexpr double kShockShiftTolerance = 0.05;

const fs::path kConfigs = fs::path(BUBBLELAB_SOURCE_DIR) / "configs";

struct Verdict {
    bool pass = false;
    std::string detail;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string sci(double v) {
    std::ostringstream os;
    os.setf(std::ios::scientific);
    os.precision(2);
    os << v;
    return os.str();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(precision);
    os << v;
    return os.str();
}

LimitOrder order(const std::string& agent, Side side, int price, int qty, int seq = 0) {
    return {agent, side, price, qty, seq};
}

OrderBook book_of(std::vector<std::pair<int, int>> bids, std::vector<std::pair<int, int>> asks) {
    OrderBook b;
    int seq = 0;
    for (auto [p, q] : bids) {
        b.bids.push_back(order("b" + std::to_string(seq), Side::Buy, p, q, seq));
        ++seq;
    }
    for (auto [p, q] : asks) {
        b.asks.push_back(order("a" + std::to_string(seq), Side::Sell, p, q, seq));
        ++seq;
    }
    return b;
}

const FitResult* column_fit(const AnalysisTable& t, std::size_t i, std::string& why) {
    if (i >= t.columns.size()) {
        why = "missing column";
        return nullptr;
    }
    if (!t.columns[i].fit) {
        why = t.columns[i].error;
        return nullptr;
    }
    return &*t.columns[i].fit;
}

// --- criteria -------------------------------------------------------------------------

Verdict clearing_oracle() {
    Rng rng(20240601);
    int mismatches = 0;
    auto start = clock_type::now();
    for (int i = 0; i < 1000; ++i) {
        OrderBook b;
        int n = static_cast<int>(rng.uniform_int(0, 12));
        for (int j = 0; j < n; ++j) {
            auto o = order("x" + std::to_string(rng.uniform_int(0, 5)), rng.bernoulli(0.5) ? Side::Buy : Side::Sell,
                           static_cast<int>(rng.uniform_int(1, 40)), static_cast<int>(rng.uniform_int(1, 5)), j);
            (o.side == Side::Buy ? b.bids : b.asks).push_back(o);
        }
        auto got = clear(b);
        auto want = oracle::brute_force_clear(b);
        bool ok = got.volume == want.volume;
        if (want.volume > 0) ok = ok && got.crossed && got.price == want.price;
        mismatches += !ok;
    }
    double secs = seconds_since(start);
    return {mismatches == 0 && secs < kClearingBudgetSeconds,
            "1000 books, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 3) + " s"};
}

Verdict worked_example() {
    auto main = clear(book_of({{16, 2}, {15, 1}}, {{14, 1}, {15, 2}}));
    auto idle = clear(book_of({{12, 1}}, {{16, 1}}));
    bool ok = main.crossed && main.price == 15 && main.volume == 3 && !idle.crossed && idle.price == 14 &&
              idle.volume == 0;
    return {ok, "crossed book -> " + std::to_string(main.price.value_or(-1)) + " x " + std::to_string(main.volume) +
                    ", no-cross book -> " + std::to_string(idle.price.value_or(-1))};
}

Verdict fundamental_value_anchor() {
    Money fv = fundamental_value(MarketParams{});
    return {fv == Money::from_int(14), "fundamental value " + fv.to_string()};
}

// Independent wealth ledger rebuilt from the per-agent rows.
std::string ledger_mismatch(const SimulationPanel& p) {
    std::map<int, std::int64_t> net_shares;
    std::map<int, Money> net_cash;
    Money interest, dividends;
    std::map<std::string, std::int64_t> last_shares;
    for (const auto& a : p.agent_rounds) {
        if (a.practice) continue;
        net_shares[a.period] += a.bought_shares - a.sold_shares;
        net_cash[a.period] += a.sold_cash - a.bought_cash;
        interest += a.interest;
        dividends += a.dividend;
        last_shares[a.agent] = a.shares;
    }
    for (const auto& [t, s] : net_shares)
        if (s != 0) return "period " + std::to_string(t) + " shares net " + std::to_string(s);
    for (const auto& [t, c] : net_cash)
        if (c != Money()) return "period " + std::to_string(t) + " cash net " + c.to_string();
    std::int64_t shares = 0;
    for (const auto& [_, s] : last_shares) shares += s;
    int rewarded = 0;
    for (const auto& f : p.forecasts) rewarded += !f.practice && f.rewarded;
    Money buyout = p.meta.params.buyout_value * shares;
    Money bonus = p.meta.params.forecast_reward * rewarded;
    Money initial = p.meta.params.initial_cash * static_cast<std::int64_t>(p.meta.agents.size());
    Money expected = initial + interest + dividends + bonus + buyout;
    if (expected != p.meta.final_wealth_total)
        return "final wealth " + p.meta.final_wealth_total.to_string() + " vs ledger " + expected.to_string();
    return {};
}

Verdict conservation() {
    int checked = 0;
    std::string problem;
    for (const char* name : {"scripted_bubble.yaml", "scripted_disposition.yaml"}) {
        auto cfg = load_session_config(kConfigs / name);
        cfg.n_simulations = 5;
        for (const auto& p : run_session(cfg, {.write = false})) {
            try {
                check_conservation(p);
            } catch (const InvariantViolation& e) {
                problem = e.what();
            }
            if (auto m = ledger_mismatch(p); !m.empty()) problem = m;
            ++checked;
        }
    }
    return {problem.empty(), std::to_string(checked) + " sessions" + (problem.empty() ? ", exact" : ": " + problem)};
}

Verdict fundamentalist_market() {
    auto cfg = load_session_config(kConfigs / "scripted_fundamental.yaml");
    int off = 0, rounds = 0;
    double mse = 0, pv = 0;
    for (std::uint64_t seed : {1ULL, 7ULL, 99ULL}) {
        cfg.seed = seed;
        auto panels = run_session(cfg, {.write = false});
        for (const auto& p : panels)
            for (const auto& r : p.rounds)
                if (!r.practice) {
                    ++rounds;
                    off += r.price != 14;
                }
        auto m = bubble_metrics(panels);
        mse = std::max(mse, m.at(0).mse_fv);
        pv = std::max(pv, m.at(0).pv_variance);
    }
    return {off == 0 && mse == 0.0 && pv == 0.0,
            std::to_string(rounds) + " rounds, " + std::to_string(off) + " off 14, MSE " + sci(mse) + ", PV var " + sci(pv)};
}

Verdict bubble_emergence() {
    auto cfg = load_session_config(kConfigs / "scripted_bubble.yaml");
    auto start = clock_type::now();
    auto panels = run_session(cfg, {.write = false});
    double secs = seconds_since(start);
    int max_price = 0;
    for (const auto& p : panels)
        for (const auto& r : p.rounds)
            if (!r.practice) max_price = std::max(max_price, r.price);
    auto path = mean_price_path(panels);
    auto peak = std::max_element(path.begin(), path.end(),
                                 [](const auto& a, const auto& b) { return a.mean_price < b.mean_price; });
    bool interior = peak->period >= 2 && peak->period <= 19;
    bool hump = hump_shaped(path, 14.0);
    auto table = bid_offer_analysis(panels);
    std::string why;
    const FitResult* f = column_fit(table, table.columns.size() - 1, why);
    double beta = f ? f->coef("bid_offer_gap").estimate : NAN;
    double t = f ? f->coef("bid_offer_gap").t_stat : NAN;
    bool ok = panels.size() >= 20 && max_price >= kBubbleMinPeak && hump && interior && f && beta > 0 && t > kMinT &&
              secs < kBubbleBudgetSeconds;
    return {ok, std::to_string(panels.size()) + " sims, max price " + std::to_string(max_price) + ", peak " +
                    fmt(peak->mean_price, 2) + " in round " + std::to_string(peak->period) + ", last " +
                    fmt(path.back().mean_price, 2) + ", bid-offer beta " + fmt(beta) + " (t " + fmt(t, 2) + ")" +
                    (f ? "" : " " + why) + ", " + fmt(secs, 1) + " s"};
}

Verdict disposition_recovery() {
    auto cfg = load_session_config(kConfigs / "scripted_disposition.yaml");
    auto panels = run_session(cfg, {.write = false});
    auto table = disposition_analysis(panels);
    std::string why;
    const FitResult* f = column_fit(table, 0, why);
    if (!f) return {false, why};
    const auto& g = f->coef("gain_dummy");
    return {panels.size() >= 20 && std::abs(g.estimate - kDispositionTarget) <= kDispositionTolerance,
            "gain coefficient " + fmt(g.estimate) + " (t " + fmt(g.t_stat, 1) + "), target 0.3 +/- 0.05"};
}

Verdict extrapolation_recovery() {
    auto cfg = load_session_config(kConfigs / "scripted_extrapolation.yaml");
    auto panels = run_session(cfg, {.write = false});
    AnalysisOptions opt;
    opt.group = "extrapolator";
    auto table = expectation_formation_analysis(panels, opt);
    std::string why;
    const FitResult* f = column_fit(table, 0, why);
    if (!f) return {false, why};
    const double planted[] = {0.3, 0.2, 0.1, 0.05};
    bool ok = true;
    std::string detail = "h=0:";
    double est[4];
    for (int k = 0; k < 4; ++k) {
        est[k] = f->coef("ret_lag" + std::to_string(k + 1)).estimate;
        ok = ok && std::abs(est[k] / planted[k] - 1.0) <= kWeightRelTolerance;
        detail += " " + fmt(est[k]) + "/" + fmt(planted[k], 2);
    }
    ok = ok && est[0] > est[2];
    return {ok, detail + ", +/-20% relative, lag1 > lag3"};
}

Verdict expectation_trading_recovery() {
    auto coupled = load_session_config(kConfigs / "scripted_bubble.yaml");
    auto noise = parse_session_config(R"(
market: {type: scripted, label: noise}
seed: 41
simulations: 20
agents: [{kind: noise, count: 20, noise_scale: 2}]
)");
    std::string why;
    auto t_coupled = expectation_trading_analysis(run_session(coupled, {.write = false}));
    auto t_noise = expectation_trading_analysis(run_session(noise, {.write = false}));
    const FitResult* a = column_fit(t_coupled, 2, why);
    const FitResult* b = column_fit(t_noise, 2, why);
    if (!a || !b) return {false, why};
    const auto& ca = a->coef("er_h2");
    const auto& cb = b->coef("er_h2");
    return {ca.estimate > 0 && ca.t_stat > kMinT && std::abs(cb.t_stat) < kMinT,
            "coupled er_h2 " + fmt(ca.estimate) + " (t " + fmt(ca.t_stat, 2) + "), decoupled " + fmt(cb.estimate) +
                " (t " + fmt(cb.t_stat, 2) + ")"};
}

Verdict forecast_scoring() {
    MarketParams params;
    std::map<int, int> prices;
    for (int t = 1; t <= 20; ++t) prices[t] = 14 + t % 3;
    std::vector<SubmittedForecast> fs{
        {"a", 3, 2, prices[5] + 2},   // within tolerance
        {"a", 3, 5, prices[8] - 2},   // within tolerance
        {"a", 4, 2, prices[6] + 3},   // outside
        {"b", 10, 10, prices[20]},    // lands on the last period
        {"b", 15, 10, 20},            // beyond the horizon
        {"b", 19, 2, 14},             // beyond the horizon
    };
    PortfolioMap pf{{"a", initial_portfolio(params)}, {"b", initial_portfolio(params)}};
    auto out = score_forecasts(fs, prices, params, &pf);
    bool ok = out.size() == fs.size() && out[0].rewarded && out[1].rewarded && !out[2].rewarded && out[3].rewarded &&
              !out[4].rewarded && !out[4].realized && !out[5].rewarded && !out[5].realized &&
              pf["a"].forecast_bonus_accrued == Money::from_int(10) &&
              pf["b"].forecast_bonus_accrued == Money::from_int(5);

    // In a session, bonuses never touch cash before terminal settlement.
    auto cfg = load_session_config(kConfigs / "scripted_fundamental.yaml");
    cfg.n_simulations = 1;
    auto panel = run_session(cfg, {.write = false}).at(0);
    std::map<std::string, Money> cash;
    std::map<std::string, std::int64_t> shares;
    std::map<std::string, int> rewarded;
    for (const auto& f : panel.forecasts)
        if (!f.practice) rewarded[f.agent] += f.rewarded;
    bool cash_clean = true;
    for (const auto& a : panel.agent_rounds) {
        if (a.practice) continue;
        Money before = cash.contains(a.agent) ? cash[a.agent] : params.initial_cash;
        cash_clean = cash_clean && a.cash == before + a.sold_cash - a.bought_cash + a.interest + a.dividend;
        cash[a.agent] = a.cash;
        shares[a.agent] = a.shares;
    }
    for (const auto& term : panel.meta.terminal)
        cash_clean = cash_clean && term.bonus == params.forecast_reward * rewarded[term.agent] &&
                     term.final_wealth == cash[term.agent] + params.buyout_value * shares[term.agent] + term.bonus;
    return {ok && cash_clean, std::string("worked cases ") + (ok ? "ok" : "wrong") + ", bonus only at settlement " +
                                  (cash_clean ? "ok" : "violated")};
}

Verdict econometrics_engine() {
    Rng rng(77);
    std::vector<double> y, x1, x2;
    std::vector<std::string> g1, g2, cl;
    for (int i = 0; i < 60; ++i) {
        int a = static_cast<int>(rng.uniform_int(0, 7));
        int b = static_cast<int>(rng.uniform_int(0, 4));
        double u = rng.normal(), v = rng.normal() + 0.2 * a;
        x1.push_back(u);
        x2.push_back(v);
        y.push_back(0.8 * u - 0.4 * v + a - 0.5 * b + rng.normal());
        g1.push_back("g" + std::to_string(a));
        g2.push_back("t" + std::to_string(b));
        cl.push_back("c" + std::to_string(a));
    }
    DataTable t;
    t.add_numeric("y", y);
    t.add_numeric("x1", x1);
    t.add_numeric("x2", x2);
    t.add_category("g1", g1);
    t.add_category("g2", g2);
    t.add_category("cl", cl);
    auto got = fit({"y", {"x1", "x2"}, {"g1", "g2"}, "cl"}, t);
    auto want = oracle::dummy_variable_ols(y, {x1, x2}, {g1, g2}, cl);
    double worst = 0;
    for (std::size_t j = 0; j < 2; ++j) {
        worst = std::max(worst, std::abs(got.coefficients[j].estimate - want.beta[j]) / std::abs(want.beta[j]));
        worst = std::max(worst, std::abs(got.coefficients[j].std_error - want.se[j]) / want.se[j]);
    }

    // Adding anything constant within a fixed-effect group leaves the fit unchanged.
    std::vector<double> shifted = y;
    for (std::size_t i = 0; i < y.size(); ++i) shifted[i] += 37.0 * (g1[i].back() - '0') - 11.0 * (g2[i].back() - '0');
    t.add_numeric("y_shifted", shifted);
    auto moved = fit({"y_shifted", {"x1", "x2"}, {"g1", "g2"}, "cl"}, t);
    double drift = 0;
    for (std::size_t j = 0; j < 2; ++j)
        drift = std::max(drift, std::abs(moved.coefficients[j].estimate - got.coefficients[j].estimate));

    std::string single;
    t.add_category("one", std::vector<std::string>(y.size(), "all"));
    try {
        fit({"y", {"x1"}, {}, "one"}, t);
    } catch (const EstimationError& e) {
        single = e.what();
    }
    bool ok = worst < kOlsTolerance && drift < kInvarianceTolerance &&
              single.find("only one cluster") != std::string::npos;
    return {ok, "max rel diff vs dummy OLS " + sci(worst) + ", FE shift drift " + sci(drift) +
                    ", single cluster: " + (single.empty() ? "accepted" : "'" + single + "'")};
}

Verdict budget_enforcement() {
    auto holding = [](int cash, int shares) {
        Portfolio p;
        p.cash = Money::from_int(cash);
        p.shares = shares;
        p.wapp = Money::from_int(14);
        return p;
    };
    std::vector<LimitOrder> margin{order("A", Side::Buy, 20, 2, 0), order("A", Side::Buy, 15, 1, 1)};
    auto m = enforce_budget(margin, holding(50, 0));
    bool ex1 = m.bids.size() == 1 && m.bids[0].price == 20 && m.bids[0].quantity == 2 && m.cancellations.size() == 1 &&
               m.cancellations[0].order.price == 15 && m.cancellations[0].reason == CancelReason::Margin;
    std::vector<LimitOrder> short_sale{order("A", Side::Sell, 16, 2, 0), order("A", Side::Sell, 14, 2, 1)};
    auto s = enforce_budget(short_sale, holding(0, 3));
    bool ex2 = s.asks.size() == 2 && s.cancellations.size() == 1 && s.cancellations[0].order.price == 14 &&
               s.cancellations[0].removed_quantity == 1 && s.cancellations[0].reason == CancelReason::ShortSale;

    Rng rng(31337);
    int infeasible = 0;
    for (int i = 0; i < 10000; ++i) {
        std::vector<LimitOrder> orders;
        int n = static_cast<int>(rng.uniform_int(0, 8));
        for (int j = 0; j < n; ++j)
            orders.push_back(order("A", rng.bernoulli(0.5) ? Side::Buy : Side::Sell,
                                   static_cast<int>(rng.uniform_int(0, 60)), static_cast<int>(rng.uniform_int(0, 12)),
                                   j));
        auto pf = holding(static_cast<int>(rng.uniform_int(0, 200)), static_cast<int>(rng.uniform_int(0, 10)));
        auto r = enforce_budget(orders, pf);
        Money outlay;
        std::int64_t sells = 0;
        bool positive = true;
        for (const auto& o : r.bids) {
            outlay += Money::from_int(o.price) * o.quantity;
            positive = positive && o.price > 0 && o.quantity > 0;
        }
        for (const auto& o : r.asks) {
            sells += o.quantity;
            positive = positive && o.price > 0 && o.quantity > 0;
        }
        infeasible += !(positive && outlay <= pf.cash && sells <= pf.shares);
    }
    return {ex1 && ex2 && infeasible == 0, std::string("margin example ") + (ex1 ? "ok" : "wrong") +
                                               ", short-sale example " + (ex2 ? "ok" : "wrong") + ", " +
                                               std::to_string(infeasible) + "/10000 infeasible"};
}

Verdict audit_pipeline() {
    AuditContext ctx;
    ctx.agent_id = "agent_1";
    ctx.round = 9;
    ctx.market_type = "scripted";
    ctx.price = 17;
    ctx.recent_returns = {0.0625, 0.0};
    ctx.plan_text = "Prices keep rising, so I will hold.";
    auto prompt = build_audit_prompt(ctx);
    int listed = 0;
    for (const auto& m : mechanism_taxonomy()) listed += prompt.find(m.id) != std::string::npos;

    MockJudge judge;
    auto raw = judge.evaluate(ctx, prompt);
    bool round_trip = false;
    try {
        auto report = parse_audit_response(raw, ctx.plan_text);
        round_trip = report.assessments.size() == 20 &&
                     parse_audit_response(serialize_audit_report(report)).assessments == report.assessments;
    } catch (const AuditParseError&) {
    }

    auto valid = nlohmann::json::parse(raw);
    auto rejected_with = [&](const std::function<void(nlohmann::json&)>& mutate, const std::string& fragment) {
        auto doc = valid;
        mutate(doc);
        try {
            parse_audit_response(doc.dump());
        } catch (const AuditParseError& e) {
            for (const auto& v : e.violations())
                if (v.find(fragment) != std::string::npos) return true;
        }
        return false;
    };
    auto entry = [](nlohmann::json& doc, const std::string& id) -> nlohmann::json& {
        for (auto& a : doc["mechanism_assessments"])
            if (a["mechanism_id"] == id) return a;
        throw std::runtime_error(id);
    };
    bool missing = rejected_with(
        [](nlohmann::json& d) {
            auto& arr = d["mechanism_assessments"];
            for (auto it = arr.begin(); it != arr.end(); ++it)
                if ((*it)["mechanism_id"] == "loss_aversion") {
                    arr.erase(it);
                    break;
                }
        },
        "missing mechanism 'loss_aversion'");
    bool range = rejected_with([&](nlohmann::json& d) { entry(d, mechanism_taxonomy()[3].id)["numeric_score"] = 1.2; },
                               "outside [0, 1]");
    bool label = rejected_with([&](nlohmann::json& d) { entry(d, mechanism_taxonomy()[3].id)["label"] = "extreme"; },
                               "label 'extreme' is not allowed");
    bool ok = listed == 20 && round_trip && missing && range && label;
    return {ok, std::to_string(listed) + "/20 mechanisms in prompt, round trip " + (round_trip ? "ok" : "failed") +
                    ", fixtures rejected: missing " + (missing ? "yes" : "no") + ", range " + (range ? "yes" : "no") +
                    ", label " + (label ? "yes" : "no")};
}

Verdict shock_study() {
    auto cfg = load_session_config(kConfigs / "scripted_bubble.yaml");
    cfg.n_simulations = 4;
    MockJudge judge(kShockShift);
    ShockStudyOptions opt;
    opt.mechanism = "momentum_vs_newswatcher";
    auto result = run_shock_study(cfg, judge, opt);
    const std::string feature = opt.mechanism + "/plans";
    auto row = std::find_if(result.comparison.begin(), result.comparison.end(),
                            [&](const auto& r) { return r.feature == feature; });
    if (row == result.comparison.end() || !row->amp_vs_bench || !row->bench_vs_bench)
        return {false, "no comparison row for " + feature};
    const auto& amp = *row->amp_vs_bench;
    const auto& placebo = *row->bench_vs_bench;
    bool ok = std::abs(amp.difference - kShockShift) <= kShockShiftTolerance && amp.t_stat > kMinT &&
              std::abs(placebo.t_stat) < kMinT;
    return {ok, feature + ": amplify - benchmark " + fmt(amp.difference) + " (t " + fmt(amp.t_stat, 1) +
                    "), benchmark - benchmark " + fmt(placebo.difference) + " (t " + fmt(placebo.t_stat, 2) + ")"};
}

Verdict planted_effects() {
    Verdict parts[] = {disposition_recovery(), extrapolation_recovery(), expectation_trading_recovery()};
    const char* tags[] = {"(a) ", "; (b) ", "; (c) "};
    Verdict all{true, ""};
    for (int i = 0; i < 3; ++i) {
        all.pass = all.pass && parts[i].pass;
        all.detail += tags[i] + std::string(parts[i].pass ? "" : "FAILED ") + parts[i].detail;
    }
    return all;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism() {
    auto cfg = load_session_config(kConfigs / "scripted_bubble.yaml");
    cfg.n_simulations = 3;
    fs::path root = fs::temp_directory_path() / "bubblelab_acceptance_determinism";
    fs::remove_all(root);
    cfg.output_dir = root / "first";
    run_session(cfg);
    cfg.output_dir = root / "second";
    cfg.parallelism = 1;
    run_session(cfg);
    int compared = 0, differing = 0;
    for (int sim = 0; sim < 3; ++sim)
        for (const char* f : {"rounds.jsonl", "agent_rounds.jsonl"}) {
            auto a = slurp(root / "first" / sim_dir_name(sim) / f);
            auto b = slurp(root / "second" / sim_dir_name(sim) / f);
            ++compared;
            differing += a.empty() || a != b;
        }
    fs::remove_all(root);
    return {differing == 0, std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Verdict (*run)();
    };
    const Criterion criteria[] = {
        {"clearing matches brute force", clearing_oracle},
        {"worked clearing examples", worked_example},
        {"fundamental value is 14", fundamental_value_anchor},
        {"cash and share conservation", conservation},
        {"fundamentalist market pins 14", fundamentalist_market},
        {"bubble emergence", bubble_emergence},
        {"planted-effect recovery", planted_effects},
        {"forecast scoring", forecast_scoring},
        {"econometrics engine", econometrics_engine},
        {"budget enforcement", budget_enforcement},
        {"audit pipeline", audit_pipeline},
        {"shock study", shock_study},
        {"determinism", determinism},
    };
    int failed = 0;
    int index = 0;
    for (const auto& c : criteria) {
        ++index;
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (index < 10 ? " " : "") << index << ". " << c.name
                  << ": " << v.detail << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed;
}
