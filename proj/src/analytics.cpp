#include "bubblelab/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "bubblelab/errors.hpp"

namespace bubblelab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string shock_tag(const SessionMeta& meta) {
    if (!meta.shock) return "none";
    return meta.shock->mechanism_id + ":" + to_string(meta.shock->direction);
}

double fv_of(const SessionMeta& meta) { return fundamental_value(meta.params).to_double(); }

// Main-period prices of one simulation.
std::map<int, int> main_prices(const SimulationPanel& panel) {
    std::map<int, int> prices;
    for (const auto& r : panel.rounds)
        if (!r.practice) prices[r.period] = r.price;
    return prices;
}

using ForecastKey = std::tuple<std::string, int, int>;  // agent, period, horizon

std::map<ForecastKey, const ForecastRecord*> forecast_index(const SimulationPanel& panel) {
    std::map<ForecastKey, const ForecastRecord*> index;
    for (const auto& f : panel.forecasts)
        if (!f.practice) index[{f.agent, f.period, f.horizon}] = &f;
    return index;
}

// Lags k = 1..4: return from P_{d-1-k} to P_{d-k}. Missing prices give NaN.
double lagged_return(const std::map<int, int>& prices, int period, int k, ReturnConvention conv) {
    auto from = prices.find(period - 1 - k);
    auto to = prices.find(period - k);
    if (from == prices.end() || to == prices.end()) return kNaN;
    return period_return(from->second, to->second, conv);
}

std::string lag_name(int k) { return "ret_lag" + std::to_string(k); }
std::string er_name(int h) { return "er_h" + std::to_string(h); }

AnalysisColumn run_column(const std::string& label, const Design& design, const DataTable& table) {
    AnalysisColumn col;
    col.label = label;
    try {
        col.fit = fit(design, table);
    } catch (const EstimationError& e) {
        col.error = e.what();
    }
    return col;
}

// Accumulates columns row by row and hands out a DataTable.
struct TableBuilder {
    std::map<std::string, std::vector<double>> numeric;
    std::map<std::string, std::vector<std::string>> category;

    void num(const std::string& name, double v) { numeric[name].push_back(v); }
    void cat(const std::string& name, std::string v) { category[name].push_back(std::move(v)); }

    DataTable build() const {
        DataTable t;
        for (const auto& [name, values] : numeric) t.add_numeric(name, values);
        for (const auto& [name, values] : category) t.add_category(name, values);
        return t;
    }
};

bool group_selected(const AnalysisOptions& options, const std::string& group) {
    return options.group.empty() || options.group == group;
}

const std::vector<std::string> kInvestorOnly{"investor"};
const std::vector<std::string> kInvestorRoundSim{"investor", "round", "sim"};

std::string fe_label(const std::vector<std::string>& fe) {
    if (fe.empty()) return "none";
    std::string out;
    for (const auto& f : fe) out += (out.empty() ? "" : "+") + f;
    return out;
}

std::string fmt(double v, int precision = 4) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os << std::setprecision(precision) << std::fixed << v;
    return os.str();
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

const std::vector<std::string>& analysis_ids() {
    static const std::vector<std::string> ids{
        "disposition",         "expectation_formation", "expectation_trading",        "bid_offer",
        "disagreement_volume", "bubble_metrics",        "bubble_episode_diffs",       "stated_action_expectations",
        "stated_action_trading"};
    return ids;
}

bool is_analysis_id(const std::string& id) {
    const auto& ids = analysis_ids();
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::string sim_key(const SessionMeta& meta) {
    return meta.market_label + "|" + shock_tag(meta) + "|" + std::to_string(meta.sim);
}

std::string investor_key(const SessionMeta& meta, const std::string& agent) { return sim_key(meta) + "|" + agent; }

std::optional<double> cross_sectional_sd(std::span<const double> values) {
    if (values.size() < 2) return std::nullopt;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / values.size());
}

std::vector<MarketRoundAggregate> market_aggregates(std::span<const SimulationPanel> panels, BidOfferUnit unit) {
    std::vector<MarketRoundAggregate> out;
    for (const auto& panel : panels) {
        const double fv = fv_of(panel.meta);
        const std::string key = sim_key(panel.meta);

        // Per-agent mean forecast by period (agents with every horizon only).
        std::map<int, std::map<std::string, std::pair<double, int>>> sums;
        for (const auto& f : panel.forecasts) {
            if (f.practice) continue;
            auto& s = sums[f.period][f.agent];
            s.first += f.forecast;
            s.second += 1;
        }

        std::vector<const RoundRecord*> rounds;
        for (const auto& r : panel.rounds)
            if (!r.practice) rounds.push_back(&r);
        std::sort(rounds.begin(), rounds.end(), [](auto* a, auto* b) { return a->period < b->period; });

        std::optional<int> prior;
        for (const RoundRecord* r : rounds) {
            MarketRoundAggregate a;
            a.sim_key = key;
            a.market = panel.meta.market_label;
            a.sim = r->sim;
            a.period = r->period;
            a.price = r->price;
            a.prior_price = prior;
            a.volume = r->volume;
            a.dollar_volume = static_cast<double>(r->volume) * r->price;
            a.bid_total = unit == BidOfferUnit::Shares ? r->bid_shares : r->bid_orders;
            a.offer_total = unit == BidOfferUnit::Shares ? r->ask_shares : r->ask_orders;
            a.bubble = r->price > fv;
            std::vector<double> means;
            if (auto it = sums.find(r->period); it != sums.end())
                for (const auto& [agent, s] : it->second)
                    if (s.second == static_cast<int>(kForecastHorizons.size())) means.push_back(s.first / s.second);
            a.disagreement = cross_sectional_sd(means);
            out.push_back(a);
            prior = r->price;
        }
    }
    return out;
}

// --- agent-level tables ------------------------------------------------------------------

AnalysisTable disposition_analysis(std::span<const SimulationPanel> panels, const AnalysisOptions& options) {
    TableBuilder tb;
    for (const auto& panel : panels) {
        auto forecasts = forecast_index(panel);
        for (const auto& ar : panel.agent_rounds) {
            if (ar.practice || !ar.sell_dummy || !group_selected(options, ar.group)) continue;
            double avg = kNaN;
            double sum = 0.0;
            int found = 0;
            int base = 0;
            for (int h : kForecastHorizons) {
                auto it = forecasts.find({ar.agent, ar.period, h});
                if (it == forecasts.end()) continue;
                sum += it->second->forecast;
                base = it->second->base_price;
                ++found;
            }
            if (found == static_cast<int>(kForecastHorizons.size())) {
                double mean = sum / found;
                avg = options.average_expectation_level ? mean : period_return(base, mean, options.convention);
            }
            tb.num("sell_dummy", *ar.sell_dummy);
            tb.num("gain_dummy", ar.gain_dummy);
            tb.num("avg_expectation", avg);
            tb.cat("investor", investor_key(panel.meta, ar.agent));
            tb.cat("round", std::to_string(ar.period));
            tb.cat("sim", sim_key(panel.meta));
        }
    }
    AnalysisTable table;
    table.id = "disposition";
    table.title = "Sell dummy on gain dummy and average expectation";
    table.response = "sell_dummy";
    table.regressors = {"gain_dummy", "avg_expectation"};
    DataTable data = tb.build();
    if (data.rows() == 0) throw EstimationError("disposition: no eligible agent-rounds");
    int n = 0;
    for (bool with_expectation : {false, true}) {
        for (const auto* fe : {&kInvestorOnly, &kInvestorRoundSim}) {
            Design d;
            d.response = "sell_dummy";
            d.regressors = {"gain_dummy"};
            if (with_expectation) d.regressors.push_back("avg_expectation");
            d.fixed_effects = *fe;
            d.cluster = "investor";
            table.columns.push_back(run_column("(" + std::to_string(++n) + ")", d, data));
        }
    }
    return table;
}

AnalysisTable expectation_formation_analysis(std::span<const SimulationPanel> panels,
                                             const AnalysisOptions& options) {
    AnalysisTable table;
    table.id = "expectation_formation";
    table.title = options.expectation_level ? "Forecast level on lagged returns"
                                            : "Implied expected return on lagged returns";
    table.response = options.expectation_level ? "forecast" : "expected_return";
    for (int k = 1; k <= 4; ++k) table.regressors.push_back(lag_name(k));

    int n = 0;
    for (int h : options.horizons) {
        TableBuilder tb;
        for (const auto& panel : panels) {
            auto prices = main_prices(panel);
            std::map<std::string, std::string> groups;
            for (const auto& a : panel.meta.agents) groups[a.id] = a.group;
            for (const auto& f : panel.forecasts) {
                if (f.practice || f.horizon != h || f.period < 6) continue;
                if (!group_selected(options, groups[f.agent])) continue;
                tb.num(table.response, options.expectation_level
                                           ? static_cast<double>(f.forecast)
                                           : period_return(f.base_price, f.forecast, options.convention));
                for (int k = 1; k <= 4; ++k) tb.num(lag_name(k), lagged_return(prices, f.period, k, options.convention));
                tb.cat("investor", investor_key(panel.meta, f.agent));
                tb.cat("round", std::to_string(f.period));
                tb.cat("sim", sim_key(panel.meta));
            }
        }
        DataTable data = tb.build();
        for (const auto* fe : {&kInvestorOnly, &kInvestorRoundSim}) {
            std::string label = "(" + std::to_string(++n) + ") h=" + std::to_string(h);
            if (data.rows() == 0) {
                table.columns.push_back({label, std::nullopt, "no forecasts with five periods of history"});
                continue;
            }
            Design d{table.response, table.regressors, *fe, std::string("investor")};
            table.columns.push_back(run_column(label, d, data));
        }
    }
    return table;
}

AnalysisTable expectation_trading_analysis(std::span<const SimulationPanel> panels, const AnalysisOptions& options) {
    AnalysisTable table;
    table.id = "expectation_trading";
    table.title = "Buy dummy on implied expected return";
    table.response = "buy_dummy";
    for (int h : options.horizons) table.regressors.push_back(er_name(h));

    int n = 0;
    for (int h : options.horizons) {
        TableBuilder tb;
        for (const auto& panel : panels) {
            auto forecasts = forecast_index(panel);
            for (const auto& ar : panel.agent_rounds) {
                if (ar.practice || ar.forfeited || !group_selected(options, ar.group)) continue;
                auto it = forecasts.find({ar.agent, ar.period, h});
                if (it == forecasts.end()) continue;
                tb.num("buy_dummy", ar.buy_dummy);
                tb.num(er_name(h), period_return(it->second->base_price, it->second->forecast, options.convention));
                tb.cat("investor", investor_key(panel.meta, ar.agent));
                tb.cat("round", std::to_string(ar.period));
                tb.cat("sim", sim_key(panel.meta));
            }
        }
        DataTable data = tb.build();
        for (const auto* fe : {&kInvestorOnly, &kInvestorRoundSim}) {
            std::string label = "(" + std::to_string(++n) + ") h=" + std::to_string(h);
            if (data.rows() == 0) {
                table.columns.push_back({label, std::nullopt, "no forecasts"});
                continue;
            }
            Design d{"buy_dummy", {er_name(h)}, *fe, std::string("investor")};
            table.columns.push_back(run_column(label, d, data));
        }
    }
    return table;
}

// --- market-level tables -----------------------------------------------------------------

namespace {

void add_market_categories(TableBuilder& tb, const MarketRoundAggregate& a) {
    tb.cat("round", std::to_string(a.period));
    tb.cat("sim", a.sim_key);
    tb.cat("market", a.market);
}

}  // namespace

AnalysisTable bid_offer_analysis(std::span<const SimulationPanel> panels, const AnalysisOptions& options) {
    auto aggregates = market_aggregates(panels, options.bid_offer_unit);
    TableBuilder tb;
    const MarketRoundAggregate* prev = nullptr;
    for (const auto& a : aggregates) {
        if (prev && prev->sim_key == a.sim_key && prev->period == a.period - 1) {
            tb.num("price_change", a.price - prev->price);
            tb.num("bid_offer_gap", static_cast<double>(prev->bid_total - prev->offer_total));
            add_market_categories(tb, a);
        }
        prev = &a;
    }
    AnalysisTable table;
    table.id = "bid_offer";
    table.title = std::string("Price change on lagged bid-offer gap (") +
                  (options.bid_offer_unit == BidOfferUnit::Shares ? "shares" : "orders") + ")";
    table.response = "price_change";
    table.regressors = {"bid_offer_gap"};
    DataTable data = tb.build();
    if (data.rows() == 0) throw EstimationError("bid_offer: fewer than two main periods");
    // Market before round so the nested sim/market pair is counted exactly.
    const std::vector<std::vector<std::string>> ladder{
        {}, {"round"}, {"sim"}, {"sim", "round"}, {"sim", "market"}, {"sim", "market", "round"}};
    int n = 0;
    for (const auto& fe : ladder) {
        Design d{"price_change", {"bid_offer_gap"}, fe, std::string("sim")};
        table.columns.push_back(run_column("(" + std::to_string(++n) + ")", d, data));
    }
    return table;
}

AnalysisTable disagreement_volume_analysis(std::span<const SimulationPanel> panels, const AnalysisOptions& options) {
    auto aggregates = market_aggregates(panels, options.bid_offer_unit);
    TableBuilder tb;
    for (const auto& a : aggregates) {
        tb.num("dollar_volume", a.dollar_volume);
        tb.num("disagreement", a.disagreement.value_or(kNaN));
        add_market_categories(tb, a);
    }
    AnalysisTable table;
    table.id = "disagreement_volume";
    table.title = "Dollar volume on forecast disagreement";
    table.response = "dollar_volume";
    table.regressors = {"disagreement"};
    DataTable data = tb.build();
    if (data.rows() == 0) throw EstimationError("disagreement_volume: no main periods");
    const std::vector<std::vector<std::string>> ladder{{}, {"round"}, {"sim"}, {"sim", "market", "round"}};
    int n = 0;
    for (const auto& fe : ladder) {
        Design d{"dollar_volume", {"disagreement"}, fe, std::string("sim")};
        table.columns.push_back(run_column("(" + std::to_string(++n) + ")", d, data));
    }
    return table;
}

// --- stated action -----------------------------------------------------------------------

namespace {

using ReasoningKey = std::pair<std::string, int>;

std::map<ReasoningKey, const ReasoningRecord*> reasoning_index(const SimulationPanel& panel) {
    std::map<ReasoningKey, const ReasoningRecord*> index;
    for (const auto& r : panel.reasoning)
        if (!r.practice && !r.forfeited) index[{r.agent, r.period}] = &r;
    return index;
}

const char* action_name(TextSource s) { return s == TextSource::Plans ? "action_plans" : "action_insights"; }

}  // namespace

// The text written in period d-1 is the one an agent carries into period d.
AnalysisTable stated_action_expectations(std::span<const SimulationPanel> panels, const Lexicon& lexicon,
                                         const AnalysisOptions& options) {
    AnalysisTable table;
    table.id = "stated_action_expectations";
    table.title = "Implied expected return on the preceding stated action";
    table.response = "expected_return";
    table.regressors = {action_name(TextSource::Plans), action_name(TextSource::Insights)};
    if (options.horizons.empty()) throw ConfigError("stated_action_expectations: no horizons");
    std::vector<int> horizons{options.horizons.front()};
    if (options.horizons.back() != options.horizons.front()) horizons.push_back(options.horizons.back());

    int n = 0;
    for (int h : horizons) {
        TableBuilder tb;
        for (const auto& panel : panels) {
            auto texts = reasoning_index(panel);
            std::map<std::string, std::string> groups;
            for (const auto& a : panel.meta.agents) groups[a.id] = a.group;
            for (const auto& f : panel.forecasts) {
                if (f.practice || f.horizon != h || !group_selected(options, groups[f.agent])) continue;
                auto it = texts.find({f.agent, f.period - 1});
                if (it == texts.end()) continue;
                tb.num("expected_return", period_return(f.base_price, f.forecast, options.convention));
                tb.num(action_name(TextSource::Plans), stated_action(it->second->plans, lexicon));
                tb.num(action_name(TextSource::Insights), stated_action(it->second->insights, lexicon));
                tb.cat("investor", investor_key(panel.meta, f.agent));
                tb.cat("round", std::to_string(f.period));
                tb.cat("sim", sim_key(panel.meta));
            }
        }
        DataTable data = tb.build();
        for (TextSource src : {TextSource::Plans, TextSource::Insights}) {
            for (const auto* fe : {&kInvestorOnly, &kInvestorRoundSim}) {
                std::string label = "(" + std::to_string(++n) + ") h=" + std::to_string(h);
                if (data.rows() == 0) {
                    table.columns.push_back({label, std::nullopt, "no forecasts with preceding text"});
                    continue;
                }
                Design d{"expected_return", {action_name(src)}, *fe, std::string("sim")};
                table.columns.push_back(run_column(label, d, data));
            }
        }
    }
    return table;
}

AnalysisTable stated_action_trading(std::span<const SimulationPanel> panels, const Lexicon& lexicon,
                                    const AnalysisOptions& options) {
    TableBuilder tb;
    for (const auto& panel : panels) {
        auto texts = reasoning_index(panel);
        for (const auto& ar : panel.agent_rounds) {
            if (ar.practice || ar.forfeited || !group_selected(options, ar.group)) continue;
            auto it = texts.find({ar.agent, ar.period - 1});
            if (it == texts.end()) continue;
            tb.num("buy_dummy", ar.buy_dummy);
            tb.num(action_name(TextSource::Plans), stated_action(it->second->plans, lexicon));
            tb.num(action_name(TextSource::Insights), stated_action(it->second->insights, lexicon));
            tb.cat("investor", investor_key(panel.meta, ar.agent));
            tb.cat("round", std::to_string(ar.period));
            tb.cat("sim", sim_key(panel.meta));
        }
    }
    AnalysisTable table;
    table.id = "stated_action_trading";
    table.title = "Buy dummy on the preceding stated action";
    table.response = "buy_dummy";
    table.regressors = {action_name(TextSource::Plans), action_name(TextSource::Insights)};
    DataTable data = tb.build();
    if (data.rows() == 0) throw EstimationError("stated_action_trading: no agent-rounds with preceding text");
    int n = 0;
    for (TextSource src : {TextSource::Plans, TextSource::Insights}) {
        for (const auto* fe : {&kInvestorOnly, &kInvestorRoundSim}) {
            Design d{"buy_dummy", {action_name(src)}, *fe, std::string("sim")};
            table.columns.push_back(run_column("(" + std::to_string(++n) + ")", d, data));
        }
    }
    return table;
}

// --- bubble metrics ----------------------------------------------------------------------

std::vector<BubbleMetrics> bubble_metrics(std::span<const SimulationPanel> panels) {
    struct Acc {
        double sq = 0.0;
        std::size_t rounds = 0;
        double pv = 0.0;
        std::size_t pv_rounds = 0;
        std::set<std::string> sims;
    };
    std::map<std::string, Acc> acc;
    std::vector<std::string> order;
    for (const auto& panel : panels) {
        const std::string& label = panel.meta.market_label;
        if (!acc.contains(label)) order.push_back(label);
        Acc& a = acc[label];
        a.sims.insert(sim_key(panel.meta));
        const double fv = fv_of(panel.meta);
        for (const auto& r : panel.rounds) {
            if (r.practice) continue;
            a.sq += (r.price - fv) * (r.price - fv);
            ++a.rounds;
        }
        std::map<int, std::vector<double>> values;
        for (const auto& ar : panel.agent_rounds)
            if (!ar.practice) values[ar.period].push_back(ar.portfolio_value.to_double());
        for (const auto& [period, v] : values) {
            // Shifted by the first value: identical portfolios give exactly zero.
            double s = 0.0, ss = 0.0;
            for (double x : v) {
                s += x - v[0];
                ss += (x - v[0]) * (x - v[0]);
            }
            const double n = static_cast<double>(v.size());
            a.pv += std::max(0.0, ss / n - (s / n) * (s / n));
            ++a.pv_rounds;
        }
    }
    std::vector<BubbleMetrics> out;
    for (const auto& label : order) {
        const Acc& a = acc[label];
        BubbleMetrics m;
        m.market = label;
        m.mse_fv = a.rounds ? a.sq / a.rounds : 0.0;
        m.pv_variance = a.pv_rounds ? a.pv / a.pv_rounds : 0.0;
        m.simulations = a.sims.size();
        m.rounds = a.rounds;
        out.push_back(m);
    }
    return out;
}

// --- bubble episodes ---------------------------------------------------------------------

std::vector<EpisodeDiffRow> bubble_episode_diffs(std::span<const SimulationPanel> panels,
                                                 std::span<const AuditScoreRecord> scores) {
    // Scores carry a simulation index only, so the panels must come from one session.
    std::map<int, const SimulationPanel*> by_sim;
    for (const auto& p : panels) {
        if (!by_sim.emplace(p.meta.sim, &p).second)
            throw ConfigError("bubble_episode_diffs: simulation " + std::to_string(p.meta.sim) +
                              " appears in more than one session; pass a single session directory");
    }
    std::map<int, std::map<int, bool>> bubble;  // sim -> period -> flag
    for (const auto& [sim, p] : by_sim) {
        const double fv = fv_of(p->meta);
        for (const auto& r : p->rounds)
            if (!r.practice) bubble[sim][r.period] = r.price > fv;
    }

    std::vector<EpisodeDiffRow> out;
    for (const auto& mech : mechanism_taxonomy()) {
        for (TextSource src : {TextSource::Plans, TextSource::Insights}) {
            TableBuilder tb;
            for (const auto& s : scores) {
                if (s.mechanism_id != mech.id || s.source != src) continue;
                auto sim_it = bubble.find(s.sim);
                if (sim_it == bubble.end()) continue;
                auto flag = sim_it->second.find(s.period);
                if (flag == sim_it->second.end()) continue;
                const SessionMeta& meta = by_sim.at(s.sim)->meta;
                tb.num("score", s.numeric_score);
                tb.num("bubble", flag->second ? 1.0 : 0.0);
                tb.cat("investor", investor_key(meta, s.agent));
                tb.cat("round", std::to_string(s.period));
                tb.cat("sim", sim_key(meta));
            }
            EpisodeDiffRow row;
            row.mechanism = mech.id;
            row.source = src;
            DataTable data = tb.build();
            if (data.rows() == 0) {
                row.error = "no scores matched to main periods";
            } else {
                try {
                    row.diff = group_mean_difference(data, "score", "bubble", {"investor", "round", "sim"},
                                                     std::string("investor"));
                } catch (const EstimationError& e) {
                    row.error = e.what();
                }
            }
            out.push_back(std::move(row));
        }
    }
    return out;
}

// --- price paths -------------------------------------------------------------------------

std::vector<PricePathPoint> mean_price_path(std::span<const SimulationPanel> panels) {
    std::map<int, std::vector<std::pair<double, double>>> by_period;
    for (const auto& panel : panels)
        for (const auto& r : panel.rounds)
            if (!r.practice) by_period[r.period].emplace_back(r.price, static_cast<double>(r.volume));
    std::vector<PricePathPoint> out;
    for (const auto& [period, obs] : by_period) {
        PricePathPoint p;
        p.period = period;
        p.n = obs.size();
        double sp = 0.0, sv = 0.0;
        for (auto [price, vol] : obs) {
            sp += price;
            sv += vol;
        }
        p.mean_price = sp / p.n;
        p.mean_volume = sv / p.n;
        double se = 0.0;
        if (p.n > 1) {
            double ss = 0.0;
            for (auto [price, vol] : obs) ss += (price - p.mean_price) * (price - p.mean_price);
            se = std::sqrt(ss / (p.n - 1) / p.n);
        }
        p.ci_lo = p.mean_price - 1.96 * se;
        p.ci_hi = p.mean_price + 1.96 * se;
        out.push_back(p);
    }
    return out;
}

bool hump_shaped(std::span<const PricePathPoint> path, double fundamental, double min_excess) {
    if (path.size() < 3) return false;
    auto peak = std::max_element(path.begin(), path.end(),
                                 [](const auto& a, const auto& b) { return a.mean_price < b.mean_price; });
    double excess = peak->mean_price - fundamental;
    if (excess < min_excess) return false;
    if (peak == path.begin() || peak + 1 == path.end()) return false;
    if (path.front().mean_price >= peak->mean_price) return false;
    return path.back().mean_price <= peak->mean_price - 0.5 * excess;
}

// --- output ------------------------------------------------------------------------------

void print_table(std::ostream& os, const AnalysisTable& table) {
    os << table.title << "\n";
    os << "dependent: " << table.response << "\n";
    std::size_t widest = 12;
    for (const auto& c : table.columns) {
        widest = std::max(widest, c.label.size());
        if (c.fit) widest = std::max(widest, fe_label(c.fit->fixed_effects).size());
    }
    const int w = static_cast<int>(widest) + 2;
    os << std::left << std::setw(22) << "";
    for (const auto& c : table.columns) os << std::right << std::setw(w) << c.label;
    os << "\n";
    for (const auto& reg : table.regressors) {
        bool any = false;
        for (const auto& c : table.columns)
            if (c.fit && std::any_of(c.fit->coefficients.begin(), c.fit->coefficients.end(),
                                     [&](const Coefficient& k) { return k.name == reg; }))
                any = true;
        if (!any) continue;
        std::ostringstream est, tst;
        est << std::left << std::setw(22) << reg;
        tst << std::left << std::setw(22) << "";
        for (const auto& c : table.columns) {
            std::string e, t;
            if (c.fit)
                for (const auto& k : c.fit->coefficients)
                    if (k.name == reg) {
                        e = fmt(k.estimate);
                        t = "(" + fmt(k.t_stat, 2) + ")";
                    }
            est << std::right << std::setw(w) << e;
            tst << std::right << std::setw(w) << t;
        }
        os << est.str() << "\n" << tst.str() << "\n";
    }
    auto stat_row = [&](const std::string& name, auto getter) {
        os << std::left << std::setw(22) << name;
        for (const auto& c : table.columns) os << std::right << std::setw(w) << (c.fit ? getter(*c.fit) : "");
        os << "\n";
    };
    stat_row("fixed effects", [](const FitResult& f) { return fe_label(f.fixed_effects); });
    stat_row("cluster", [](const FitResult& f) { return f.cluster; });
    stat_row("observations", [](const FitResult& f) { return std::to_string(f.n); });
    stat_row("clusters", [](const FitResult& f) { return std::to_string(f.clusters); });
    stat_row("R-squared", [](const FitResult& f) { return fmt(f.r_squared, 3); });
    stat_row("adj. R-squared", [](const FitResult& f) { return fmt(f.adj_r_squared, 3); });
    for (const auto& c : table.columns)
        if (!c.fit) os << "column " << c.label << ": " << c.error << "\n";
}

void write_table_csv(const std::filesystem::path& path, const AnalysisTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "analysis,column,term,estimate,std_error,t_stat,n,clusters,r_squared,adj_r_squared,fixed_effects,cluster,"
           "error\n";
    out << std::setprecision(10);
    for (const auto& c : table.columns) {
        if (!c.fit) {
            out << table.id << "," << csv_escape(c.label) << ",,,,,,,,,,," << csv_escape(c.error) << "\n";
            continue;
        }
        const FitResult& f = *c.fit;
        auto row = [&](const std::string& term, double est, std::optional<double> se, std::optional<double> t) {
            out << table.id << "," << csv_escape(c.label) << "," << term << "," << est << ",";
            if (se) out << *se;
            out << ",";
            if (t) out << *t;
            out << "," << f.n << "," << f.clusters << "," << f.r_squared << "," << f.adj_r_squared << ","
                << fe_label(f.fixed_effects) << "," << f.cluster << ",\n";
        };
        for (const auto& k : f.coefficients) row(k.name, k.estimate, k.std_error, k.t_stat);
        row("intercept", f.intercept, std::nullopt, std::nullopt);
    }
}

void print_bubble_metrics(std::ostream& os, std::span<const BubbleMetrics> rows) {
    os << std::left << std::setw(28) << "market" << std::right << std::setw(14) << "MSE_FV" << std::setw(14)
       << "PV_variance" << std::setw(8) << "sims" << "\n";
    for (const auto& r : rows)
        os << std::left << std::setw(28) << r.market << std::right << std::setw(14) << fmt(r.mse_fv)
           << std::setw(14) << fmt(r.pv_variance) << std::setw(8) << r.simulations << "\n";
}

void write_bubble_metrics_csv(const std::filesystem::path& path, std::span<const BubbleMetrics> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "market,mse_fv,pv_variance,simulations,rounds\n" << std::setprecision(10);
    for (const auto& r : rows)
        out << csv_escape(r.market) << "," << r.mse_fv << "," << r.pv_variance << "," << r.simulations << ","
            << r.rounds << "\n";
}

void print_episode_diffs(std::ostream& os, std::span<const EpisodeDiffRow> rows) {
    os << std::left << std::setw(34) << "mechanism" << std::setw(10) << "source" << std::right << std::setw(12)
       << "difference" << std::setw(10) << "t" << std::setw(8) << "n" << "\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(34) << r.mechanism << std::setw(10) << to_string(r.source) << std::right;
        if (r.diff)
            os << std::setw(12) << fmt(r.diff->difference) << std::setw(10) << fmt(r.diff->t_stat, 2)
               << std::setw(8) << r.diff->n << "\n";
        else
            os << "  " << r.error << "\n";
    }
}

void write_episode_diffs_csv(const std::filesystem::path& path, std::span<const EpisodeDiffRow> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "mechanism,source,difference,std_error,t_stat,n,error\n" << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.mechanism << "," << to_string(r.source) << ",";
        if (r.diff) out << r.diff->difference << "," << r.diff->std_error << "," << r.diff->t_stat << "," << r.diff->n;
        else out << ",,,";
        out << "," << csv_escape(r.error) << "\n";
    }
}

}  // namespace bubblelab
