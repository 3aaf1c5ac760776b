#include "bubblelab/session.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "bubblelab/errors.hpp"
#include "bubblelab/llm.hpp"
#include "bubblelab/rng.hpp"

namespace bubblelab {

namespace fs = std::filesystem;

Money dividend_draw(const MarketParams& params, std::uint64_t seed, int sim, int period) {
    Rng rng(stream_key({static_cast<std::int64_t>(seed), sim, period,
                        static_cast<std::int64_t>(StreamPurpose::Dividend), 0}));
    return rng.uniform() < params.dividend_prob_high.to_double() ? params.dividend_high : params.dividend_low;
}

std::string sim_dir_name(int sim) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sim_%03d", sim);
    return buf;
}

namespace {

std::string agent_name(int index, int total) {
    char buf[32];
    std::snprintf(buf, sizeof buf, total >= 100 ? "agent_%03d" : "agent_%02d", index + 1);
    return buf;
}

std::shared_ptr<Transport> make_transport(const ModelSpec& m) {
    if (m.backend == "mock") return std::make_shared<MockTransport>(m.mock_reply);
    const char* key = std::getenv(m.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw ConfigError("model '" + m.name + "': environment variable " + m.api_key_env + " is not set");
    RetryPolicy policy;
    policy.max_attempts = m.max_attempts;
    policy.initial_backoff = std::chrono::milliseconds(m.backoff_ms);
    policy.timeout = std::chrono::seconds(m.timeout_s);
    return std::make_shared<HttpTransport>(m.endpoint, key, policy);
}

bool is_llm(const Agent& a) { return dynamic_cast<const LlmAgent*>(&a) != nullptr; }

std::string agent_kind(const Agent& a) {
    if (auto* s = dynamic_cast<const ScriptedAgent*>(&a)) return to_string(s->config().kind);
    return "llm";
}

std::vector<OrderRecord> to_records(std::span<const LimitOrder> orders) {
    std::vector<OrderRecord> out;
    for (const auto& o : orders) out.push_back({o.side, o.price, o.quantity});
    return out;
}

// Runs fn(i) for i in [0, n) on up to `parallelism` threads; rethrows the
// first exception after all workers finish.
template <class F>
void parallel_for(std::size_t n, int parallelism, F fn) {
    if (parallelism <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    int threads = std::min<int>(parallelism, static_cast<int>(n));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct AgentState {
    Memory memory;
    std::optional<std::string> notice;
    std::vector<TradeRecap> recent_trades;
};

std::string dump_state(int period, const PortfolioMap& portfolios, const OrderBook* book) {
    std::ostringstream out;
    out << "round state at period " << period << ":\n";
    for (const auto& [id, p] : portfolios)
        out << "  " << id << " cash=" << p.cash.to_string() << " shares=" << p.shares << " wapp=" << p.wapp.to_string()
            << "\n";
    if (book) {
        for (const auto& b : book->bids) out << "  bid " << b.agent_id << " " << b.price << "x" << b.quantity << "\n";
        for (const auto& a : book->asks) out << "  ask " << a.agent_id << " " << a.price << "x" << a.quantity << "\n";
    }
    return out.str();
}

}  // namespace

std::vector<std::unique_ptr<Agent>> build_agents(const SessionConfig& config) {
    std::vector<std::unique_ptr<Agent>> agents;
    const int total = config.n_agents();
    if (config.market_type == MarketType::Scripted) {
        int index = 0;
        for (const auto& g : config.scripted)
            for (int i = 0; i < g.count; ++i, ++index)
                agents.push_back(std::make_unique<ScriptedAgent>(agent_name(index, total), g.name, g.config));
        return agents;
    }
    int index = 0;
    for (const auto& m : config.models) {
        auto transport = make_transport(m);
        for (int i = 0; i < config.agents_per_model; ++i, ++index)
            agents.push_back(std::make_unique<LlmAgent>(agent_name(index, total), m.name, transport, m.model,
                                                        m.temperature, config.repair_attempts));
    }
    return agents;
}

SimulationPanel run_simulation(const SessionConfig& config, int sim, std::vector<std::unique_ptr<Agent>>& agents) {
    const MarketParams& params = config.params;
    const int fv_price = static_cast<int>(std::lround(fundamental_value(params).to_double()));
    const std::size_t n = agents.size();
    const int llm_count = static_cast<int>(std::count_if(agents.begin(), agents.end(), [](auto& a) { return is_llm(*a); }));
    const ShockSpec* shock = config.shock ? &*config.shock : nullptr;

    SimulationPanel panel;
    panel.meta.sim = sim;
    panel.meta.seed = config.seed;
    panel.meta.market_label = config.market_label();
    panel.meta.market_type = to_string(config.market_type);
    panel.meta.params = params;
    panel.meta.shock = config.shock;
    panel.meta.reset_after_practice = config.reset_after_practice;
    for (const auto& a : agents) panel.meta.agents.push_back({a->id(), a->group(), agent_kind(*a)});

    PortfolioMap portfolios;
    std::vector<AgentState> state(n);
    for (const auto& a : agents) portfolios[a->id()] = initial_portfolio(params);
    std::vector<PricePoint> history;
    int last_price = fv_price;
    std::vector<SubmittedForecast> submitted;
    std::vector<std::size_t> forecast_rows;  // index into panel.forecasts per submitted forecast

    auto observation = [&](std::size_t i, int period, bool practice) {
        AgentObservation obs;
        obs.agent_id = agents[i]->id();
        obs.period = period;
        obs.practice = practice;
        obs.total_periods = params.main_periods;
        obs.portfolio = portfolios.at(agents[i]->id());
        obs.price_history = history;
        obs.recent_trades = state[i].recent_trades;
        obs.memory = state[i].memory;
        obs.current_price = last_price;
        obs.notice = state[i].notice;
        return obs;
    };
    auto context = [&](std::size_t i, int period) {
        TurnContext ctx;
        ctx.sim = sim;
        ctx.stream_seed = stream_key({static_cast<std::int64_t>(config.seed), sim, period,
                                      static_cast<std::int64_t>(StreamPurpose::Agent), static_cast<std::int64_t>(i)});
        ctx.params = &params;
        ctx.shock = shock;
        ctx.bounds = config.bounds;
        return ctx;
    };

    auto run_period = [&](int period, bool practice) {
        std::vector<TurnResult> results(n);
        parallel_for(n, config.parallelism, [&](std::size_t i) {
            results[i] = agents[i]->act(observation(i, period, practice), context(i, period));
        });

        int transport_forfeits = 0;
        for (const auto& r : results)
            if (r.forfeit && r.forfeit->reason == ForfeitReason::Transport) ++transport_forfeits;
        if (llm_count > 0 && transport_forfeits >= llm_count)
            throw TransportExhausted("every model-backed agent lost its connection in period " + std::to_string(period) +
                                     " of simulation " + std::to_string(sim));

        OrderBook book;
        book.round = period;
        RoundRecord round;
        round.sim = sim;
        round.period = period;
        round.practice = practice;
        std::vector<std::vector<LimitOrder>> submitted_orders(n), accepted(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& id = agents[i]->id();
            if (!results[i].decision) {
                ++round.forfeits;
                continue;
            }
            auto& orders = results[i].decision->orders;
            for (std::size_t s = 0; s < orders.size(); ++s) {
                orders[s].agent_id = id;
                orders[s].seq = static_cast<int>(s);
                (orders[s].side == Side::Buy ? round.submitted_bid_orders : round.submitted_ask_orders) += 1;
                (orders[s].side == Side::Buy ? round.submitted_bid_shares : round.submitted_ask_shares) +=
                    orders[s].quantity;
            }
            submitted_orders[i] = orders;
            auto enforced = enforce_budget(orders, portfolios.at(id));
            for (const auto& b : enforced.bids) {
                book.bids.push_back(b);
                accepted[i].push_back(b);
                round.bid_orders += 1;
                round.bid_shares += b.quantity;
            }
            for (const auto& a : enforced.asks) {
                book.asks.push_back(a);
                accepted[i].push_back(a);
                round.ask_orders += 1;
                round.ask_shares += a.quantity;
            }
        }

        ClearingOutcome outcome;
        RoundLedger ledger;
        PortfolioMap before = portfolios;
        try {
            outcome = clear(book);
            round.dividend = dividend_draw(params, config.seed, sim, period);
            ledger = settle_round(portfolios, outcome.fills, round.dividend, params);
            Money cash_net;
            std::int64_t share_net = 0;
            for (const auto& [id, e] : ledger.entries) {
                cash_net += e.trade_cash;
                share_net += e.trade_shares;
            }
            if (cash_net != Money{} || share_net != 0)
                throw InvariantViolation("trades do not net to zero (cash " + cash_net.to_string() + ", shares " +
                                         std::to_string(share_net) + ")");
        } catch (const InvariantViolation& e) {
            throw InvariantViolation(std::string(e.what()) + "\n" + dump_state(period, before, &book));
        }

        if (outcome.price) {
            round.price = *outcome.price;
            round.price_source = outcome.crossed ? PriceSource::Clearing : PriceSource::Midpoint;
        } else {
            round.price = last_price;
            round.price_source = PriceSource::CarriedForward;
        }
        round.volume = outcome.volume;

        for (std::size_t i = 0; i < n; ++i) {
            const auto& id = agents[i]->id();
            const auto& e = ledger.entries.at(id);
            const auto& pf = portfolios.at(id);
            AgentRoundRecord r;
            r.sim = sim;
            r.agent = id;
            r.group = agents[i]->group();
            r.period = period;
            r.practice = practice;
            r.forfeited = !results[i].decision.has_value();
            if (results[i].forfeit) r.forfeit_reason = to_string(results[i].forfeit->reason);
            r.submitted_orders = to_records(submitted_orders[i]);
            r.accepted_orders = to_records(accepted[i]);
            r.bought_shares = e.bought_shares;
            r.sold_shares = e.sold_shares;
            r.bought_cash = e.bought_cash;
            r.sold_cash = e.sold_cash;
            r.interest = e.interest;
            r.dividend = e.dividend;
            r.cash = pf.cash;
            r.shares = pf.shares;
            r.wapp = pf.wapp;
            r.portfolio_value = pf.cash + Money::from_int(round.price) * pf.shares;
            r.prior_price = last_price;
            r.prior_wapp = before.at(id).wapp;
            derive_dummies(r);
            panel.agent_rounds.push_back(std::move(r));

            ReasoningRecord rr;
            rr.sim = sim;
            rr.agent = id;
            rr.period = period;
            rr.practice = practice;
            rr.forfeited = !results[i].decision.has_value();
            if (results[i].decision) {
                const auto& d = *results[i].decision;
                state[i].memory = d.memory_update;
                state[i].notice.reset();
                rr.market_analysis = d.reasoning.market_analysis;
                rr.strategy = d.reasoning.strategy_formulation;
                for (auto [h, f] : d.forecasts) {
                    ForecastRecord fr;
                    fr.sim = sim;
                    fr.agent = id;
                    fr.period = period;
                    fr.practice = practice;
                    fr.horizon = h;
                    fr.forecast = f;
                    fr.base_price = last_price;
                    fr.target_period = period + h;
                    fr.expected_return = period_return(last_price, f);
                    if (!practice) {
                        submitted.push_back({id, period, h, f});
                        forecast_rows.push_back(panel.forecasts.size());
                    }
                    panel.forecasts.push_back(fr);
                }
            } else {
                state[i].notice = results[i].forfeit ? results[i].forfeit->message : std::string(kForfeitMessage);
            }
            rr.plans = state[i].memory.plans;
            rr.insights = state[i].memory.insights;
            panel.reasoning.push_back(std::move(rr));

            state[i].recent_trades = {{period, e.bought_shares, e.sold_shares, round.price}};
        }

        history.push_back({period, round.price, round.volume, round.dividend});
        last_price = round.price;
        panel.rounds.push_back(round);
    };

    for (int p = params.practice_periods - 1; p >= 0; --p) run_period(-p, true);

    if (params.practice_periods > 0) {
        std::vector<std::optional<Memory>> reflections(n);
        parallel_for(n, config.parallelism, [&](std::size_t i) {
            reflections[i] = agents[i]->reflect(observation(i, 0, true), context(i, 0));
        });
        for (std::size_t i = 0; i < n; ++i)
            if (reflections[i]) state[i].memory = *reflections[i];
        if (config.reset_after_practice) {
            for (const auto& a : agents) portfolios[a->id()] = initial_portfolio(params);
            history.clear();
            last_price = fv_price;
            for (auto& s : state) s.recent_trades.clear();
        }
    }

    Money initial_cash;
    for (const auto& [id, pf] : portfolios) initial_cash += pf.cash;
    panel.meta.initial_cash_total = initial_cash;

    for (int p = 1; p <= params.main_periods; ++p) run_period(p, false);

    std::map<int, int> prices;
    for (const auto& r : panel.rounds)
        if (!r.practice) prices[r.period] = r.price;
    auto outcomes = score_forecasts(submitted, prices, params, &portfolios);
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        auto& fr = panel.forecasts[forecast_rows[k]];
        fr.realized = outcomes[k].realized;
        if (fr.realized) fr.error = *fr.realized - fr.forecast;
        fr.rewarded = outcomes[k].rewarded;
    }

    for (const auto& r : panel.agent_rounds) {
        if (r.practice) continue;
        panel.meta.total_interest += r.interest;
        panel.meta.total_dividends += r.dividend;
    }
    auto terminal = terminal_settlement(portfolios, params);
    for (const auto& [id, t] : terminal) {
        panel.meta.terminal.push_back({id, t.redeemed_shares, t.buyout, t.bonus, t.final_wealth});
        panel.meta.total_bonus += t.bonus;
        panel.meta.total_buyout += t.buyout;
        panel.meta.final_wealth_total += t.final_wealth;
    }
    check_conservation(panel);
    return panel;
}

void check_conservation(const SimulationPanel& panel) {
    std::map<int, std::pair<Money, std::int64_t>> per_round;
    for (const auto& r : panel.agent_rounds) {
        auto& acc = per_round[r.period];
        acc.first += r.sold_cash - r.bought_cash;
        acc.second += r.bought_shares - r.sold_shares;
    }
    for (const auto& [period, acc] : per_round)
        if (acc.first != Money{} || acc.second != 0)
            throw InvariantViolation("period " + std::to_string(period) + ": trade deltas do not net to zero");

    const auto& m = panel.meta;
    Money expected = m.initial_cash_total + m.total_interest + m.total_dividends + m.total_bonus + m.total_buyout;
    if (expected != m.final_wealth_total)
        throw InvariantViolation("conservation failed in simulation " + std::to_string(m.sim) + ": expected " +
                                 expected.to_string() + ", found " + m.final_wealth_total.to_string());
    Money bonus_from_forecasts;
    for (const auto& f : panel.forecasts)
        if (f.rewarded) bonus_from_forecasts += m.params.forecast_reward;
    if (bonus_from_forecasts != m.total_bonus)
        throw InvariantViolation("forecast bonuses paid differ from rewarded forecasts");
}

std::vector<SimulationPanel> run_session(const SessionConfig& config, const RunOptions& options) {
    config.validate();
    // Surfaces missing credentials before anything touches the disk.
    auto first_agents = build_agents(config);

    if (options.write) {
        const fs::path& root = config.output_dir;
        bool occupied = false;
        for (int s = 0; s < config.n_simulations; ++s) occupied = occupied || fs::exists(root / sim_dir_name(s));
        if (occupied && !options.force)
            throw ConfigError("output directory " + root.string() + " already holds simulation results; pass --force");
        if (options.force && fs::exists(root))
            for (const auto& e : fs::directory_iterator(root))
                if (e.is_directory() && e.path().filename().string().rfind("sim_", 0) == 0) fs::remove_all(e.path());
    }

    std::vector<SimulationPanel> out;
    for (int s = 0; s < config.n_simulations; ++s) {
        auto agents = s == 0 ? std::move(first_agents) : build_agents(config);
        auto panel = run_simulation(config, s, agents);
        if (options.write) {
            fs::path dir = config.output_dir / sim_dir_name(s);
            write_simulation(dir, panel);
            std::vector<Memory> final_memory;
            for (const auto& a : agents) {
                const ReasoningRecord* last = nullptr;
                for (const auto& r : panel.reasoning)
                    if (r.agent == a->id()) last = &r;
                fs::path mdir = dir / "memory" / a->id();
                fs::create_directories(mdir);
                std::ofstream(mdir / "PLANS.txt", std::ios::binary) << (last ? last->plans : "");
                std::ofstream(mdir / "INSIGHTS.txt", std::ios::binary) << (last ? last->insights : "");
            }
        }
        if (options.on_simulation) options.on_simulation(panel);
        out.push_back(std::move(panel));
    }
    return out;
}

}  // namespace bubblelab
