#include "bubblelab/panel.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace bubblelab {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

SchemaVersionError::SchemaVersionError(const std::string& file, int expected, int found)
    : std::runtime_error(file + ": schema version mismatch (expected " + std::to_string(expected) + ", found " +
                         std::to_string(found) + ")"),
      expected_(expected),
      found_(found) {}

const char* to_string(PriceSource s) {
    switch (s) {
        case PriceSource::Clearing: return "clearing";
        case PriceSource::Midpoint: return "midpoint";
        case PriceSource::CarriedForward: return "carried_forward";
    }
    return "?";
}

int sell_dummy_from_orders(std::span<const OrderRecord> submitted) {
    auto sells = std::count_if(submitted.begin(), submitted.end(), [](auto& o) { return o.side == Side::Sell; });
    auto buys = static_cast<std::ptrdiff_t>(submitted.size()) - sells;
    return sells > buys ? 1 : 0;
}

void derive_dummies(AgentRoundRecord& r) {
    r.buy_dummy = r.bought_shares > r.sold_shares ? 1 : 0;
    r.sell_dummy = r.forfeited ? std::nullopt : std::optional<int>(sell_dummy_from_orders(r.submitted_orders));
    r.gain_dummy = Money::from_int(r.prior_price) > r.prior_wapp ? 1 : 0;
}

// --- JSON mapping ---------------------------------------------------------------

namespace {

ojson money(Money m) { return m.to_double(); }

Money money_from(const ojson& j) {
    if (j.is_number_integer()) return Money::from_int(j.get<std::int64_t>());
    return Money::from_double(j.get<double>());
}

template <class T>
ojson opt(const std::optional<T>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

template <class T>
std::optional<T> opt_from(const ojson& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

PriceSource price_source_from(const std::string& s) {
    for (auto p : {PriceSource::Clearing, PriceSource::Midpoint, PriceSource::CarriedForward})
        if (s == to_string(p)) return p;
    throw PanelFormatError("unknown price_source '" + s + "'");
}

Side side_from(const std::string& s) {
    if (s == "BUY") return Side::Buy;
    if (s == "SELL") return Side::Sell;
    throw PanelFormatError("unknown order side '" + s + "'");
}

ojson orders_json(const std::vector<OrderRecord>& orders) {
    ojson a = ojson::array();
    for (const auto& o : orders) a.push_back({{"side", to_string(o.side)}, {"price", o.price}, {"quantity", o.quantity}});
    return a;
}

std::vector<OrderRecord> orders_from(const ojson& a) {
    std::vector<OrderRecord> out;
    for (const auto& o : a)
        out.push_back({side_from(o.at("side").get<std::string>()), o.at("price").get<int>(), o.at("quantity").get<int>()});
    return out;
}

ojson to_j(const RoundRecord& r) {
    return {{"sim", r.sim},
            {"period", r.period},
            {"practice", r.practice},
            {"price", r.price},
            {"price_source", to_string(r.price_source)},
            {"volume", r.volume},
            {"dividend", money(r.dividend)},
            {"bid_orders", r.bid_orders},
            {"bid_shares", r.bid_shares},
            {"ask_orders", r.ask_orders},
            {"ask_shares", r.ask_shares},
            {"submitted_bid_orders", r.submitted_bid_orders},
            {"submitted_bid_shares", r.submitted_bid_shares},
            {"submitted_ask_orders", r.submitted_ask_orders},
            {"submitted_ask_shares", r.submitted_ask_shares},
            {"forfeits", r.forfeits}};
}

RoundRecord round_from(const ojson& j) {
    RoundRecord r;
    r.sim = j.at("sim").get<int>();
    r.period = j.at("period").get<int>();
    r.practice = j.at("practice").get<bool>();
    r.price = j.at("price").get<int>();
    r.price_source = price_source_from(j.at("price_source").get<std::string>());
    r.volume = j.at("volume").get<std::int64_t>();
    r.dividend = money_from(j.at("dividend"));
    r.bid_orders = j.at("bid_orders").get<std::int64_t>();
    r.bid_shares = j.at("bid_shares").get<std::int64_t>();
    r.ask_orders = j.at("ask_orders").get<std::int64_t>();
    r.ask_shares = j.at("ask_shares").get<std::int64_t>();
    r.submitted_bid_orders = j.at("submitted_bid_orders").get<std::int64_t>();
    r.submitted_bid_shares = j.at("submitted_bid_shares").get<std::int64_t>();
    r.submitted_ask_orders = j.at("submitted_ask_orders").get<std::int64_t>();
    r.submitted_ask_shares = j.at("submitted_ask_shares").get<std::int64_t>();
    r.forfeits = j.at("forfeits").get<int>();
    return r;
}

ojson to_j(const AgentRoundRecord& r) {
    return {{"sim", r.sim},
            {"agent", r.agent},
            {"group", r.group},
            {"period", r.period},
            {"practice", r.practice},
            {"forfeited", r.forfeited},
            {"forfeit_reason", opt(r.forfeit_reason)},
            {"submitted_orders", orders_json(r.submitted_orders)},
            {"accepted_orders", orders_json(r.accepted_orders)},
            {"bought_shares", r.bought_shares},
            {"sold_shares", r.sold_shares},
            {"bought_cash", money(r.bought_cash)},
            {"sold_cash", money(r.sold_cash)},
            {"interest", money(r.interest)},
            {"dividend", money(r.dividend)},
            {"cash", money(r.cash)},
            {"shares", r.shares},
            {"wapp", money(r.wapp)},
            {"portfolio_value", money(r.portfolio_value)},
            {"prior_price", r.prior_price},
            {"prior_wapp", money(r.prior_wapp)},
            {"buy_dummy", r.buy_dummy},
            {"sell_dummy", opt(r.sell_dummy)},
            {"gain_dummy", r.gain_dummy}};
}

AgentRoundRecord agent_round_from(const ojson& j) {
    AgentRoundRecord r;
    r.sim = j.at("sim").get<int>();
    r.agent = j.at("agent").get<std::string>();
    r.group = j.at("group").get<std::string>();
    r.period = j.at("period").get<int>();
    r.practice = j.at("practice").get<bool>();
    r.forfeited = j.at("forfeited").get<bool>();
    r.forfeit_reason = opt_from<std::string>(j.at("forfeit_reason"));
    r.submitted_orders = orders_from(j.at("submitted_orders"));
    r.accepted_orders = orders_from(j.at("accepted_orders"));
    r.bought_shares = j.at("bought_shares").get<std::int64_t>();
    r.sold_shares = j.at("sold_shares").get<std::int64_t>();
    r.bought_cash = money_from(j.at("bought_cash"));
    r.sold_cash = money_from(j.at("sold_cash"));
    r.interest = money_from(j.at("interest"));
    r.dividend = money_from(j.at("dividend"));
    r.cash = money_from(j.at("cash"));
    r.shares = j.at("shares").get<std::int64_t>();
    r.wapp = money_from(j.at("wapp"));
    r.portfolio_value = money_from(j.at("portfolio_value"));
    r.prior_price = j.at("prior_price").get<int>();
    r.prior_wapp = money_from(j.at("prior_wapp"));
    r.buy_dummy = j.at("buy_dummy").get<int>();
    r.sell_dummy = opt_from<int>(j.at("sell_dummy"));
    r.gain_dummy = j.at("gain_dummy").get<int>();
    return r;
}

ojson to_j(const ForecastRecord& r) {
    return {{"sim", r.sim},
            {"agent", r.agent},
            {"period", r.period},
            {"practice", r.practice},
            {"horizon", r.horizon},
            {"forecast", r.forecast},
            {"base_price", r.base_price},
            {"target_period", r.target_period},
            {"realized", opt(r.realized)},
            {"error", opt(r.error)},
            {"expected_return", r.expected_return},
            {"rewarded", r.rewarded}};
}

ForecastRecord forecast_from(const ojson& j) {
    ForecastRecord r;
    r.sim = j.at("sim").get<int>();
    r.agent = j.at("agent").get<std::string>();
    r.period = j.at("period").get<int>();
    r.practice = j.at("practice").get<bool>();
    r.horizon = j.at("horizon").get<int>();
    r.forecast = j.at("forecast").get<int>();
    r.base_price = j.at("base_price").get<int>();
    r.target_period = j.at("target_period").get<int>();
    r.realized = opt_from<int>(j.at("realized"));
    r.error = opt_from<int>(j.at("error"));
    r.expected_return = j.at("expected_return").get<double>();
    r.rewarded = j.at("rewarded").get<bool>();
    return r;
}

ojson to_j(const ReasoningRecord& r) {
    return {{"sim", r.sim},
            {"agent", r.agent},
            {"period", r.period},
            {"practice", r.practice},
            {"forfeited", r.forfeited},
            {"plans", r.plans},
            {"insights", r.insights},
            {"market_analysis", r.market_analysis},
            {"strategy", r.strategy}};
}

ReasoningRecord reasoning_from(const ojson& j) {
    ReasoningRecord r;
    r.sim = j.at("sim").get<int>();
    r.agent = j.at("agent").get<std::string>();
    r.period = j.at("period").get<int>();
    r.practice = j.at("practice").get<bool>();
    r.forfeited = j.at("forfeited").get<bool>();
    r.plans = j.at("plans").get<std::string>();
    r.insights = j.at("insights").get<std::string>();
    r.market_analysis = j.at("market_analysis").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    return r;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

template <class T>
void write_jsonl(const fs::path& path, const std::string& schema, std::span<const T> rows) {
    auto out = open_out(path);
    out << jsonl_header(schema) << '\n';
    for (const auto& r : rows) out << to_j(r).dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <class T, class F>
std::vector<T> read_jsonl(const fs::path& path, const std::string& schema, F from) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PanelFormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw PanelFormatError(path.string() + ": empty file");
    check_jsonl_header(line, schema, path.string());
    std::vector<T> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(from(ojson::parse(line)));
        } catch (const ojson::exception& e) {
            throw PanelFormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

std::string to_json_line(const RoundRecord& r) { return to_j(r).dump(); }
std::string to_json_line(const AgentRoundRecord& r) { return to_j(r).dump(); }
std::string to_json_line(const ForecastRecord& r) { return to_j(r).dump(); }
std::string to_json_line(const ReasoningRecord& r) { return to_j(r).dump(); }

std::string jsonl_header(const std::string& schema) {
    return ojson{{"schema", schema}, {"version", kPanelSchemaVersion}}.dump();
}

void check_jsonl_header(const std::string& line, const std::string& schema, const std::string& file) {
    ojson h = ojson::parse(line, nullptr, false);
    if (h.is_discarded() || !h.is_object() || !h.contains("schema") || !h.contains("version"))
        throw PanelFormatError(file + ": missing schema header line");
    if (h["schema"] != schema)
        throw PanelFormatError(file + ": expected schema '" + schema + "', found '" + h["schema"].dump() + "'");
    int found = h["version"].is_number_integer() ? h["version"].get<int>() : -1;
    if (found != kPanelSchemaVersion) throw SchemaVersionError(file, kPanelSchemaVersion, found);
}

void write_rounds(const fs::path& p, std::span<const RoundRecord> rows) { write_jsonl(p, "rounds", rows); }
void write_agent_rounds(const fs::path& p, std::span<const AgentRoundRecord> rows) {
    write_jsonl(p, "agent_rounds", rows);
}
void write_forecasts(const fs::path& p, std::span<const ForecastRecord> rows) { write_jsonl(p, "forecasts", rows); }
void write_reasoning(const fs::path& p, std::span<const ReasoningRecord> rows) { write_jsonl(p, "reasoning", rows); }

std::vector<RoundRecord> read_rounds(const fs::path& p) { return read_jsonl<RoundRecord>(p, "rounds", round_from); }
std::vector<AgentRoundRecord> read_agent_rounds(const fs::path& p) {
    return read_jsonl<AgentRoundRecord>(p, "agent_rounds", agent_round_from);
}
std::vector<ForecastRecord> read_forecasts(const fs::path& p) {
    return read_jsonl<ForecastRecord>(p, "forecasts", forecast_from);
}
std::vector<ReasoningRecord> read_reasoning(const fs::path& p) {
    return read_jsonl<ReasoningRecord>(p, "reasoning", reasoning_from);
}

// --- session.meta ------------------------------------------------------------------

void write_session_meta(const fs::path& path, const SessionMeta& m) {
    ojson params = {{"interest_rate", money(m.params.interest_rate)},
                    {"dividend_low", money(m.params.dividend_low)},
                    {"dividend_high", money(m.params.dividend_high)},
                    {"dividend_prob_high", money(m.params.dividend_prob_high)},
                    {"main_periods", m.params.main_periods},
                    {"practice_periods", m.params.practice_periods},
                    {"buyout_value", money(m.params.buyout_value)},
                    {"initial_cash", money(m.params.initial_cash)},
                    {"initial_shares", m.params.initial_shares},
                    {"forecast_reward", money(m.params.forecast_reward)},
                    {"forecast_tolerance", money(m.params.forecast_tolerance)}};
    ojson agents = ojson::array();
    for (const auto& a : m.agents) agents.push_back({{"id", a.id}, {"group", a.group}, {"kind", a.kind}});
    ojson terminal = ojson::array();
    for (const auto& t : m.terminal)
        terminal.push_back({{"agent", t.agent},
                            {"redeemed_shares", t.redeemed_shares},
                            {"buyout", money(t.buyout)},
                            {"bonus", money(t.bonus)},
                            {"final_wealth", money(t.final_wealth)}});
    ojson shock = nullptr;
    if (m.shock)
        shock = {{"mechanism", m.shock->mechanism_id},
                 {"direction", to_string(m.shock->direction)},
                 {"clause", m.shock->clause}};
    ojson doc = {{"schema", "session_meta"},
                 {"version", kPanelSchemaVersion},
                 {"sim", m.sim},
                 {"seed", m.seed},
                 {"market_label", m.market_label},
                 {"market_type", m.market_type},
                 {"params", params},
                 {"shock", shock},
                 {"reset_after_practice", m.reset_after_practice},
                 {"agents", agents},
                 {"terminal", terminal},
                 {"totals",
                  {{"initial_cash", money(m.initial_cash_total)},
                   {"interest", money(m.total_interest)},
                   {"dividends", money(m.total_dividends)},
                   {"forecast_bonus", money(m.total_bonus)},
                   {"buyout", money(m.total_buyout)},
                   {"final_wealth", money(m.final_wealth_total)}}}};
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

SessionMeta read_session_meta(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PanelFormatError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ojson doc = ojson::parse(ss.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw PanelFormatError(path.string() + ": not a JSON object");
    if (doc.value("schema", "") != "session_meta") throw PanelFormatError(path.string() + ": not a session.meta file");
    int found = doc["version"].is_number_integer() ? doc["version"].get<int>() : -1;
    if (found != kPanelSchemaVersion) throw SchemaVersionError(path.string(), kPanelSchemaVersion, found);
    try {
        SessionMeta m;
        m.sim = doc.at("sim").get<int>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.market_label = doc.at("market_label").get<std::string>();
        m.market_type = doc.at("market_type").get<std::string>();
        const auto& p = doc.at("params");
        m.params.interest_rate = money_from(p.at("interest_rate"));
        m.params.dividend_low = money_from(p.at("dividend_low"));
        m.params.dividend_high = money_from(p.at("dividend_high"));
        m.params.dividend_prob_high = money_from(p.at("dividend_prob_high"));
        m.params.main_periods = p.at("main_periods").get<int>();
        m.params.practice_periods = p.at("practice_periods").get<int>();
        m.params.buyout_value = money_from(p.at("buyout_value"));
        m.params.initial_cash = money_from(p.at("initial_cash"));
        m.params.initial_shares = p.at("initial_shares").get<int>();
        m.params.forecast_reward = money_from(p.at("forecast_reward"));
        m.params.forecast_tolerance = money_from(p.at("forecast_tolerance"));
        if (!doc.at("shock").is_null()) {
            const auto& s = doc["shock"];
            ShockSpec spec;
            spec.mechanism_id = s.at("mechanism").get<std::string>();
            auto dir = parse_shock_direction(s.at("direction").get<std::string>());
            if (!dir) throw PanelFormatError(path.string() + ": bad shock direction");
            spec.direction = *dir;
            spec.clause = s.at("clause").get<std::string>();
            m.shock = spec;
        }
        m.reset_after_practice = doc.at("reset_after_practice").get<bool>();
        for (const auto& a : doc.at("agents"))
            m.agents.push_back({a.at("id").get<std::string>(), a.at("group").get<std::string>(),
                                a.at("kind").get<std::string>()});
        for (const auto& t : doc.at("terminal"))
            m.terminal.push_back({t.at("agent").get<std::string>(), t.at("redeemed_shares").get<std::int64_t>(),
                                  money_from(t.at("buyout")), money_from(t.at("bonus")),
                                  money_from(t.at("final_wealth"))});
        const auto& tot = doc.at("totals");
        m.initial_cash_total = money_from(tot.at("initial_cash"));
        m.total_interest = money_from(tot.at("interest"));
        m.total_dividends = money_from(tot.at("dividends"));
        m.total_bonus = money_from(tot.at("forecast_bonus"));
        m.total_buyout = money_from(tot.at("buyout"));
        m.final_wealth_total = money_from(tot.at("final_wealth"));
        return m;
    } catch (const ojson::exception& e) {
        throw PanelFormatError(path.string() + ": " + e.what());
    }
}

// --- directories --------------------------------------------------------------------

void write_simulation(const fs::path& dir, const SimulationPanel& panel) {
    fs::create_directories(dir);
    write_session_meta(dir / "session.meta", panel.meta);
    write_rounds(dir / "rounds.jsonl", panel.rounds);
    write_agent_rounds(dir / "agent_rounds.jsonl", panel.agent_rounds);
    write_forecasts(dir / "forecasts.jsonl", panel.forecasts);
    write_reasoning(dir / "reasoning.jsonl", panel.reasoning);
}

namespace {

void check_unique(const SimulationPanel& p, const fs::path& dir) {
    std::set<std::tuple<int, std::string, int>> seen;
    for (const auto& r : p.agent_rounds)
        if (!seen.emplace(r.sim, r.agent, r.period).second)
            throw PanelFormatError(dir.string() + ": duplicate agent round " + r.agent + "/" + std::to_string(r.period));
    std::set<int> periods;
    for (const auto& r : p.rounds)
        if (!periods.insert(r.period).second)
            throw PanelFormatError(dir.string() + ": duplicate round " + std::to_string(r.period));
}

}  // namespace

SimulationPanel read_simulation(const fs::path& dir) {
    SimulationPanel p;
    p.meta = read_session_meta(dir / "session.meta");
    p.rounds = read_rounds(dir / "rounds.jsonl");
    p.agent_rounds = read_agent_rounds(dir / "agent_rounds.jsonl");
    p.forecasts = read_forecasts(dir / "forecasts.jsonl");
    p.reasoning = read_reasoning(dir / "reasoning.jsonl");
    check_unique(p, dir);
    return p;
}

std::vector<SimulationPanel> load_panels(const fs::path& root) {
    if (!fs::is_directory(root)) throw PanelFormatError(root.string() + " is not a directory");
    std::vector<SimulationPanel> out;
    if (fs::exists(root / "session.meta")) {
        out.push_back(read_simulation(root));
        return out;
    }
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (!e.is_directory()) continue;
        if (fs::exists(e.path() / "session.meta")) {
            dirs.push_back(e.path());
        } else {
            for (const auto& inner : fs::directory_iterator(e.path()))
                if (inner.is_directory() && fs::exists(inner.path() / "session.meta")) dirs.push_back(inner.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(read_simulation(d));
    if (out.empty()) throw PanelFormatError("no simulation directories under " + root.string());
    return out;
}

// --- CSV -----------------------------------------------------------------------------

namespace {

template <class T>
std::string cell(const std::optional<T>& v) {
    return v ? std::to_string(*v) : std::string();
}

}  // namespace

void export_forecasts_csv(const fs::path& path, std::span<const SimulationPanel> panels) {
    auto out = open_out(path);
    out << "sim,agent,t,h,f,realized,error\n";
    for (const auto& p : panels)
        for (const auto& f : p.forecasts) {
            if (f.practice) continue;
            out << f.sim << ',' << f.agent << ',' << f.period << ',' << f.horizon << ',' << f.forecast << ','
                << cell(f.realized) << ',' << cell(f.error) << '\n';
        }
}

void export_rounds_csv(const fs::path& path, std::span<const SimulationPanel> panels) {
    auto out = open_out(path);
    out << "market,sim,period,price,price_source,volume,dividend,bid_shares,ask_shares,bid_orders,ask_orders\n";
    for (const auto& p : panels)
        for (const auto& r : p.rounds) {
            if (r.practice) continue;
            out << p.meta.market_label << ',' << r.sim << ',' << r.period << ',' << r.price << ','
                << to_string(r.price_source) << ',' << r.volume << ',' << r.dividend.to_string() << ',' << r.bid_shares
                << ',' << r.ask_shares << ',' << r.bid_orders << ',' << r.ask_orders << '\n';
        }
}

}  // namespace bubblelab
