#include "bubblelab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bubblelab/audit.hpp"
#include "bubblelab/errors.hpp"
#include "bubblelab/transport.hpp"

namespace bubblelab {

const char* to_string(MarketType t) {
    switch (t) {
        case MarketType::Single: return "single";
        case MarketType::Mixed: return "mixed";
        case MarketType::Scripted: return "scripted";
    }
    return "?";
}

int SessionConfig::n_agents() const {
    if (market_type == MarketType::Scripted) {
        int n = 0;
        for (const auto& g : scripted) n += g.count;
        return n;
    }
    return agents_per_model * static_cast<int>(models.size());
}

std::string SessionConfig::market_label() const { return label.empty() ? to_string(market_type) : label; }

void SessionConfig::validate() const {
    params.validate();
    if (n_simulations < 1) throw ConfigError("simulations must be at least 1");
    if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
    if (repair_attempts < 0) throw ConfigError("repair_attempts must be non-negative");
    if (!(bounds.near_multiplier > 0) || !(bounds.far_multiplier >= bounds.near_multiplier))
        throw ConfigError("forecast_bounds: need 0 < near <= far");
    switch (market_type) {
        case MarketType::Single:
            if (models.size() != 1) throw ConfigError("single market needs exactly one model");
            break;
        case MarketType::Mixed:
            if (models.size() != 2) throw ConfigError("mixed market needs exactly two models");
            if (models[0].name == models[1].name) throw ConfigError("mixed market models need distinct names");
            break;
        case MarketType::Scripted:
            if (scripted.empty()) throw ConfigError("scripted market needs at least one agent group");
            if (!models.empty()) throw ConfigError("scripted market takes no models");
            break;
    }
    if (n_agents() < 2) throw ConfigError("a market needs at least 2 agents");
    for (const auto& m : models) {
        if (m.name.empty()) throw ConfigError("model entry without a name");
        if (m.backend == "mock") {
            if (!MockTransport::is_known_backend(m.mock_reply))
                throw ConfigError("model '" + m.name + "': unknown mock_reply '" + m.mock_reply + "'");
        } else if (m.backend == "http") {
            if (m.model.empty()) throw ConfigError("model '" + m.name + "': `model` is required for http");
            if (m.endpoint.find("://") == std::string::npos)
                throw ConfigError("model '" + m.name + "': endpoint must be an http(s) URL");
        } else {
            throw ConfigError("model '" + m.name + "': backend must be http or mock");
        }
        if (m.max_attempts < 1 || m.backoff_ms < 0 || m.timeout_s < 1)
            throw ConfigError("model '" + m.name + "': bad retry settings");
    }
    for (const auto& g : scripted) {
        const auto& c = g.config;
        if (g.count < 1) throw ConfigError("agent group '" + g.name + "': count must be positive");
        for (double w : c.extrapolation_weights)
            if (!std::isfinite(w)) throw ConfigError("agent group '" + g.name + "': weights must be finite");
        for (auto [h, m] : c.horizon_multipliers)
            if (!std::isfinite(m)) throw ConfigError("agent group '" + g.name + "': multipliers must be finite");
        auto prob = [&](double p, const char* what) {
            if (!(p >= 0.0 && p <= 1.0))
                throw ConfigError("agent group '" + g.name + "': " + what + " must lie in [0, 1]");
        };
        prob(c.disposition_sell_boost, "disposition_sell_boost");
        prob(c.disposition_base_sell, "disposition_base_sell");
        prob(c.disposition_base_sell + c.disposition_sell_boost, "disposition_base_sell + disposition_sell_boost");
        prob(c.order_fraction, "order_fraction");
        if (!(c.noise_scale >= 0.0)) throw ConfigError("agent group '" + g.name + "': noise_scale must be >= 0");
        if (std::find(kForecastHorizons.begin(), kForecastHorizons.end(), c.trade_horizon) == kForecastHorizons.end())
            throw ConfigError("agent group '" + g.name + "': trade_horizon must be one of 0, 2, 5, 10");
    }
    if (shock && find_mechanism(shock->mechanism_id) == nullptr)
        throw ConfigError("shock: unknown mechanism '" + shock->mechanism_id + "'");
}

// --- YAML ---------------------------------------------------------------------------

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (!ok.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
T get(const YAML::Node& node, const char* key, const std::string& where, T fallback) {
    if (!node[key]) return fallback;
    try {
        return node[key].as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

Money get_money(const YAML::Node& node, const char* key, const std::string& where, Money fallback) {
    if (!node[key]) return fallback;
    try {
        return Money::parse(node[key].as<std::string>());
    } catch (const std::exception&) {
        throw ConfigError(where + "." + key + ": expected a decimal with at most 4 fractional digits");
    }
}

ScriptedKind get_kind(const YAML::Node& node, const char* key, const std::string& where, ScriptedKind fallback) {
    if (!node[key]) return fallback;
    auto text = get<std::string>(node, key, where, "");
    auto k = parse_scripted_kind(text);
    if (!k) throw ConfigError(where + "." + key + ": unknown agent kind '" + text + "'");
    return *k;
}

MarketParams parse_params(const YAML::Node& n) {
    MarketParams p;
    if (!n) return p;
    const std::string w = "params";
    check_keys(n, w,
               {"interest_rate", "dividend_low", "dividend_high", "dividend_prob_high", "main_periods",
                "practice_periods", "buyout_value", "initial_cash", "initial_shares", "forecast_reward",
                "forecast_tolerance"});
    p.interest_rate = get_money(n, "interest_rate", w, p.interest_rate);
    p.dividend_low = get_money(n, "dividend_low", w, p.dividend_low);
    p.dividend_high = get_money(n, "dividend_high", w, p.dividend_high);
    p.dividend_prob_high = get_money(n, "dividend_prob_high", w, p.dividend_prob_high);
    p.main_periods = get<int>(n, "main_periods", w, p.main_periods);
    p.practice_periods = get<int>(n, "practice_periods", w, p.practice_periods);
    p.buyout_value = get_money(n, "buyout_value", w, p.buyout_value);
    p.initial_cash = get_money(n, "initial_cash", w, p.initial_cash);
    p.initial_shares = get<int>(n, "initial_shares", w, p.initial_shares);
    p.forecast_reward = get_money(n, "forecast_reward", w, p.forecast_reward);
    p.forecast_tolerance = get_money(n, "forecast_tolerance", w, p.forecast_tolerance);
    return p;
}

ModelSpec parse_model(const YAML::Node& n, std::size_t i) {
    const std::string w = "models[" + std::to_string(i) + "]";
    check_keys(n, w,
               {"name", "backend", "mock_reply", "endpoint", "model", "api_key_env", "temperature", "max_attempts",
                "backoff_ms", "timeout_s"});
    ModelSpec m;
    m.name = get<std::string>(n, "name", w, "");
    m.backend = get<std::string>(n, "backend", w, m.backend);
    m.mock_reply = get<std::string>(n, "mock_reply", w, m.mock_reply);
    m.endpoint = get<std::string>(n, "endpoint", w, m.endpoint);
    m.model = get<std::string>(n, "model", w, m.name);
    m.api_key_env = get<std::string>(n, "api_key_env", w, m.api_key_env);
    m.temperature = get<double>(n, "temperature", w, m.temperature);
    m.max_attempts = get<int>(n, "max_attempts", w, m.max_attempts);
    m.backoff_ms = get<int>(n, "backoff_ms", w, m.backoff_ms);
    m.timeout_s = get<int>(n, "timeout_s", w, m.timeout_s);
    return m;
}

ScriptedGroup parse_group(const YAML::Node& n, std::size_t i) {
    const std::string w = "agents[" + std::to_string(i) + "]";
    check_keys(n, w,
               {"kind", "name", "count", "extrapolation_weights", "horizon_multipliers", "disposition_sell_boost",
                "disposition_base_sell", "disposition_inner", "noise_scale", "rng_seed", "order_fraction",
                "trade_horizon", "stochastic_rounding", "shock_sensitivity"});
    if (!n["kind"]) throw ConfigError(w + ": `kind` is required");
    ScriptedGroup g;
    auto& c = g.config;
    c.kind = get_kind(n, "kind", w, c.kind);
    g.name = get<std::string>(n, "name", w, to_string(c.kind));
    g.count = get<int>(n, "count", w, 1);
    c.extrapolation_weights = get<std::vector<double>>(n, "extrapolation_weights", w, c.extrapolation_weights);
    c.horizon_multipliers = get<std::map<int, double>>(n, "horizon_multipliers", w, c.horizon_multipliers);
    c.disposition_sell_boost = get<double>(n, "disposition_sell_boost", w, c.disposition_sell_boost);
    c.disposition_base_sell = get<double>(n, "disposition_base_sell", w, c.disposition_base_sell);
    c.disposition_inner = get_kind(n, "disposition_inner", w, c.disposition_inner);
    c.noise_scale = get<double>(n, "noise_scale", w, c.noise_scale);
    c.rng_seed = get<std::uint64_t>(n, "rng_seed", w, c.rng_seed);
    c.order_fraction = get<double>(n, "order_fraction", w, c.order_fraction);
    c.trade_horizon = get<int>(n, "trade_horizon", w, c.trade_horizon);
    c.stochastic_rounding = get<bool>(n, "stochastic_rounding", w, c.stochastic_rounding);
    c.shock_sensitivity = get<double>(n, "shock_sensitivity", w, c.shock_sensitivity);
    return g;
}

}  // namespace

SessionConfig parse_session_config(const std::string& yaml_text) {
    YAML::Node doc;
    try {
        doc = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    if (!doc || doc.IsNull()) throw ConfigError("config is empty");
    check_keys(doc, "config",
               {"market", "params", "seed", "simulations", "output_dir", "parallelism", "forecast_bounds",
                "repair_attempts", "reset_after_practice", "shock", "clause_catalog", "models", "agents_per_model",
                "agents"});
    SessionConfig c;
    const std::string w = "config";

    if (doc["market"]) {
        check_keys(doc["market"], "market", {"type", "label"});
        auto type = get<std::string>(doc["market"], "type", "market", "scripted");
        if (type == "single")
            c.market_type = MarketType::Single;
        else if (type == "mixed")
            c.market_type = MarketType::Mixed;
        else if (type == "scripted")
            c.market_type = MarketType::Scripted;
        else
            throw ConfigError("market.type: expected single, mixed or scripted, got '" + type + "'");
        c.label = get<std::string>(doc["market"], "label", "market", "");
    }
    c.params = parse_params(doc["params"]);
    c.seed = get<std::uint64_t>(doc, "seed", w, 0);
    c.n_simulations = get<int>(doc, "simulations", w, 1);
    c.output_dir = get<std::string>(doc, "output_dir", w, "out");
    c.parallelism = get<int>(doc, "parallelism", w, c.parallelism);
    c.repair_attempts = get<int>(doc, "repair_attempts", w, c.repair_attempts);
    c.reset_after_practice = get<bool>(doc, "reset_after_practice", w, c.reset_after_practice);
    if (doc["forecast_bounds"]) {
        check_keys(doc["forecast_bounds"], "forecast_bounds", {"near", "far"});
        c.bounds.near_multiplier = get<double>(doc["forecast_bounds"], "near", "forecast_bounds", 2.0);
        c.bounds.far_multiplier = get<double>(doc["forecast_bounds"], "far", "forecast_bounds", 4.0);
    }

    if (doc["models"]) {
        if (!doc["models"].IsSequence()) throw ConfigError("models: expected a list");
        for (std::size_t i = 0; i < doc["models"].size(); ++i) c.models.push_back(parse_model(doc["models"][i], i));
    }
    c.agents_per_model = get<int>(doc, "agents_per_model", w, c.market_type == MarketType::Mixed ? 12 : 20);
    if (doc["agents"]) {
        if (!doc["agents"].IsSequence()) throw ConfigError("agents: expected a list");
        for (std::size_t i = 0; i < doc["agents"].size(); ++i) c.scripted.push_back(parse_group(doc["agents"][i], i));
    }

    ClauseCatalog catalog = default_clause_catalog();
    if (doc["clause_catalog"]) catalog = load_clause_catalog(get<std::string>(doc, "clause_catalog", w, ""));
    if (doc["shock"]) {
        const auto& s = doc["shock"];
        check_keys(s, "shock", {"mechanism", "direction", "clause"});
        auto dir_text = get<std::string>(s, "direction", "shock", "");
        auto dir = parse_shock_direction(dir_text);
        if (!dir) throw ConfigError("shock.direction: expected amplify or suppress, got '" + dir_text + "'");
        c.shock = make_shock(get<std::string>(s, "mechanism", "shock", ""), *dir, catalog);
        if (s["clause"]) c.shock->clause = get<std::string>(s, "clause", "shock", "");
    }
    c.validate();
    return c;
}

SessionConfig load_session_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_session_config(ss.str());
}

ShockSpec parse_shock_argument(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("--shock expects <mechanism>:<amplify|suppress>");
    auto dir = parse_shock_direction(text.substr(colon + 1));
    if (!dir) throw ConfigError("--shock direction must be amplify or suppress");
    return make_shock(text.substr(0, colon), *dir);
}

}  // namespace bubblelab
