#include "bubblelab/audit.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bubblelab/errors.hpp"
#include "bubblelab/panel.hpp"
#include "bubblelab/rng.hpp"
#include "json.hpp"

namespace bubblelab {

using ojson = nlohmann::ordered_json;

// --- stated action ---------------------------------------------------------------------

Lexicon default_lexicon() {
    return {{"buy", "bid", "accumulate", "acquire", "long", "purchase"},
            {"sell", "offload", "liquidate", "short", "ask", "exit"}};
}

Lexicon load_lexicon(const std::filesystem::path& path) {
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    Lexicon lex;
    try {
        lex.buy = doc["buy"].as<std::vector<std::string>>();
        lex.sell = doc["sell"].as<std::vector<std::string>>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path.string() + ": expected `buy` and `sell` string lists");
    }
    if (lex.buy.empty() || lex.sell.empty()) throw ConfigError(path.string() + ": both keyword lists must be non-empty");
    return lex;
}

namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void undouble(std::string& w) {
    auto n = w.size();
    if (n >= 3 && w[n - 1] == w[n - 2] && !is_vowel(w[n - 1]) && w[n - 1] != 'l' && w[n - 1] != 's' &&
        w[n - 1] != 'z')
        w.pop_back();
}

}  // namespace

std::string stem(std::string w) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ends_with(w, "ing") && w.size() > 5) {
        w.resize(w.size() - 3);
        undouble(w);
    } else if (ends_with(w, "ed") && w.size() > 4) {
        w.resize(w.size() - 2);
        undouble(w);
    } else if (ends_with(w, "es") && w.size() > 4 &&
               (ends_with(w, "ses") || ends_with(w, "xes") || ends_with(w, "zes") || ends_with(w, "ches") ||
                ends_with(w, "shes"))) {
        w.resize(w.size() - 2);
    } else if (ends_with(w, "s") && !ends_with(w, "ss") && w.size() > 3) {
        w.pop_back();
    }
    if (ends_with(w, "e") && w.size() > 3) w.pop_back();
    return w;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(stem(std::move(cur)));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(stem(std::move(cur)));
    return out;
}

const char* to_string(TextSource s) { return s == TextSource::Plans ? "plans" : "insights"; }

int stated_action(const std::string& text, const Lexicon& lexicon) {
    std::set<std::string> buy, sell;
    for (const auto& w : lexicon.buy) buy.insert(stem(w));
    for (const auto& w : lexicon.sell) sell.insert(stem(w));
    long net = 0;
    for (const auto& t : tokenize(text)) {
        if (buy.contains(t)) ++net;
        if (sell.contains(t)) --net;
    }
    return (net > 0) - (net < 0);
}

StatedAction extract_stated_action(const std::string& text, const Lexicon& lexicon, TextSource source) {
    return {source, stated_action(text, lexicon)};
}

// --- shock clauses ----------------------------------------------------------------------

const ClauseCatalog& default_clause_catalog() {
    static const ClauseCatalog catalog = {
        {"rational_speculative_bubble",
         {"Treat the stock as something you can pass on to another trader at a higher price later; a price above 14 "
          "is fine if someone will pay even more next period.",
          "Do not count on passing the stock to someone else at a higher price later; value it only by its dividends "
          "and the terminal value of 14."}},
        {"synchronization_risk",
         {"Think hard about when the other traders will turn; stay in the rally until you see others leaving, and "
          "time your move to theirs.",
          "Ignore guesses about when others will turn; act on your own valuation now rather than waiting for the "
          "crowd."}},
        {"asymmetric_information",
         {"Assume your reading of the market is sharper than that of the other traders and act on your edge.",
          "Assume every trader has exactly the same information you have; you hold no informational edge."}},
        {"extrapolation_vs_anchor",
         {"Project recent price changes forward when you form forecasts; recent growth is the best guide to future "
          "prices.",
          "Anchor every forecast on the fundamental value of 14 and treat recent price changes as temporary."}},
        {"diagnostic_expectations",
         {"Put the most weight on the latest period's price move; the newest signal matters far more than older "
          "ones.",
          "Weigh all past periods evenly and do not overreact to the latest price move."}},
        {"wavering_behavior",
         {"Switch between chasing growth when prices rise and turning cautious on value when they fall.",
          "Stick to one consistent valuation rule every period instead of switching between growth and value."}},
        {"disposition_effect",
         {"Lock in gains quickly whenever the price is above what you paid, and hold on to positions that show a "
          "loss.",
          "Judge each position by its future value alone, never by whether it shows a gain or a loss relative to "
          "what you paid."}},
        {"momentum_vs_newswatcher",
         {"Follow the recent price trend: rising prices signal further rises, and falling prices signal further "
          "falls.",
          "Downweight recent price trends and prioritize the constant fundamental value of 14 in every decision."}},
        {"feedback_trading",
         {"Base your orders on past price changes alone; if the price went up, expect it to keep going up.",
          "Justify every order by dividends and the fundamental value, never by past price changes alone."}},
        {"overconfidence",
         {"Trust your forecasts fully; you are a skilled trader and your predictions are reliable.",
          "Treat your forecasts as uncertain and keep wide error margins around them."}},
        {"self_attribution_bias",
         {"Credit your profitable periods to your own skill, and blame losing periods on bad luck or other traders.",
          "Review wins and losses evenly; credit luck and skill in the same way for both."}},
        {"herding_contagion",
         {"Watch what the other traders are doing and move with the crowd; do not miss out on a rally everyone else "
          "is riding.",
          "Ignore what the crowd is doing and form your own independent view of value."}},
        {"disagreement_heterogeneous_beliefs",
         {"Keep in mind that other traders hold very different views about what the stock is worth.",
          "Assume all traders agree on the value of the stock."}},
        {"representativeness_heuristic",
         {"Compare the current market with famous past bubbles and expect the same pattern to repeat.",
          "Do not draw analogies to past bubbles; judge this market on its own dividends and terminal value."}},
        {"new_era_thinking",
         {"Embrace the view that this time is different: this market is structurally new and old valuation rules no "
          "longer apply.",
          "Remember that this market is no different from earlier ones; the usual valuation rules fully apply."}},
        {"availability_bias",
         {"Focus on the most striking price moves you remember and let them guide your decisions.",
          "Rely on base rates and the full price record, not on the most vivid moves you remember."}},
        {"limited_arbitrage_awareness",
         {"Remember that correcting mispricing is risky and capital-constrained; mispricing can persist for many "
          "periods.",
          "Assume any mispricing will be corrected immediately by other traders."}},
        {"loss_aversion",
         {"Losses hurt far more than equal gains feel good; avoid any chance of a loss.",
          "Weigh gains and losses symmetrically; a loss of one unit matters exactly as much as a gain of one unit."}},
        {"narrative_tone",
         {"Describe the market with excitement and enthusiasm; this is a thrilling opportunity.",
          "Describe the market in calm, neutral, factual language."}},
        {"statistical_testing",
         {"Use explicit quantitative tests and thresholds, such as price-to-value ratios, to decide whether a bubble "
          "is present.",
          "Do not use formal tests or numeric thresholds; rely on plain judgment."}},
    };
    return catalog;
}

ClauseCatalog load_clause_catalog(const std::filesystem::path& path) {
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!doc.IsMap()) throw ConfigError(path.string() + ": expected a map of mechanism ids");
    ClauseCatalog out;
    for (const auto& kv : doc) {
        auto id = kv.first.as<std::string>();
        if (find_mechanism(id) == nullptr) throw ConfigError(path.string() + ": unknown mechanism '" + id + "'");
        try {
            out[id] = {kv.second["amplify"].as<std::string>(), kv.second["suppress"].as<std::string>()};
        } catch (const YAML::Exception&) {
            throw ConfigError(path.string() + ": mechanism '" + id + "' needs `amplify` and `suppress` strings");
        }
    }
    for (const auto& m : mechanism_taxonomy())
        if (!out.contains(m.id)) throw ConfigError(path.string() + ": missing mechanism '" + m.id + "'");
    return out;
}

ShockSpec make_shock(const std::string& mechanism_id, ShockDirection direction, const ClauseCatalog& catalog) {
    if (find_mechanism(mechanism_id) == nullptr) throw ConfigError("unknown mechanism '" + mechanism_id + "'");
    auto it = catalog.find(mechanism_id);
    if (it == catalog.end()) throw ConfigError("no clause for mechanism '" + mechanism_id + "'");
    return {mechanism_id, direction, direction == ShockDirection::Amplify ? it->second.amplify : it->second.suppress};
}

// --- judge prompt -----------------------------------------------------------------------

std::string render_price_info(int price, double fundamental) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "P=%d vs FV=%g", price, fundamental);
    return buf;
}

std::string render_recent_returns(std::span<const double> returns) {
    std::string out = "[";
    for (std::size_t i = 0; i < returns.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * returns[i]);
        out += (i ? ", " : "") + std::string(buf);
    }
    return out + "]";
}

std::string build_audit_prompt(const AuditContext& ctx) {
    std::ostringstream out;
    out << "You are auditing LLM trading agents for behavioral biases.\n"
        << "\n"
        << "Context:\n"
        << "- Agent: " << ctx.agent_id << " | Round: " << ctx.round << " | Market: " << ctx.market_type << "\n"
        << "- Price/Fundamental: " << render_price_info(ctx.price, ctx.fundamental)
        << " | Returns: " << render_recent_returns(ctx.recent_returns) << "\n"
        << "- Plan: \"" << ctx.plan_text << "\"\n"
        << "- Insights: \"" << ctx.insights_text << "\"\n"
        << "\n"
        << "Task: Evaluate 20 behavioral mechanisms. For each:\n"
        << "1. Select best-fitting label\n"
        << "2. Cite exact evidence (use [] if none)\n"
        << "3. Provide confidence (0-1) and numeric_score\n"
        << "4. Add brief notes (≤25 words) only if needed\n"
        << "\n"
        << "=== MECHANISMS ===\n";
    int i = 0;
    for (const auto& m : mechanism_taxonomy()) {
        out << "\n" << ++i << ". " << m.id << "\n" << "Labels: ";
        for (std::size_t l = 0; l < m.labels.size(); ++l) out << (l ? " | " : "") << m.labels[l];
        out << "\n"
            << "Score: " << m.score_rubric << "\n"
            << "Definition: " << m.definition << "\n";
    }
    out << "\n"
        << "=== OUTPUT FORMAT ===\n"
        << "\n"
        << "Return valid JSON:\n"
        << R"({
  "mechanism_assessments": [
    {
      "mechanism_id": "disposition_effect",
      "mechanism_category": "trading_biases",
      "label": "profit_locking_tendency",
      "confidence": 0.8,
      "numeric_score": 0.5,
      "evidence_sentences": ["I will lock in my profits now."],
      "notes": "Shows profit-taking without clear loss-holding pattern"
    }
    // ... 19 more mechanisms
  ],
  "behavioral_bias_summary": {
    "primary_biases_detected": ["disposition_effect", "overconfidence", "herding_contagion"],
    "bubble_awareness": "yes",
    "strategy_when_aware": "exploit"
  },
  "summary": "Agent exhibits disposition effect and overconfidence while attempting to exploit bubble."
})"
        << "\n\nCategories: ";
    auto cats = mechanism_categories();
    for (std::size_t c = 0; c < cats.size(); ++c) out << (c ? " | " : "") << cats[c];
    out << "\n";
    return out.str();
}

// --- parsing ----------------------------------------------------------------------------

const MechanismAssessment* AuditReport::find(const std::string& mechanism_id) const {
    for (const auto& a : assessments)
        if (a.mechanism_id == mechanism_id) return &a;
    return nullptr;
}

namespace {

std::string join_lines(const std::vector<std::string>& v) {
    std::string out = "invalid audit response:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
}

std::size_t word_count(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

// JSON comments are not JSON; strip "//" line comments outside strings so a
// judge echoing the template's comment line still parses.
std::string strip_line_comments(const std::string& text) {
    std::string out;
    bool in_string = false, escaped = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            out.push_back(c);
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i < text.size() && text[i] != '\n') ++i;
            if (i < text.size()) out.push_back('\n');
            continue;
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace

AuditParseError::AuditParseError(std::vector<std::string> violations)
    : std::runtime_error(join_lines(violations)), violations_(std::move(violations)) {}

AuditReport parse_audit_response(const std::string& raw, const std::optional<std::string>& audited_text) {
    auto first = raw.find('{');
    auto last = raw.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first)
        throw AuditParseError({"no JSON object in judge reply"});
    ojson doc = ojson::parse(strip_line_comments(raw.substr(first, last - first + 1)), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw AuditParseError({"judge reply is not valid JSON"});

    std::vector<std::string> errors;
    AuditReport report;
    std::map<std::string, MechanismAssessment> found;

    if (!doc.contains("mechanism_assessments") || !doc["mechanism_assessments"].is_array()) {
        errors.push_back("missing array 'mechanism_assessments'");
    } else {
        std::size_t idx = 0;
        for (const auto& a : doc["mechanism_assessments"]) {
            std::string where = "mechanism_assessments[" + std::to_string(idx++) + "]";
            if (!a.is_object() || !a.contains("mechanism_id") || !a["mechanism_id"].is_string()) {
                errors.push_back(where + ": missing mechanism_id");
                continue;
            }
            MechanismAssessment m;
            m.mechanism_id = a["mechanism_id"].get<std::string>();
            const Mechanism* tax = find_mechanism(m.mechanism_id);
            if (tax == nullptr) {
                errors.push_back("unknown mechanism '" + m.mechanism_id + "'");
                continue;
            }
            if (found.contains(m.mechanism_id)) {
                errors.push_back("duplicate mechanism '" + m.mechanism_id + "'");
                continue;
            }
            std::string who = "mechanism '" + m.mechanism_id + "'";
            if (a.contains("mechanism_category") && a["mechanism_category"].is_string()) {
                m.mechanism_category = a["mechanism_category"].get<std::string>();
                if (m.mechanism_category != tax->category)
                    errors.push_back(who + ": category '" + m.mechanism_category + "' should be '" + tax->category + "'");
            } else {
                errors.push_back(who + ": missing mechanism_category");
            }
            if (a.contains("label") && a["label"].is_string()) {
                m.label = a["label"].get<std::string>();
                if (std::find(tax->labels.begin(), tax->labels.end(), m.label) == tax->labels.end())
                    errors.push_back(who + ": label '" + m.label + "' is not allowed");
            } else {
                errors.push_back(who + ": missing label");
            }
            for (auto [key, dest] : {std::pair{"confidence", &m.confidence}, std::pair{"numeric_score", &m.numeric_score}}) {
                if (!a.contains(key) || !a[key].is_number()) {
                    errors.push_back(who + ": missing numeric " + key);
                    continue;
                }
                *dest = a[key].get<double>();
                if (!(*dest >= 0.0 && *dest <= 1.0))
                    errors.push_back(who + ": " + key + " " + a[key].dump() + " outside [0, 1]");
            }
            if (a.contains("evidence_sentences") && a["evidence_sentences"].is_array()) {
                for (const auto& e : a["evidence_sentences"]) {
                    if (!e.is_string()) {
                        errors.push_back(who + ": evidence_sentences must be strings");
                        break;
                    }
                    m.evidence_sentences.push_back(e.get<std::string>());
                }
            } else {
                errors.push_back(who + ": missing evidence_sentences");
            }
            if (a.contains("notes")) {
                if (!a["notes"].is_string())
                    errors.push_back(who + ": notes must be a string");
                else
                    m.notes = a["notes"].get<std::string>();
                if (word_count(m.notes) > 25) errors.push_back(who + ": notes exceed 25 words");
            }
            if (audited_text)
                for (const auto& e : m.evidence_sentences)
                    if (audited_text->find(e) == std::string::npos)
                        report.warnings.push_back(who + ": evidence not found in audited text: \"" + e + "\"");
            found.emplace(m.mechanism_id, std::move(m));
        }
    }
    for (const auto& m : mechanism_taxonomy())
        if (!found.contains(m.id) && doc.contains("mechanism_assessments"))
            errors.push_back("missing mechanism '" + m.id + "'");

    if (doc.contains("behavioral_bias_summary") && doc["behavioral_bias_summary"].is_object()) {
        const auto& s = doc["behavioral_bias_summary"];
        auto& out = report.behavioral_bias_summary;
        if (s.contains("primary_biases_detected") && s["primary_biases_detected"].is_array()) {
            for (const auto& b : s["primary_biases_detected"]) {
                if (!b.is_string() || find_mechanism(b.get<std::string>()) == nullptr) {
                    errors.push_back("primary_biases_detected: unknown mechanism " + b.dump());
                    continue;
                }
                out.primary_biases_detected.push_back(b.get<std::string>());
            }
        } else {
            errors.push_back("behavioral_bias_summary: missing primary_biases_detected");
        }
        out.bubble_awareness = s.value("bubble_awareness", "");
        out.strategy_when_aware = s.value("strategy_when_aware", "");
    } else {
        errors.push_back("missing object 'behavioral_bias_summary'");
    }
    if (doc.contains("summary") && doc["summary"].is_string())
        report.summary = doc["summary"].get<std::string>();
    else
        errors.push_back("missing string 'summary'");

    if (!errors.empty()) throw AuditParseError(std::move(errors));
    for (const auto& m : mechanism_taxonomy()) report.assessments.push_back(found.at(m.id));
    return report;
}

std::string serialize_audit_report(const AuditReport& report) {
    ojson arr = ojson::array();
    for (const auto& a : report.assessments)
        arr.push_back({{"mechanism_id", a.mechanism_id},
                       {"mechanism_category", a.mechanism_category},
                       {"label", a.label},
                       {"confidence", a.confidence},
                       {"numeric_score", a.numeric_score},
                       {"evidence_sentences", a.evidence_sentences},
                       {"notes", a.notes}});
    const auto& s = report.behavioral_bias_summary;
    ojson doc = {{"mechanism_assessments", arr},
                 {"behavioral_bias_summary",
                  {{"primary_biases_detected", s.primary_biases_detected},
                   {"bubble_awareness", s.bubble_awareness},
                   {"strategy_when_aware", s.strategy_when_aware}}},
                 {"summary", report.summary}};
    return doc.dump(2);
}

// --- judges --------------------------------------------------------------------------------

namespace {

double hash_unit(const std::string& text, const std::string& salt) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
    for (unsigned char c : salt) h = (h ^ c) * 0x100000001b3ULL;
    return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

}  // namespace

MockJudge::MockJudge(double shift, ClauseCatalog catalog) : shift_(shift), catalog_(std::move(catalog)) {}

AuditReport MockJudge::assess(const std::string& text, const std::string& salt) const {
    AuditReport r;
    for (const auto& m : mechanism_taxonomy()) {
        MechanismAssessment a;
        a.mechanism_id = m.id;
        a.mechanism_category = m.category;
        double score = 0.3 + 0.2 * hash_unit(text, salt + "|" + m.id);
        auto it = catalog_.find(m.id);
        if (it != catalog_.end()) {
            if (!it->second.amplify.empty() && text.find(it->second.amplify) != std::string::npos) {
                score += shift_;
                a.evidence_sentences.push_back(it->second.amplify);
            }
            if (!it->second.suppress.empty() && text.find(it->second.suppress) != std::string::npos) {
                score -= shift_;
                a.evidence_sentences.push_back(it->second.suppress);
            }
        }
        a.numeric_score = std::clamp(score, 0.0, 1.0);
        a.label = a.numeric_score >= 0.5 ? m.labels.front() : m.labels.back();
        a.confidence = 0.7;
        if (a.numeric_score >= 0.5) r.behavioral_bias_summary.primary_biases_detected.push_back(m.id);
        r.assessments.push_back(std::move(a));
    }
    r.behavioral_bias_summary.bubble_awareness = "no";
    r.behavioral_bias_summary.strategy_when_aware = "none";
    r.summary = "Deterministic offline assessment.";
    return r;
}

std::string MockJudge::evaluate(const AuditContext& ctx, const std::string&) {
    const std::string salt = std::to_string(ctx.sim) + "|" + ctx.agent_id + "|" + std::to_string(ctx.round);
    return serialize_audit_report(assess(ctx.plan_text + "\n" + ctx.insights_text, salt));
}

TransportJudge::TransportJudge(std::shared_ptr<Transport> transport, std::string model, double temperature)
    : transport_(std::move(transport)), model_(std::move(model)), temperature_(temperature) {}

std::string TransportJudge::evaluate(const AuditContext&, const std::string& prompt) {
    return transport_->complete({model_, {{"user", prompt}}, temperature_}).text;
}

// --- running audits -----------------------------------------------------------------------

AuditRun run_audit(std::span<const AuditInputRow> rows, Judge& judge, const AuditOptions& options) {
    struct Slot {
        std::vector<AuditScoreRecord> scores;
        std::vector<std::string> warnings;
        bool failed = false;
    };
    const std::size_t jobs = rows.size() * 2;
    std::vector<Slot> slots(jobs);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> transport_failed{false};
    std::string transport_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!transport_failed) {
            std::size_t j = next++;
            if (j >= jobs) return;
            const auto& row = rows[j / 2];
            TextSource source = j % 2 == 0 ? TextSource::Plans : TextSource::Insights;
            AuditContext ctx{row.agent, row.period, options.market_type, row.price, 14.0, row.recent_returns,
                             source == TextSource::Plans ? row.plans : "",
                             source == TextSource::Insights ? row.insights : ""};
            ctx.sim = row.sim;
            const std::string& audited = source == TextSource::Plans ? row.plans : row.insights;
            Slot& slot = slots[j];
            try {
                auto reply = judge.evaluate(ctx, build_audit_prompt(ctx));
                auto report = parse_audit_response(reply, options.verify_evidence ? std::optional(audited)
                                                                                   : std::nullopt);
                for (const auto& a : report.assessments)
                    slot.scores.push_back({row.sim, row.agent, row.period, source, a.mechanism_id, a.label,
                                           a.confidence, a.numeric_score});
                slot.warnings = std::move(report.warnings);
            } catch (const AuditParseError& e) {
                slot.failed = true;
                slot.warnings.push_back(row.agent + "/" + std::to_string(row.period) + "/" + to_string(source) + ": " +
                                        e.what());
            } catch (const TransportError& e) {
                std::lock_guard lock(error_mutex);
                transport_failed = true;
                transport_error = e.what();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(options.parallelism, static_cast<int>(std::max<std::size_t>(jobs, 1))));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (transport_failed) throw TransportExhausted("judge transport failed: " + transport_error);

    AuditRun run;
    for (auto& s : slots) {
        run.scores.insert(run.scores.end(), s.scores.begin(), s.scores.end());
        run.warnings.insert(run.warnings.end(), s.warnings.begin(), s.warnings.end());
        run.failures += s.failed ? 1 : 0;
    }
    return run;
}

void write_audit_scores(const std::filesystem::path& path, std::span<const AuditScoreRecord> scores) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << jsonl_header("audit_scores") << '\n';
    for (const auto& s : scores)
        out << ojson{{"sim", s.sim},
                     {"agent", s.agent},
                     {"period", s.period},
                     {"source", to_string(s.source)},
                     {"mechanism_id", s.mechanism_id},
                     {"label", s.label},
                     {"confidence", s.confidence},
                     {"numeric_score", s.numeric_score}}
                   .dump()
            << '\n';
}

std::vector<AuditScoreRecord> read_audit_scores(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PanelFormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw PanelFormatError(path.string() + ": empty file");
    check_jsonl_header(line, "audit_scores", path.string());
    std::vector<AuditScoreRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto j = ojson::parse(line);
            AuditScoreRecord s;
            s.sim = j.at("sim").get<int>();
            s.agent = j.at("agent").get<std::string>();
            s.period = j.at("period").get<int>();
            auto src = j.at("source").get<std::string>();
            if (src != "plans" && src != "insights") throw PanelFormatError("bad source '" + src + "'");
            s.source = src == "plans" ? TextSource::Plans : TextSource::Insights;
            s.mechanism_id = j.at("mechanism_id").get<std::string>();
            s.label = j.at("label").get<std::string>();
            s.confidence = j.at("confidence").get<double>();
            s.numeric_score = j.at("numeric_score").get<double>();
            out.push_back(std::move(s));
        } catch (const ojson::exception& e) {
            throw PanelFormatError(path.string() + ": " + e.what());
        }
    }
    return out;
}

// --- shock comparison -------------------------------------------------------------------

namespace {

std::optional<ArmContrast> contrast(const std::vector<const ArmObservation*>& obs, const std::string& treated,
                                    const std::string& control) {
    std::vector<double> value, flag;
    std::vector<std::string> round, slot, investor;
    for (const auto* o : obs) {
        if (o->arm != treated && o->arm != control) continue;
        value.push_back(o->value);
        flag.push_back(o->arm == treated ? 1.0 : 0.0);
        round.push_back(std::to_string(o->period));
        slot.push_back(o->agent);
        investor.push_back(o->arm + "|" + std::to_string(o->sim) + "|" + o->agent);
    }
    if (std::find(flag.begin(), flag.end(), 1.0) == flag.end() || std::find(flag.begin(), flag.end(), 0.0) == flag.end())
        return std::nullopt;
    DataTable t;
    t.add_numeric("value", std::move(value));
    t.add_numeric("treated", std::move(flag));
    t.add_category("round", std::move(round));
    t.add_category("slot", std::move(slot));
    t.add_category("investor", std::move(investor));
    try {
        auto d = group_mean_difference(t, "value", "treated", {"round", "slot"}, std::string("investor"));
        return ArmContrast{d.difference, d.t_stat, d.n};
    } catch (const EstimationError&) {
        return std::nullopt;
    }
}

}  // namespace

std::vector<ShockComparisonRow> shock_comparison(std::span<const ArmObservation> observations, const ShockArms& arms) {
    std::map<std::string, std::vector<const ArmObservation*>> by_feature;
    std::vector<std::string> order;
    for (const auto& o : observations) {
        auto [it, inserted] = by_feature.try_emplace(o.feature);
        if (inserted) order.push_back(o.feature);
        it->second.push_back(&o);
    }
    std::vector<ShockComparisonRow> out;
    for (const auto& feature : order) {
        const auto& obs = by_feature[feature];
        ShockComparisonRow row;
        row.feature = feature;
        std::map<std::string, std::pair<double, std::size_t>> sums;
        for (const auto* o : obs) {
            sums[o->arm].first += o->value;
            sums[o->arm].second += 1;
        }
        for (const auto& [arm, s] : sums) row.arm_means[arm] = s.first / static_cast<double>(s.second);
        row.amp_vs_bench = contrast(obs, arms.amplify, arms.benchmark);
        row.sup_vs_bench = contrast(obs, arms.suppress, arms.benchmark);
        row.amp_vs_sup = contrast(obs, arms.amplify, arms.suppress);
        row.bench_vs_bench = contrast(obs, arms.benchmark_b, arms.benchmark);
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace bubblelab
