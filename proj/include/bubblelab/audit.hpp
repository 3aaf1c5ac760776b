#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubblelab/econometrics.hpp"
#include "bubblelab/taxonomy.hpp"
#include "bubblelab/transport.hpp"

namespace bubblelab {

// --- stated action -----------------------------------------------------------------

struct Lexicon {
    std::vector<std::string> buy;
    std::vector<std::string> sell;

    bool operator==(const Lexicon&) const = default;
};

Lexicon default_lexicon();
// YAML with `buy:` and `sell:` lists.
Lexicon load_lexicon(const std::filesystem::path& path);

// Light suffix stripping so "buying", "buys" and "bought"-free variants of a
// keyword collapse onto one stem.
std::string stem(std::string word);
// Lower-cased, stemmed word tokens.
std::vector<std::string> tokenize(const std::string& text);

enum class TextSource { Plans, Insights };
const char* to_string(TextSource s);

struct StatedAction {
    TextSource source = TextSource::Plans;
    int value = 0;  // sign(buy hits - sell hits)
};

int stated_action(const std::string& text, const Lexicon& lexicon);
StatedAction extract_stated_action(const std::string& text, const Lexicon& lexicon, TextSource source);

// --- shock clauses -----------------------------------------------------------------

struct ClausePair {
    std::string amplify;
    std::string suppress;
};

using ClauseCatalog = std::map<std::string, ClausePair>;

const ClauseCatalog& default_clause_catalog();
// YAML: mechanism_id -> {amplify: ..., suppress: ...}. Every taxonomy id
// must be present exactly once.
ClauseCatalog load_clause_catalog(const std::filesystem::path& path);

// Throws ConfigError for an id outside the taxonomy.
ShockSpec make_shock(const std::string& mechanism_id, ShockDirection direction,
                     const ClauseCatalog& catalog = default_clause_catalog());

// --- judge prompt ---------------------------------------------------------------------

struct AuditContext {
    std::string agent_id;
    int round = 0;
    std::string market_type;
    int price = 0;
    double fundamental = 14.0;
    std::vector<double> recent_returns;  // most recent first
    std::string plan_text;
    std::string insights_text;
    int sim = 0;  // not rendered; lets offline judges key on the observation
};

// "P=16 vs FV=14"
std::string render_price_info(int price, double fundamental);
// "[+6.7%, -2.0%, +0.0%]", most recent first
std::string render_recent_returns(std::span<const double> returns);
std::string build_audit_prompt(const AuditContext& ctx);

struct MechanismAssessment {
    std::string mechanism_id;
    std::string mechanism_category;
    std::string label;
    double confidence = 0.0;
    double numeric_score = 0.0;
    std::vector<std::string> evidence_sentences;
    std::string notes;

    bool operator==(const MechanismAssessment&) const = default;
};

struct BiasSummary {
    std::vector<std::string> primary_biases_detected;
    std::string bubble_awareness;
    std::string strategy_when_aware;

    bool operator==(const BiasSummary&) const = default;
};

struct AuditReport {
    std::vector<MechanismAssessment> assessments;  // taxonomy order
    BiasSummary behavioral_bias_summary;
    std::string summary;
    std::vector<std::string> warnings;  // e.g. evidence not found in the audited text

    const MechanismAssessment* find(const std::string& mechanism_id) const;
};

class AuditParseError : public std::runtime_error {
public:
    explicit AuditParseError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

// Strict parse. When `audited_text` is given, evidence sentences missing
// from it produce warnings (not errors).
AuditReport parse_audit_response(const std::string& raw, const std::optional<std::string>& audited_text = {});
std::string serialize_audit_report(const AuditReport& report);

// --- judges ----------------------------------------------------------------------------

class Judge {
public:
    virtual ~Judge() = default;
    virtual std::string evaluate(const AuditContext& ctx, const std::string& prompt) = 0;
};

// Offline judge. The base score of each mechanism is a deterministic hash of
// the text and the observation (sim, agent, round) into [0.3, 0.5), so
// repeated template text does not yield repeated scores. A catalog amplify
// clause present in the text adds `shift` to that mechanism, a suppress
// clause subtracts it.
class MockJudge final : public Judge {
public:
    explicit MockJudge(double shift = 0.2, ClauseCatalog catalog = default_clause_catalog());
    std::string evaluate(const AuditContext& ctx, const std::string& prompt) override;
    AuditReport assess(const std::string& text, const std::string& salt = "") const;

private:
    double shift_;
    ClauseCatalog catalog_;
};

class TransportJudge final : public Judge {
public:
    TransportJudge(std::shared_ptr<Transport> transport, std::string model, double temperature = 0.0);
    std::string evaluate(const AuditContext& ctx, const std::string& prompt) override;

private:
    std::shared_ptr<Transport> transport_;
    std::string model_;
    double temperature_;
};

// --- audit scores ---------------------------------------------------------------------

struct AuditScoreRecord {
    int sim = 0;
    std::string agent;
    int period = 0;
    TextSource source = TextSource::Plans;
    std::string mechanism_id;
    std::string label;
    double confidence = 0.0;
    double numeric_score = 0.0;

    bool operator==(const AuditScoreRecord&) const = default;
};

struct AuditOptions {
    int parallelism = 4;
    bool verify_evidence = true;
    std::string market_type;
};

struct AuditInputRow {
    int sim = 0;
    std::string agent;
    int period = 0;
    int price = 0;  // price the agent saw when writing the text
    std::vector<double> recent_returns;
    std::string plans;
    std::string insights;
};

struct AuditRun {
    std::vector<AuditScoreRecord> scores;
    std::vector<std::string> warnings;
    int failures = 0;  // judge replies that failed to parse
};

// One judge call per (row, source); the other source's text is left empty.
// Throws TransportExhausted when the judge endpoint fails.
AuditRun run_audit(std::span<const AuditInputRow> rows, Judge& judge, const AuditOptions& options);

void write_audit_scores(const std::filesystem::path& path, std::span<const AuditScoreRecord> scores);
std::vector<AuditScoreRecord> read_audit_scores(const std::filesystem::path& path);

// --- shock comparison -----------------------------------------------------------------

// One observation of some feature in one experimental arm.
struct ArmObservation {
    std::string arm;
    std::string feature;
    int sim = 0;
    std::string agent;
    int period = 0;
    double value = 0.0;
};

struct ArmContrast {
    double difference = 0.0;
    double t_stat = 0.0;
    std::size_t n = 0;
};

struct ShockComparisonRow {
    std::string feature;
    std::map<std::string, double> arm_means;
    std::optional<ArmContrast> amp_vs_bench;
    std::optional<ArmContrast> sup_vs_bench;
    std::optional<ArmContrast> amp_vs_sup;
    std::optional<ArmContrast> bench_vs_bench;  // needs a second benchmark arm
};

struct ShockArms {
    std::string amplify = "amplify";
    std::string suppress = "suppress";
    std::string benchmark = "benchmark";
    std::string benchmark_b = "benchmark_b";
};

// Pairwise arm contrasts per feature: value on an arm dummy with round and
// agent-slot fixed effects, clustered by investor (arm, sim, agent).
std::vector<ShockComparisonRow> shock_comparison(std::span<const ArmObservation> observations,
                                                 const ShockArms& arms = {});

}  // namespace bubblelab
