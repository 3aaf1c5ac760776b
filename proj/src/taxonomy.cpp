#include "bubblelab/taxonomy.hpp"

#include <array>

namespace bubblelab {

namespace {

const std::vector<Mechanism>& taxonomy_table() {
    static const std::vector<Mechanism> table = {
        {"rational_speculative_bubble", "rational_bubble_theories", "Rational Speculative Bubble",
         {"aware_of_resale_logic", "ignores_resale_logic", "unclear"},
         "1.0=explicit resale expectations, 0.5=hinted, 0=none",
         "Agent expects to resell asset at higher price to future buyers (greater fool theory)."},
        {"synchronization_risk", "rational_bubble_theories", "Synchronization Risk",
         {"synchronization_risk_acknowledged", "rides_bubble", "no_coordination_reference"},
         "1.0=explicit timing concerns, 0.5=implied, 0=none",
         "Agent delays action due to coordination problem—uncertain when others will exit."},
        {"asymmetric_information", "rational_bubble_theories", "Asymmetric Information",
         {"claims_private_info", "acknowledges_info_disadvantage", "no_info_asymmetry_mention"},
         "1.0=claims advantage, 0.5=acknowledges disadvantage, 0=none",
         "Agent believes they possess superior information relative to other market participants."},
        {"extrapolation_vs_anchor", "extrapolation_expectations", "Extrapolation vs Anchor",
         {"pure_extrapolation", "recognizes_overvaluation", "fundamental_anchor", "unobserved"},
         "1.0=fundamental anchor, 0.5=recognizes overvaluation, 0=pure extrapolation",
         "Agent forecasts by extrapolating past trends vs. anchoring to fundamental value."},
        {"diagnostic_expectations", "extrapolation_expectations", "Diagnostic Expectations",
         {"overweights_recent_signals", "balanced_weighting", "underweights_recent", "unobserved"},
         "1.0=heavy overweighting, 0.5=moderate, 0=balanced",
         "Agent overweights recent salient signals, exhibiting overreaction."},
        {"wavering_behavior", "extrapolation_expectations", "Wavering Behavior",
         {"flip_flopping", "consistent_bullish", "consistent_bearish", "value_focused", "unobserved"},
         "1.0=switches between growth/value, 0.5=shows tension, 0=consistent",
         "Agent alternates between growth/momentum signals (greed) and value signals (fear)."},
        {"disposition_effect", "trading_biases", "Disposition Effect",
         {"holds_losers_sells_winners", "profit_locking_tendency", "loss_averse_holding", "rational_profit_taking",
          "no_evidence"},
         "1.0=clear disposition pattern, 0.5=profit-locking, 0=rational",
         "Tendency to sell winners too early and hold losers too long."},
        {"momentum_vs_newswatcher", "trading_biases", "Momentum vs Newswatcher",
         {"momentum", "newswatcher", "hybrid", "unobserved"}, "1.0=momentum, 0.5=hybrid, 0=newswatcher",
         "Agent follows price trends (momentum) vs. monitors fundamental news (newswatcher)."},
        {"feedback_trading", "trading_biases", "Feedback Trading",
         {"pure_trend_following", "contrarian", "fundamental_based", "unobserved"},
         "1.0=pure trend without fundamentals, 0.5=partial, 0=fundamental-based",
         "Trading based purely on past price changes without fundamental justification."},
        {"overconfidence", "confidence_attribution", "Overconfidence",
         {"overconfident", "well_calibrated", "underconfident", "unobserved"},
         "1.0=excessive certainty, 0.5=moderate, 0=well-calibrated",
         "Excessive certainty about one's own judgments, predictions, or trading abilities."},
        {"self_attribution_bias", "confidence_attribution", "Self Attribution Bias",
         {"attributes_wins_to_skill", "balanced_attribution", "attributes_losses_externally", "unobserved"},
         "1.0=asymmetric attribution, 0.5=partial, 0=balanced",
         "Agent attributes successes to own skill but blames failures on external factors."},
        {"herding_contagion", "social_herding", "Herding Contagion",
         {"explicit_herding", "fear_missing_out", "contrarian", "independent", "unobserved"},
         "1.0=explicit herding or FOMO, 0.5=implicit, 0=independent",
         "Agent follows crowd behavior or exhibits fear of missing out (FOMO)."},
        {"disagreement_heterogeneous_beliefs", "social_herding", "Disagreement Heterogeneous Beliefs",
         {"acknowledges_disagreement", "assumes_consensus", "unobserved"},
         "1.0=recognizes disagreement, 0.5=implicit, 0=assumes consensus",
         "Agent recognizes that market participants hold different views about fundamental value."},
        {"representativeness_heuristic", "heuristics", "Representativeness Heuristic",
         {"pattern_matching_past_bubbles", "historical_analogy", "no_historical_reference", "unobserved"},
         "1.0=explicit past bubble match, 0.5=general analogy, 0=none",
         "Agent matches current situation to past patterns or bubbles."},
        {"new_era_thinking", "heuristics", "New Era Thinking",
         {"this_time_different", "paradigm_shift_claim", "acknowledges_similarity", "unobserved"},
         "1.0=claims new paradigm, 0.5=hints uniqueness, 0=acknowledges patterns",
         "Agent believes \"this time is different\"—current situation is structurally unique."},
        {"availability_bias", "heuristics", "Availability Bias",
         {"overweights_salient_events", "balanced_memory", "unobserved"},
         "1.0=focuses on salient events, 0.5=partial, 0=balanced",
         "Agent overweights easily recalled vivid events while ignoring base rates."},
        {"limited_arbitrage_awareness", "risk_perception", "Limited Arbitrage Awareness",
         {"acknowledges_arbitrage_limits", "assumes_unlimited_arbitrage", "unobserved"},
         "1.0=explicit limits mention, 0.5=implicit, 0=assumes no limits",
         "Agent recognizes that arbitrage has limits (fundamental risk, capital constraints)."},
        {"loss_aversion", "risk_perception", "Loss Aversion", {"loss_averse", "risk_neutral", "risk_seeking", "unobserved"},
         "1.0=clear asymmetric sensitivity, 0.5=moderate, 0=symmetric",
         "Agent shows asymmetric sensitivity to losses vs gains (losses loom larger)."},
        {"narrative_tone", "narrative_sentiment", "Narrative Tone", {"amplifying", "cautionary", "neutral"},
         "0-1 scaled by emotive language intensity",
         "Agent interprets and propagates narrative tone—amplifying (exuberant) vs cautionary (fearful) vs "
         "neutral."},
        {"statistical_testing", "narrative_sentiment", "Statistical Testing",
         {"formal_test", "heuristic_threshold", "no_test"}, "1.0=formal test, 0.5=heuristic, 0=none",
         "Agent references formal tests or heuristic thresholds for bubble detection."},
    };
    return table;
}

}  // namespace

std::span<const Mechanism> mechanism_taxonomy() { return taxonomy_table(); }

const Mechanism* find_mechanism(std::string_view id) {
    for (const auto& m : taxonomy_table())
        if (m.id == id) return &m;
    return nullptr;
}

std::span<const std::string> mechanism_categories() {
    static const std::array<std::string, 8> categories = {
        "rational_bubble_theories", "extrapolation_expectations", "trading_biases", "confidence_attribution",
        "social_herding",           "heuristics",                 "risk_perception", "narrative_sentiment"};
    return categories;
}

const char* to_string(ShockDirection d) { return d == ShockDirection::Amplify ? "amplify" : "suppress"; }

std::optional<ShockDirection> parse_shock_direction(std::string_view text) {
    if (text == "amplify" || text == "Amplify") return ShockDirection::Amplify;
    if (text == "suppress" || text == "Suppress") return ShockDirection::Suppress;
    return std::nullopt;
}

}  // namespace bubblelab
