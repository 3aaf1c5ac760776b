#include "bubblelab/study.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "bubblelab/agents.hpp"
#include "bubblelab/errors.hpp"
#include "bubblelab/session.hpp"

namespace bubblelab {

std::vector<AuditInputRow> audit_inputs(const SimulationPanel& panel) {
    std::map<int, int> prices;
    for (const auto& r : panel.rounds)
        if (!r.practice) prices[r.period] = r.price;
    std::map<std::pair<std::string, int>, int> seen;
    for (const auto& ar : panel.agent_rounds)
        if (!ar.practice) seen[{ar.agent, ar.period}] = ar.prior_price;

    std::vector<AuditInputRow> rows;
    for (const auto& r : panel.reasoning) {
        if (r.practice || r.forfeited) continue;
        AuditInputRow row;
        row.sim = r.sim;
        row.agent = r.agent;
        row.period = r.period;
        auto it = seen.find({r.agent, r.period});
        row.price = it != seen.end() ? it->second : 0;
        for (int k = 1; k <= 4; ++k) {
            auto from = prices.find(r.period - 1 - k);
            auto to = prices.find(r.period - k);
            if (from == prices.end() || to == prices.end()) break;
            row.recent_returns.push_back(period_return(from->second, to->second));
        }
        row.plans = r.plans;
        row.insights = r.insights;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ArmObservation> arm_observations(const std::string& arm, std::span<const AuditScoreRecord> scores) {
    std::vector<ArmObservation> out;
    out.reserve(scores.size());
    for (const auto& s : scores)
        out.push_back({arm, s.mechanism_id + "/" + to_string(s.source), s.sim, s.agent, s.period, s.numeric_score});
    return out;
}

ShockStudyResult run_shock_study(const SessionConfig& base, Judge& judge, const ShockStudyOptions& options) {
    if (find_mechanism(options.mechanism) == nullptr)
        throw ConfigError("shock-study: unknown mechanism '" + options.mechanism + "'");
    base.validate();

    ShockArms names;
    struct ArmPlan {
        std::string name;
        std::optional<ShockSpec> shock;
        std::uint64_t seed;
    };
    std::vector<ArmPlan> plans{
        {names.benchmark, std::nullopt, base.seed},
        {names.amplify, make_shock(options.mechanism, ShockDirection::Amplify), base.seed},
        {names.suppress, make_shock(options.mechanism, ShockDirection::Suppress), base.seed},
    };
    if (options.placebo_arm) plans.push_back({names.benchmark_b, std::nullopt, base.seed + 7919});

    ShockStudyResult result;
    std::vector<ArmObservation> observations;
    for (const auto& plan : plans) {
        if (options.on_arm) options.on_arm(plan.name);
        SessionConfig cfg = base;
        cfg.shock = plan.shock;
        cfg.seed = plan.seed;
        cfg.output_dir = base.output_dir / plan.name;
        RunOptions run;
        run.write = options.write;
        run.force = options.force;

        ShockArmResult arm;
        arm.arm = plan.name;
        arm.panels = run_session(cfg, run);
        AuditOptions audit = options.audit;
        for (const auto& panel : arm.panels) {
            audit.market_type = panel.meta.market_type;
            auto rows = audit_inputs(panel);
            AuditRun out = run_audit(rows, judge, audit);
            arm.judge_failures += out.failures;
            arm.scores.insert(arm.scores.end(), out.scores.begin(), out.scores.end());
        }
        if (options.write) write_audit_scores(cfg.output_dir / "audit_scores.jsonl", arm.scores);
        auto obs = arm_observations(plan.name, arm.scores);
        observations.insert(observations.end(), obs.begin(), obs.end());
        result.arms.push_back(std::move(arm));
    }
    result.comparison = shock_comparison(observations, names);
    return result;
}

namespace {

std::string contrast_cell(const std::optional<ArmContrast>& c) {
    if (!c) return "";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << c->difference << " (" << std::setprecision(2) << c->t_stat << ")";
    return os.str();
}

}  // namespace

void print_shock_comparison(std::ostream& os, std::span<const ShockComparisonRow> rows) {
    os << std::left << std::setw(44) << "feature" << std::right << std::setw(20) << "amp-bench" << std::setw(20)
       << "sup-bench" << std::setw(20) << "amp-sup" << std::setw(20) << "bench_b-bench" << "\n";
    for (const auto& r : rows)
        os << std::left << std::setw(44) << r.feature << std::right << std::setw(20) << contrast_cell(r.amp_vs_bench)
           << std::setw(20) << contrast_cell(r.sup_vs_bench) << std::setw(20) << contrast_cell(r.amp_vs_sup)
           << std::setw(20) << contrast_cell(r.bench_vs_bench) << "\n";
}

void write_shock_comparison_csv(const std::filesystem::path& path, std::span<const ShockComparisonRow> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "feature,contrast,difference,t_stat,n\n" << std::setprecision(10);
    auto line = [&](const std::string& feature, const char* name, const std::optional<ArmContrast>& c) {
        if (c) out << feature << "," << name << "," << c->difference << "," << c->t_stat << "," << c->n << "\n";
    };
    for (const auto& r : rows) {
        line(r.feature, "amplify_vs_benchmark", r.amp_vs_bench);
        line(r.feature, "suppress_vs_benchmark", r.sup_vs_bench);
        line(r.feature, "amplify_vs_suppress", r.amp_vs_sup);
        line(r.feature, "benchmark_b_vs_benchmark", r.bench_vs_bench);
    }
}

}  // namespace bubblelab
