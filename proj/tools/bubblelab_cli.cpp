// bubblelab command line: run sessions, analyze panels, audit reasoning,
// run shock studies, plot price paths, validate configs.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 invariant violation, 4 transport exhaustion.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bubblelab/analytics.hpp"
#include "bubblelab/audit.hpp"
#include "bubblelab/config.hpp"
#include "bubblelab/errors.hpp"
#include "bubblelab/market.hpp"
#include "bubblelab/panel.hpp"
#include "bubblelab/plot.hpp"
#include "bubblelab/session.hpp"
#include "bubblelab/study.hpp"
#include "bubblelab/transport.hpp"

namespace fs = std::filesystem;
using namespace bubblelab;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitTransport = 4;

struct RunArgs {
    std::string config;
    int sims = 0;
    long long seed = -1;
    std::string out;
    std::string shock;
    bool force = false;
    int parallel = 0;
};

struct AnalyzeArgs {
    std::string analysis = "all";
    std::vector<std::string> in;
    std::string out;
    std::string unit = "shares";
    std::string scores;
    std::string lexicon;
    std::string group;
    bool log_returns = false;
    bool expectation_level = false;
    bool average_expectation_level = false;
    std::string plot;
};

struct JudgeArgs {
    std::string judge = "mock";
    double shift = 0.2;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    std::string clauses;
};

struct AuditArgs {
    std::string in;
    std::string out;
    int parallel = 4;
    JudgeArgs judge;
};

struct StudyArgs {
    std::string config;
    std::string mechanism;
    std::string out;
    int sims = 0;
    bool force = false;
    int parallel = 0;
    bool no_placebo = false;
    std::string csv;
    JudgeArgs judge;
};

struct PlotArgs {
    std::vector<std::string> in;
    std::string svg;
    std::string csv;
    std::string title = "Mean price across simulations";
};

void add_judge_options(CLI::App* cmd, JudgeArgs& a) {
    cmd->add_option("--judge", a.judge, "Judge backend: mock or http")->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--shift", a.shift, "Mock judge score shift for shock clauses");
    cmd->add_option("--endpoint", a.endpoint, "Chat-completions URL for the http judge");
    cmd->add_option("--model", a.model, "Judge model name (http judge)");
    cmd->add_option("--api-key-env", a.api_key_env, "Environment variable holding the judge API key");
    cmd->add_option("--clauses", a.clauses, "Shock clause catalog (YAML) used by the mock judge");
}

std::unique_ptr<Judge> make_judge(const JudgeArgs& a) {
    if (a.judge == "mock") {
        ClauseCatalog catalog = a.clauses.empty() ? default_clause_catalog() : load_clause_catalog(a.clauses);
        return std::make_unique<MockJudge>(a.shift, std::move(catalog));
    }
    if (a.model.empty()) throw ConfigError("--model is required with --judge http");
    const char* key = std::getenv(a.api_key_env.c_str());
    if (key == nullptr || *key == '\0') throw ConfigError("environment variable " + a.api_key_env + " is not set");
    auto transport = std::make_shared<HttpTransport>(a.endpoint, key, RetryPolicy{});
    return std::make_unique<TransportJudge>(transport, a.model, 0.0);
}

std::vector<SimulationPanel> load_all(const std::vector<std::string>& dirs) {
    std::vector<SimulationPanel> panels;
    for (const auto& d : dirs) {
        auto p = load_panels(d);
        panels.insert(panels.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    }
    if (panels.empty()) throw ConfigError("no simulation panels found");
    return panels;
}

double session_fundamental(const std::vector<SimulationPanel>& panels) {
    return fundamental_value(panels.front().meta.params).to_double();
}

void print_path(const std::vector<PricePathPoint>& path) {
    std::cout << "mean price path:";
    for (const auto& p : path) std::cout << " " << std::fixed << std::setprecision(2) << p.mean_price;
    std::cout << "\n";
}

int cmd_run(const RunArgs& a) {
    SessionConfig cfg = load_session_config(a.config);
    if (a.sims > 0) cfg.n_simulations = a.sims;
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (!a.shock.empty()) cfg.shock = parse_shock_argument(a.shock);
    if (a.parallel > 0) cfg.parallelism = a.parallel;

    RunOptions opts;
    opts.force = a.force;
    opts.on_simulation = [](const SimulationPanel& p) {
        const double fv = fundamental_value(p.meta.params).to_double();
        double sq = 0.0;
        int n = 0;
        for (const auto& r : p.rounds)
            if (!r.practice) {
                sq += (r.price - fv) * (r.price - fv);
                ++n;
            }
        std::cout << sim_dir_name(p.meta.sim) << ": MSE(FV) = " << std::fixed << std::setprecision(4)
                  << (n ? sq / n : 0.0) << "\n";
    };
    auto panels = run_session(cfg, opts);
    print_path(mean_price_path(panels));
    std::cout << "artifacts: " << cfg.output_dir.string() << "\n";
    return 0;
}

void emit_table(const AnalysisTable& t, const fs::path& out_csv) {
    print_table(std::cout, t);
    std::cout << "\n";
    if (!out_csv.empty()) write_table_csv(out_csv, t);
}

fs::path csv_for(const std::string& out, const std::string& id, bool many) {
    if (out.empty()) return {};
    if (!many) return out;
    fs::path dir(out);
    fs::create_directories(dir);
    return dir / (id + ".csv");
}

int cmd_analyze(const AnalyzeArgs& a) {
    if (a.analysis != "all" && !is_analysis_id(a.analysis))
        throw ConfigError("unknown analysis '" + a.analysis + "'");
    auto panels = load_all(a.in);
    AnalysisOptions opts;
    opts.convention = a.log_returns ? ReturnConvention::Log : ReturnConvention::Simple;
    opts.bid_offer_unit = a.unit == "orders" ? BidOfferUnit::Orders : BidOfferUnit::Shares;
    opts.expectation_level = a.expectation_level;
    opts.average_expectation_level = a.average_expectation_level;
    opts.group = a.group;
    Lexicon lexicon = a.lexicon.empty() ? default_lexicon() : load_lexicon(a.lexicon);

    const bool many = a.analysis == "all";
    std::vector<std::string> ids = many ? analysis_ids() : std::vector<std::string>{a.analysis};
    int failures = 0;
    for (const auto& id : ids) {
        try {
            if (id == "bubble_metrics") {
                auto rows = bubble_metrics(panels);
                print_bubble_metrics(std::cout, rows);
                std::cout << "\n";
                if (auto p = csv_for(a.out, id, many); !p.empty()) write_bubble_metrics_csv(p, rows);
            } else if (id == "bubble_episode_diffs") {
                if (a.scores.empty()) {
                    if (many) continue;
                    throw ConfigError("bubble_episode_diffs needs --scores <audit_scores.jsonl>");
                }
                auto scores = read_audit_scores(a.scores);
                auto rows = bubble_episode_diffs(panels, scores);
                print_episode_diffs(std::cout, rows);
                std::cout << "\n";
                if (auto p = csv_for(a.out, id, many); !p.empty()) write_episode_diffs_csv(p, rows);
            } else {
                AnalysisTable t;
                if (id == "disposition") t = disposition_analysis(panels, opts);
                else if (id == "expectation_formation") t = expectation_formation_analysis(panels, opts);
                else if (id == "expectation_trading") t = expectation_trading_analysis(panels, opts);
                else if (id == "bid_offer") t = bid_offer_analysis(panels, opts);
                else if (id == "disagreement_volume") t = disagreement_volume_analysis(panels, opts);
                else if (id == "stated_action_expectations") t = stated_action_expectations(panels, lexicon, opts);
                else if (id == "stated_action_trading") t = stated_action_trading(panels, lexicon, opts);
                emit_table(t, csv_for(a.out, id, many));
            }
        } catch (const EstimationError& e) {
            std::cerr << id << ": " << e.what() << "\n";
            ++failures;
        }
    }
    if (!a.plot.empty()) {
        auto path = mean_price_path(panels);
        PlotOptions po;
        po.fundamental = session_fundamental(panels);
        write_price_svg(a.plot, path, po);
        fs::path csv = a.plot;
        write_price_path_csv(csv.replace_extension(".csv"), path);
    }
    return failures == static_cast<int>(ids.size()) ? kExitOther : 0;
}

int cmd_audit(const AuditArgs& a) {
    auto panels = load_all({a.in});
    auto judge = make_judge(a.judge);
    AuditOptions opts;
    opts.parallelism = a.parallel;
    std::vector<AuditScoreRecord> scores;
    int failures = 0;
    for (const auto& p : panels) {
        opts.market_type = p.meta.market_type;
        auto rows = audit_inputs(p);
        AuditRun run = run_audit(rows, *judge, opts);
        for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
        failures += run.failures;
        scores.insert(scores.end(), run.scores.begin(), run.scores.end());
    }
    fs::path out = a.out.empty() ? fs::path(a.in) / "audit_scores.jsonl" : fs::path(a.out);
    write_audit_scores(out, scores);
    std::cout << "scored " << scores.size() << " mechanism assessments; " << failures
              << " judge replies rejected; wrote " << out.string() << "\n";
    return 0;
}

int cmd_study(const StudyArgs& a) {
    SessionConfig cfg = load_session_config(a.config);
    if (a.sims > 0) cfg.n_simulations = a.sims;
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (a.parallel > 0) cfg.parallelism = a.parallel;
    auto judge = make_judge(a.judge);
    ShockStudyOptions opts;
    opts.mechanism = a.mechanism;
    opts.placebo_arm = !a.no_placebo;
    opts.write = true;
    opts.force = a.force;
    opts.audit.parallelism = cfg.parallelism;
    opts.on_arm = [](const std::string& arm) { std::cout << "arm " << arm << "\n"; };
    auto result = run_shock_study(cfg, *judge, opts);
    print_shock_comparison(std::cout, result.comparison);
    fs::path csv = a.csv.empty() ? cfg.output_dir / "shock_comparison.csv" : fs::path(a.csv);
    write_shock_comparison_csv(csv, result.comparison);
    std::cout << "wrote " << csv.string() << "\n";
    return 0;
}

int cmd_plot(const PlotArgs& a) {
    auto panels = load_all(a.in);
    auto path = mean_price_path(panels);
    PlotOptions po;
    po.title = a.title;
    po.fundamental = session_fundamental(panels);
    fs::path svg = a.svg.empty() ? fs::path("price_path.svg") : fs::path(a.svg);
    fs::path csv = a.csv.empty() ? fs::path(svg).replace_extension(".csv") : fs::path(a.csv);
    write_price_svg(svg, path, po);
    write_price_path_csv(csv, path);
    print_path(path);
    std::cout << "wrote " << svg.string() << " and " << csv.string() << "\n";
    return 0;
}

int cmd_validate(const std::string& path) {
    SessionConfig cfg = load_session_config(path);
    cfg.validate();
    std::cout << path << ": ok (" << cfg.market_label() << ", " << cfg.n_agents() << " agents, "
              << cfg.n_simulations << " simulations)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agent-based experimental asset market simulator"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a session from a config file");
    run_cmd->add_option("--config", run.config, "Session config (YAML)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--sims", run.sims, "Override the number of simulations");
    run_cmd->add_option("--seed", run.seed, "Override the session seed");
    run_cmd->add_option("--out", run.out, "Override the output directory");
    run_cmd->add_option("--shock", run.shock, "Market-wide shock <mechanism>:<amplify|suppress>");
    run_cmd->add_flag("--force", run.force, "Replace existing sim_* directories");
    run_cmd->add_option("--parallel", run.parallel, "Cap on concurrent agent calls");

    AnalyzeArgs an;
    auto* an_cmd = app.add_subcommand("analyze", "Run analyses over persisted panels");
    an_cmd->add_option("--analysis", an.analysis, "Analysis id or 'all'");
    an_cmd->add_option("--in", an.in, "Session or simulation directories")->required();
    an_cmd->add_option("--out", an.out, "CSV file (one analysis) or directory (all)");
    an_cmd->add_option("--unit", an.unit, "Bid-offer unit")->check(CLI::IsMember({"shares", "orders"}));
    an_cmd->add_option("--scores", an.scores, "Audit scores for bubble_episode_diffs");
    an_cmd->add_option("--lexicon", an.lexicon, "Stated-action lexicon (YAML)");
    an_cmd->add_option("--group", an.group, "Restrict agent-level analyses to one agent group");
    an_cmd->add_flag("--log-returns", an.log_returns, "Use log returns instead of simple returns");
    an_cmd->add_flag("--expectation-level", an.expectation_level, "Forecast levels in expectation_formation");
    an_cmd->add_flag("--average-expectation-level", an.average_expectation_level,
                     "Average expectation as a price level in disposition");
    an_cmd->add_option("--plot", an.plot, "Also write the mean price path as SVG (plus CSV)");

    AuditArgs au;
    auto* au_cmd = app.add_subcommand("audit", "Score reasoning text against the mechanism taxonomy");
    au_cmd->add_option("--in", au.in, "Session or simulation directory")->required();
    au_cmd->add_option("--out", au.out, "Scores file (default <in>/audit_scores.jsonl)");
    au_cmd->add_option("--parallel", au.parallel, "Concurrent judge calls");
    add_judge_options(au_cmd, au.judge);

    StudyArgs st;
    auto* st_cmd = app.add_subcommand("shock-study", "Benchmark, amplify and suppress arms with a comparison table");
    st_cmd->add_option("--config", st.config, "Base session config (YAML)")->required()->check(CLI::ExistingFile);
    st_cmd->add_option("--mechanism", st.mechanism, "Targeted mechanism id")->required();
    st_cmd->add_option("--out", st.out, "Output root; one subdirectory per arm");
    st_cmd->add_option("--sims", st.sims, "Override the number of simulations per arm");
    st_cmd->add_flag("--force", st.force, "Replace existing arm directories");
    st_cmd->add_option("--parallel", st.parallel, "Cap on concurrent agent and judge calls");
    st_cmd->add_flag("--no-placebo", st.no_placebo, "Skip the second benchmark arm");
    st_cmd->add_option("--csv", st.csv, "Comparison CSV (default <out>/shock_comparison.csv)");
    add_judge_options(st_cmd, st.judge);

    PlotArgs pl;
    auto* pl_cmd = app.add_subcommand("plot", "Mean price path with 95% band, volume bars and FV line");
    pl_cmd->add_option("--in", pl.in, "Session or simulation directories")->required();
    pl_cmd->add_option("--svg", pl.svg, "SVG output (default price_path.svg)");
    pl_cmd->add_option("--csv", pl.csv, "CSV output (default next to the SVG)");
    pl_cmd->add_option("--title", pl.title, "Plot title");

    std::string validate_path;
    auto* va_cmd = app.add_subcommand("validate-config", "Parse and validate a session config");
    va_cmd->add_option("--config", validate_path, "Session config (YAML)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*an_cmd) return cmd_analyze(an);
        if (*au_cmd) return cmd_audit(au);
        if (*st_cmd) return cmd_study(st);
        if (*pl_cmd) return cmd_plot(pl);
        if (*va_cmd) return cmd_validate(validate_path);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SchemaVersionError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PanelFormatError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const TransportExhausted& e) {
        std::cerr << "transport exhausted: " << e.what() << "\n";
        return kExitTransport;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitOther;
}
