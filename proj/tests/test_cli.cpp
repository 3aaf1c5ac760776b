#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kSource = BUBBLELAB_SOURCE_DIR;

int run_cli(const std::string& args) {
    std::string cmd = std::string("\"") + BUBBLELAB_CLI + "\" " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("bubblelab_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("validate-config exit codes") {
    auto dir = scratch("validate");
    CHECK(run_cli("validate-config --config " + (kSource / "configs/scripted_bubble.yaml").string()) == 0);

    std::ofstream(dir / "bad.yaml") << "market: {type: scripted}\nagents: [{kind: oracle}]\n";
    CHECK(run_cli("validate-config --config " + (dir / "bad.yaml").string()) == 2);
    std::ofstream(dir / "typo.yaml") << "market: {type: scripted}\nagnets: []\n";
    CHECK(run_cli("validate-config --config " + (dir / "typo.yaml").string()) == 2);
    CHECK(run_cli("validate-config --config " + (dir / "missing.yaml").string()) == 2);
    CHECK(run_cli("validate-config --bogus") == 2);
    CHECK(run_cli("--help") == 0);
    fs::remove_all(dir);
}

TEST_CASE("run, analyze and audit from the command line") {
    auto dir = scratch("smoke");
    const auto out = dir / "session";
    CHECK(run_cli("run --config " + (kSource / "configs/scripted_fundamental.yaml").string() + " --sims 1 --out " +
                  out.string()) == 0);
    CHECK(fs::exists(out / "sim_000" / "rounds.jsonl"));
    // An occupied output directory is refused without --force.
    CHECK(run_cli("run --config " + (kSource / "configs/scripted_fundamental.yaml").string() + " --sims 1 --out " +
                  out.string()) == 2);

    CHECK(run_cli("analyze --analysis bubble_metrics --in " + out.string() + " --out " +
                  (dir / "metrics.csv").string()) == 0);
    CHECK(fs::file_size(dir / "metrics.csv") > 0);
    CHECK(run_cli("analyze --analysis no_such_analysis --in " + out.string()) == 2);
    CHECK(run_cli("analyze --analysis bubble_metrics --in " + (dir / "empty").string()) == 2);

    CHECK(run_cli("audit --in " + out.string() + " --judge mock") == 0);
    CHECK(fs::exists(out / "audit_scores.jsonl"));

    CHECK(run_cli("plot --in " + out.string() + " --svg " + (dir / "p.svg").string()) == 0);
    CHECK(fs::exists(dir / "p.svg"));
    fs::remove_all(dir);
}

TEST_CASE("exhausted judge transport maps to its own exit code") {
    auto dir = scratch("transport");
    const auto out = dir / "session";
    REQUIRE(run_cli("run --config " + (kSource / "configs/scripted_fundamental.yaml").string() + " --sims 1 --out " +
                    out.string()) == 0);
    ::setenv("BUBBLELAB_CLI_TEST_KEY", "k", 1);
    CHECK(run_cli("audit --in " + out.string() +
                  " --judge http --model m --api-key-env BUBBLELAB_CLI_TEST_KEY --endpoint http://127.0.0.1:9/v1") ==
          4);
    ::unsetenv("BUBBLELAB_CLI_TEST_KEY");
    // Missing key is a configuration problem.
    CHECK(run_cli("audit --in " + out.string() + " --judge http --model m --api-key-env BUBBLELAB_CLI_TEST_KEY") == 2);
    fs::remove_all(dir);
}

TEST_CASE("schema mismatch is reported as a configuration error") {
    auto dir = scratch("schema");
    const auto out = dir / "session";
    REQUIRE(run_cli("run --config " + (kSource / "configs/scripted_fundamental.yaml").string() + " --sims 1 --out " +
                    out.string()) == 0);
    const auto rounds = out / "sim_000" / "rounds.jsonl";
    std::ifstream in(rounds);
    std::string header, rest, line;
    std::getline(in, header);
    while (std::getline(in, line)) rest += line + "\n";
    in.close();
    std::ofstream(rounds, std::ios::trunc) << R"({"schema":"rounds","version":7})" << "\n" << rest;
    CHECK(run_cli("analyze --analysis bubble_metrics --in " + out.string()) == 2);
    fs::remove_all(dir);
}
