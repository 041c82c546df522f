#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "tmc/cli.hpp"
#include "tmc/text.hpp"

using namespace tmc;
using namespace tmc::testing;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "tmc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string fx(const std::string& name) { return (fixtures() / name).string(); }

std::vector<std::string> replay_aws(std::vector<std::string> args) {
    for (const auto& a : {"--backend", "replay", "--cassette"}) args.push_back(a);
    args.push_back(fx("aws.json"));
    return args;
}

}  // namespace

TEST_CASE("ingest, decompose, threat-model, and export share a store") {
    TempDir dir;
    auto store = dir.path().string();
    auto ingested = run({"ingest", fx("aws_cloud.png"), "--store", store});
    REQUIRE(ingested.code == 0);
    auto id = text::trim(ingested.out);
    CHECK(id.size() == 16);

    auto decomposed = run(replay_aws({"decompose", "--session", id, "--store", store}));
    REQUIRE(decomposed.code == 0);
    CHECK(json::parse(decomposed.out).at("in_scope_components").size() == 11);

    auto modeled = run(replay_aws({"threat-model", "--session", id, "--store", store}));
    REQUIRE(modeled.code == 0);
    auto m = matrix_from_json(modeled.out);
    CHECK(m.rows() == 30);
    CHECK(validate_matrix(m).empty());

    auto exported = run({"export", "--session", id, "--store", store, "--format", "json"});
    REQUIRE(exported.code == 0);
    CHECK(exported.out == modeled.out);
    auto csv = run({"export", "--session", id, "--store", store, "--format", "csv"});
    CHECK(parse_csv(csv.out).size() == 31);
}

TEST_CASE("one-shot runs write to --out and honour mapping choices") {
    TempDir dir;
    auto out = (dir / "m.md").string();
    auto r = run({"threat-model", "--input", fx("three_tier.txt"), "--backend", "replay", "--cassette",
                  fx("three_tier.cassette.json"), "--mappings", "CIA", "--format", "markdown", "--out", out});
    REQUIRE(r.code == 0);
    auto md = text::read_file_text(out);
    CHECK(md.find("| # | Threat scenario | CIA |") != std::string::npos);
    CHECK(md.find("STRIDE") == std::string::npos);

    auto replayed = run({"replay", "--input", fx("payments_sor.json"), "--cassette",
                         fx("payments_sor.cassette.json")});
    REQUIRE(replayed.code == 0);
    CHECK(matrix_from_json(replayed.out).rows() == 28);
}

TEST_CASE("record writes a cassette that replays to the same matrix") {
    TempDir dir;
    auto cassette = (dir / "c.json").string();
    auto recorded = run({"record", "--input", fx("three_tier.txt"), "--backend", "scripted", "--script",
                         fx("three_tier.script.json"), "--cassette", cassette});
    REQUIRE(recorded.code == 0);
    auto replayed = run({"replay", "--input", fx("three_tier.txt"), "--cassette", cassette});
    REQUIRE(replayed.code == 0);
    CHECK(replayed.out == recorded.out);
    CHECK(Cassette::load(cassette).records.size() == 4);
}

TEST_CASE("eval reports the fixture table") {
    auto r = run({"eval", "--matrix", fx("eval/matrices.json"), "--judgments", fx("eval/judgments.json"),
                  "--surveys", fx("eval/surveys.json"), "--format", "json"});
    REQUIRE(r.code == 0);
    auto report = json::parse(r.out);
    CHECK(report["false_positive_crosstab"]["grand_total"] == 246);
    CHECK(report["false_positive_crosstab"]["row_totals"]["Yes"] == 85);
    auto text = run({"eval", "--matrix", fx("eval/matrices.json"), "--judgments", fx("eval/judgments.json")});
    REQUIRE(text.code == 0);
    CHECK(text.out.find("S_1") != std::string::npos);
}

TEST_CASE("exit codes separate usage errors from domain errors") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"threat-model", "--min-scenarios", "many"}).code == 2);
    CHECK(run({"decompose"}).code == 2);  // neither --session nor --input
    CHECK(run({"export", "--session", "x", "--format", "xml"}).code == 2);

    auto missing = run({"ingest", "/no/such/file.png"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("error[NotFound]") != std::string::npos);

    TempDir dir;
    auto nosession = run({"export", "--session", "0123456789abcdef", "--store", dir.path().string()});
    CHECK(nosession.code == 1);

    auto text_only = run(replay_aws({"decompose", "--input", fx("aws_cloud.png"), "--text-only"}));
    CHECK(text_only.code == 1);
    CHECK(text_only.err.find("CapabilityError") != std::string::npos);

    auto bad_role = run({"threat-model", "--input", fx("three_tier.txt"), "--backend", "replay", "--cassette",
                         fx("three_tier.cassette.json"), "--role", "red_team"});
    CHECK(bad_role.code == 1);
    CHECK(bad_role.err.find("UnknownRole") != std::string::npos);
}

TEST_CASE("the installed binary behaves like the library entry point") {
    auto r = run_command(quote(cli_path()) + " replay --input " + quote(fixtures() / "three_tier.txt") +
                         " --cassette " + quote(fixtures() / "three_tier.cassette.json") + " --format csv 2>/dev/null");
    CHECK(r.exit_code == 0);
    CHECK(parse_csv(r.output).size() == 27);
    CHECK(run_command(quote(cli_path()) + " --bogus 2>/dev/null").exit_code == 2);
}
