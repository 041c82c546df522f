#include <doctest.h>

#include "support.hpp"
#include "tmc/prompt.hpp"
#include "tmc/stage1.hpp"

using namespace tmc;
using namespace tmc::testing;

namespace {

// Minimal library: every required key present, bodies echo their bindings.
std::string minimal_library_text(const std::string& extra = "") {
    std::string out = "version = \"t1\"\n\n[roles.baseline_threat_modeler]\n"
                      "display_name = \"Baseline\"\nprompt_key = \"P_cyber.baseline\"\n";
    for (const auto& key : required_template_keys()) {
        out += "\n[templates.\"" + key + "\"]\nbody = \"\"\"\n" + key + ": {{accumulated}}\n\"\"\"\n";
    }
    return out + extra;
}

}  // namespace

TEST_CASE("placeholders are found by name pattern") {
    auto names = find_placeholders("a {{x}} b {{chain.out_1}} {{ not one }} {{x}} {{9bad}}");
    CHECK(names == std::set<std::string>{"x", "chain.out_1"});
}

TEST_CASE("rendering is verbatim and does not rescan bound text") {
    PromptTemplate t("k", "A={{a}}; B={{b}}");
    CHECK(render_template(t, {{"a", "{{b}}"}, {"b", "two"}}) == "A={{b}}; B=two");
    CHECK(render_template(t, {{"a", "1"}, {"b", "2"}, {"unused", "x"}}) == "A=1; B=2");
    CHECK(error_code_of([&] { render_template(t, {{"a", "1"}}); }) == "UnboundPlaceholder");
    CHECK(error_code_of([&] { render_template(t, {{"a", "1"}, {"b", ""}}); }) == "EmptyBinding");
}

TEST_CASE("output contracts parse") {
    CHECK(OutputContract::parse("free_text")->kind == OutputContract::Kind::FreeText);
    CHECK(OutputContract::parse("item_list")->structured_schema() == StructuredSchema::ItemList);
    auto s = OutputContract::parse("structured:ThreatScenarioList");
    REQUIRE(s);
    CHECK(s->structured_schema() == StructuredSchema::ThreatScenarioList);
    CHECK_FALSE(OutputContract::parse("structured:Nope"));
    CHECK_FALSE(OutputContract::parse("essay"));
}

TEST_CASE("default library loads with all pipeline keys and roles") {
    const auto& lib = default_library();
    for (const auto& key : required_template_keys()) CHECK(lib.find(key) != nullptr);
    CHECK(lib.role_index().at("baseline_threat_modeler") == "P_cyber.baseline");
    CHECK(lib.role("cloud_security_analyst") != nullptr);
    CHECK(lib.at("P_cia").output_contract().schema == "CategoryAssignmentList");
    CHECK(lib.at("P_diag").placeholders() == std::set<std::string>{"diagram_context"});
}

TEST_CASE("mapping prompts never mention the other universe") {
    const auto& lib = default_library();
    const auto& cia = lib.at("P_cia").body();
    const auto& stride = lib.at("P_stride").body();
    for (const auto& label : stride_universe()) CHECK(cia.find(label) == std::string::npos);
    for (const auto& label : cia_universe()) CHECK(stride.find(label) == std::string::npos);
}

TEST_CASE("library parser reports problems precisely") {
    CHECK_NOTHROW(parse_prompt_library(minimal_library_text()));

    std::string missing = "version = \"t\"\n[templates.\"P_diag\"]\nbody = \"x\"\n";
    try {
        parse_prompt_library(missing);
        FAIL("expected MissingRequiredTemplates");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingRequiredTemplates");
        CHECK(e.detail().at("missing").size() == required_template_keys().size() - 1);
    }

    auto dup = minimal_library_text("\n[templates.\"P_diag\"]\nbody = \"again\"\n");
    CHECK(error_code_of([&] { parse_prompt_library(dup); }) == "ParseError");

    try {
        parse_prompt_library("version = \"t\"\nbody = \"unterminated\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == "ParseError");
        CHECK(e.detail().at("line") == 2);
    }

    auto bad_role = minimal_library_text(
        "\n[roles.ghost]\ndisplay_name = \"Ghost\"\nprompt_key = \"P_cyber.ghost\"\n");
    CHECK(error_code_of([&] { parse_prompt_library(bad_role); }) == "ValidationError");

    auto bad_contract = minimal_library_text(
        "\n[templates.\"extra\"]\noutput_contract = \"poem\"\nbody = \"x\"\n");
    CHECK_FALSE(error_code_of([&] { parse_prompt_library(bad_contract); }).empty());
}

TEST_CASE("literal and multi-line strings keep their content") {
    auto lib = parse_prompt_library(minimal_library_text(
        "\n[templates.'lit']\nbody = '''\nC:\\path {{x}}\n'''\n"
        "\n[templates.\"esc\"]\nbody = \"tab\\tquote\\\" {{y}}\"  # trailing comment\n"));
    CHECK(lib.at("lit").body() == "C:\\path {{x}}\n");
    CHECK(lib.at("esc").body() == "tab\tquote\" {{y}}");
}

TEST_CASE("chains are checked before any model call") {
    auto lib = parse_prompt_library(minimal_library_text(
        "\n[templates.\"needs_later\"]\nbody = \"{{later}}\"\n"));
    MockBackend mock({});
    ChainSpec bad{{{"needs_later", "first"}, {keys::kChainInScope, "later"}}};
    CHECK(error_code_of([&] { run_chain(bad, "seed", "s", lib, mock); }) == "ChainBindingError");
    ChainSpec unknown{{{"no_such_template", "x"}}};
    CHECK(error_code_of([&] { run_chain(unknown, "seed", "s", lib, mock); }) ==
          "ChainBindingError");
    ChainSpec dup{{{keys::kChainAppDetails, "x"}, {keys::kChainInScope, "x"}}};
    CHECK(error_code_of([&] { run_chain(dup, "seed", "s", lib, mock); }) == "ChainBindingError");
    CHECK(mock.call_count() == 0);
}

TEST_CASE("cumulative chain extends its prefix at every step") {
    int n = 0;
    MockBackend mock([&](const ModelRequest& r) {
        ++n;
        if (r.tag == keys::kChainAppDetails) return std::string("the app does things");
        return "- item " + std::to_string(n) + "a\n- item " + std::to_string(n) + "b";
    });
    const std::string seed = "SEED architecture text";
    auto result = run_chain(stage1_chain_spec(), "architecture_description", seed,
                            default_library(), mock);
    auto requests = mock.requests();
    REQUIRE(requests.size() == 3);
    REQUIRE(result.outputs.size() == 3);

    std::string expected_accumulated = seed;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto prompt = requests[i].text();
        CHECK(prompt.find(expected_accumulated) != std::string::npos);
        std::size_t pos = prompt.find(seed);
        REQUIRE(pos != std::string::npos);
        for (std::size_t j = 0; j < i; ++j) {
            auto next = prompt.find(result.outputs[j].second, pos);
            CHECK(next != std::string::npos);
            pos = next;
        }
        expected_accumulated += chain_section_header(result.outputs[i].first) + result.outputs[i].second;
    }
    CHECK(result.output("key_features") == "- item 2a\n- item 2b");
    CHECK(result.structured.at("in_scope_components") ==
          nlohmann::json::array({"item 3a", "item 3b"}));
    CHECK(result.transcript.size() == 3);
}

TEST_CASE("a failing chain step is reported with its position") {
    ScriptedBackend scripted;
    scripted.push(keys::kChainAppDetails, "details");
    try {
        run_chain(stage1_chain_spec(), "architecture_description", "seed", default_library(),
                  scripted);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == "TransportError");
        CHECK(std::string(e.what()).find("chain step 2") != std::string::npos);
    }
}
