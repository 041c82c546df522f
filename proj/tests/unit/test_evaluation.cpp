#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "support.hpp"
#include "tmc/evaluation.hpp"
#include "tmc/text.hpp"

using namespace tmc;
using namespace tmc::testing;
using nlohmann::json;

namespace {

ThreatMatrix two_row_matrix(const std::string& label) {
    ThreatMatrix m;
    m.system_label = label;
    m.scenarios = {{1, "a", {}}, {2, "b", {}}};
    m.columns = {{"CIA", cia_universe(), {{"Confidentiality"}, {"Availability"}}},
                 {"STRIDE", stride_universe(), {{"Spoofing"}, {"Denial of Service"}}}};
    return m;
}

ScenarioJudgment judgment(const std::string& sys, int id, LikertLevel realism, bool fp) {
    ScenarioJudgment j;
    j.system_label = sys;
    j.expert_id = "E";
    j.scenario_id = id;
    j.realism = realism;
    j.false_positive = fp;
    return j;
}

std::vector<ThreatMatrix> load_matrices(const std::filesystem::path& p) {
    std::vector<ThreatMatrix> out;
    const auto doc = json::parse(text::read_file_text(p));
    for (const auto& m : doc.at("matrices")) out.push_back(m.get<ThreatMatrix>());
    return out;
}

}  // namespace

TEST_CASE("hamming loss agrees with the bitvector oracle") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t universe = trial % 2 ? 3 : 6;
        const std::size_t n = 1 + rng() % 10;
        std::vector<LabelIndexSet> pred, gold;
        for (std::size_t i = 0; i < n; ++i) {
            pred.push_back(random_label_set(rng, universe));
            gold.push_back(random_label_set(rng, universe));
        }
        REQUIRE(std::abs(hamming_loss(pred, gold, universe) - oracle_hamming(pred, gold, universe)) < 1e-12);
        CHECK(hamming_loss(pred, pred, universe) == 0.0);
    }
}

TEST_CASE("complementary predictions give the maximal loss") {
    std::vector<LabelIndexSet> full = {{0, 1, 2}, {0, 1, 2}};
    std::vector<LabelIndexSet> none = {{}, {}};
    CHECK(hamming_loss(full, none, 3) == doctest::Approx(1.0));
    std::vector<LabelIndexSet> half = {{0}, {}};
    CHECK(hamming_loss(half, none, 3) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("hamming loss input errors") {
    CHECK(error_code_of([] { hamming_loss(std::vector<LabelIndexSet>{}, {}, 3); }) == "LengthMismatch");
    CHECK(error_code_of([] { hamming_loss(std::vector<LabelIndexSet>{{0}}, {}, 3); }) == "LengthMismatch");
    CHECK(error_code_of([] { hamming_loss(std::vector<LabelIndexSet>{{5}}, {{0}}, 3); }) ==
          "LabelOutsideUniverse");
    using Names = std::vector<std::vector<std::string>>;
    CHECK(error_code_of([] { hamming_loss(Names{{"Phishing"}}, Names{{}}, cia_universe()); }) ==
          "LabelOutsideUniverse");
    CHECK(hamming_loss(Names{{"Confidentiality"}}, Names{{"Integrity"}}, cia_universe()) ==
          doctest::Approx(2.0 / 3.0));
}

TEST_CASE("crosstab counts judgments by false positive and realism") {
    std::vector<ScenarioJudgment> js = {judgment("S", 1, LikertLevel::StronglyDisagree, true),
                                        judgment("S", 2, LikertLevel::Agree, false),
                                        judgment("S", 2, LikertLevel::StronglyDisagree, true)};
    auto t = crosstab_false_positive(js);
    CHECK(t.cells[0][0] == 2);
    CHECK(t.cells[1][3] == 1);
    CHECK(t.row_totals == std::array<int, 2>{2, 1});
    CHECK(t.column_totals == std::array<int, 5>{2, 0, 0, 1, 0});
    CHECK(t.grand_total == 3);
}

TEST_CASE("judgments on unknown rows or systems are dangling") {
    std::vector<ThreatMatrix> ms = {two_row_matrix("S")};
    try {
        build_report(ms, {judgment("S", 99, LikertLevel::Neutral, false)}, {});
        FAIL("expected DanglingJudgment");
    } catch (const Error& e) {
        CHECK(e.code() == "DanglingJudgment");
        CHECK(e.detail().at("ids") == json::array({99}));
    }
    CHECK(error_code_of([&] { build_report(ms, {judgment("T", 1, LikertLevel::Neutral, false)}, {}); }) ==
          "DanglingJudgment");
}

TEST_CASE("unjudged rows count as accepted and corrections count as errors") {
    std::vector<ThreatMatrix> ms = {two_row_matrix("S"), two_row_matrix("T")};
    auto j = judgment("S", 1, LikertLevel::Agree, false);
    j.corrected_cia = std::vector<CiaCategory>{CiaCategory::Integrity};
    auto per = build_report(ms, {j}, {});
    REQUIRE(per.losses.size() == 2);
    CHECK(per.losses[0].samples == 2);
    CHECK(*per.losses[0].cia == doctest::Approx(2.0 / 3.0 / 2.0));
    CHECK(*per.losses[0].stride == 0.0);
    CHECK(*per.losses[1].cia == 0.0);

    auto pooled = build_report(ms, {j}, {}, LossDenominator::Pooled);
    CHECK(*pooled.losses[0].cia == doctest::Approx(2.0 / 3.0 / 4.0));
    CHECK(report_to_json(pooled)["hamming_loss"]["denominator"] == "pooled");
}

TEST_CASE("empty corrections are invalid") {
    auto j = judgment("S", 1, LikertLevel::Agree, false);
    j.corrected_stride = std::vector<StrideCategory>{};
    CHECK(error_code_of([&] { j.validate(); }) == "ValidationError");
}

TEST_CASE("likert values parse from names, identifiers, and ordinals") {
    CHECK(parse_likert("Strongly Agree") == LikertLevel::StronglyAgree);
    CHECK(parse_likert("strongly_disagree") == LikertLevel::StronglyDisagree);
    CHECK(parse_likert("3") == LikertLevel::Neutral);
    CHECK_FALSE(parse_likert("6").has_value());
    CHECK_FALSE(parse_likert("meh").has_value());

    std::vector<ModelSurveyResponse> rs(3);
    rs[0].q1_clarity = LikertLevel::Agree;
    rs[1].q1_clarity = LikertLevel::Agree;
    rs[2].q2_enhancement = LikertLevel::StronglyAgree;
    auto h = aggregate_likert(rs);
    CHECK(h.q1_clarity == std::array<int, 5>{0, 0, 1, 2, 0});
    CHECK(h.q2_enhancement == std::array<int, 5>{0, 0, 2, 0, 1});
}

TEST_CASE("the evaluation fixture reproduces the reported table") {
    auto ms = load_matrices(fixtures() / "eval/matrices.json");
    auto js = parse_judgments(json::parse(text::read_file_text(fixtures() / "eval/judgments.json")));
    auto rs = parse_survey_responses(json::parse(text::read_file_text(fixtures() / "eval/surveys.json")));
    auto report = build_report(ms, js, rs);
    const auto& t = report.crosstab;
    CHECK(t.cells[0] == std::array<int, 5>{53, 13, 3, 16, 0});
    CHECK(t.cells[1] == std::array<int, 5>{0, 7, 28, 91, 35});
    CHECK(t.row_totals == std::array<int, 2>{85, 161});
    CHECK(t.column_totals == std::array<int, 5>{53, 20, 31, 107, 35});
    CHECK(t.grand_total == 246);
    REQUIRE(report.losses.size() == 8);
    CHECK(std::round(*report.losses[0].stride * 100) / 100 == doctest::Approx(0.23));
    CHECK(std::round(*report.losses[0].cia * 100) / 100 == doctest::Approx(0.03));
    for (std::size_t i = 1; i < 8; ++i) {
        CHECK(*report.losses[i].cia == 0.0);
        CHECK(*report.losses[i].stride == 0.0);
    }

    auto accept_all =
        parse_judgments(json::parse(text::read_file_text(fixtures() / "eval/judgments_accept_all.json")));
    for (const auto& l : build_report(ms, accept_all, {}).losses) {
        CHECK(*l.cia == 0.0);
        CHECK(*l.stride == 0.0);
    }
}
