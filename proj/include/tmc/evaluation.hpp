#pragma once

// Expert-feedback evaluation: Likert aggregation, the false-positive by
// realism crosstab, and multilabel Hamming loss against expert corrections.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tmc/model.hpp"

namespace tmc {

enum class LikertLevel { StronglyDisagree = 1, Disagree, Neutral, Agree, StronglyAgree };

inline constexpr std::array<LikertLevel, 5> kAllLikert = {
    LikertLevel::StronglyDisagree, LikertLevel::Disagree, LikertLevel::Neutral,
    LikertLevel::Agree, LikertLevel::StronglyAgree};

std::string_view to_string(LikertLevel level);
// Accepts display names ("Strongly Agree"), identifiers, and ordinals 1-5.
std::optional<LikertLevel> parse_likert(std::string_view text);
inline int ordinal(LikertLevel level) { return static_cast<int>(level); }

struct ModelSurveyResponse {
    std::string system_label;
    std::string expert_id;
    LikertLevel q1_clarity = LikertLevel::Neutral;
    LikertLevel q2_enhancement = LikertLevel::Neutral;
    bool operator==(const ModelSurveyResponse&) const = default;
};

struct ScenarioJudgment {
    std::string system_label;
    std::string expert_id;
    int scenario_id = 0;
    LikertLevel realism = LikertLevel::Neutral;
    bool false_positive = false;
    // Absent means the expert accepted the predicted labels.
    std::optional<std::vector<CiaCategory>> corrected_cia;
    std::optional<std::vector<StrideCategory>> corrected_stride;
    bool operator==(const ScenarioJudgment&) const = default;

    // Throws ValidationError when a provided correction is empty.
    void validate() const;
};

void to_json(nlohmann::json& j, const ModelSurveyResponse& r);
void from_json(const nlohmann::json& j, ModelSurveyResponse& r);
void to_json(nlohmann::json& j, const ScenarioJudgment& s);
void from_json(const nlohmann::json& j, ScenarioJudgment& s);

// ---------------------------------------------------------------------------
// Hamming loss

// Label indices into a universe of a given size.
using LabelIndexSet = std::vector<std::size_t>;

// (1/n) * sum_i |predicted_i symdiff gold_i| / universe_size.
// Throws LengthMismatch (including n == 0) or LabelOutsideUniverse.
double hamming_loss(const std::vector<LabelIndexSet>& predicted,
                    const std::vector<LabelIndexSet>& gold, std::size_t universe_size);

// Same, over label strings resolved against `universe`.
double hamming_loss(const std::vector<std::vector<std::string>>& predicted,
                    const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::string>& universe);

// ---------------------------------------------------------------------------
// Crosstab and Likert histograms

struct FalsePositiveCrosstab {
    // cells[0] = false positive "Yes", cells[1] = "No"; columns in Likert order.
    std::array<std::array<int, 5>, 2> cells{};
    std::array<int, 2> row_totals{};
    std::array<int, 5> column_totals{};
    int grand_total = 0;
};

FalsePositiveCrosstab crosstab_false_positive(const std::vector<ScenarioJudgment>& judgments);

struct LikertHistograms {
    std::array<int, 5> q1_clarity{};
    std::array<int, 5> q2_enhancement{};
};

LikertHistograms aggregate_likert(const std::vector<ModelSurveyResponse>& responses);

// ---------------------------------------------------------------------------
// Report

enum class LossDenominator {
    PerSystem,  // each system's loss is the mean over its own samples
    Pooled,     // each system's summed loss is divided by the pooled sample count
};

struct SystemLoss {
    std::string system_label;
    std::size_t samples = 0;
    std::optional<double> cia;
    std::optional<double> stride;
};

struct EvaluationReport {
    LossDenominator denominator = LossDenominator::PerSystem;
    std::vector<SystemLoss> losses;
    FalsePositiveCrosstab crosstab;
    LikertHistograms likert;
    std::size_t judgment_count = 0;
    std::size_t survey_count = 0;
};

// Each matrix row contributes one sample per judgment on it; rows nobody
// judged contribute one sample in which the expert accepted the prediction.
// Throws DanglingJudgment when a judgment names an unknown system or row.
EvaluationReport build_report(const std::vector<ThreatMatrix>& matrices,
                              const std::vector<ScenarioJudgment>& judgments,
                              const std::vector<ModelSurveyResponse>& responses,
                              LossDenominator denominator = LossDenominator::PerSystem);

nlohmann::json report_to_json(const EvaluationReport& report);
std::string report_to_text(const EvaluationReport& report);

// Input documents: {"judgments": [...]} and {"responses": [...]}; a bare array
// is accepted too.
std::vector<ScenarioJudgment> parse_judgments(const nlohmann::json& doc);
std::vector<ModelSurveyResponse> parse_survey_responses(const nlohmann::json& doc);

}  // namespace tmc
