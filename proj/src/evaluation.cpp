#include "tmc/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

Error label_outside(std::size_t label, std::size_t universe_size) {
    return Error(ErrorKind::Validation, "LabelOutsideUniverse",
                 "label index " + std::to_string(label) + " outside universe of size " +
                     std::to_string(universe_size),
                 {{"label", label}, {"universe_size", universe_size}});
}

std::set<std::size_t> as_set(const LabelIndexSet& labels, std::size_t universe_size) {
    std::set<std::size_t> out;
    for (auto l : labels) {
        if (l >= universe_size) throw label_outside(l, universe_size);
        out.insert(l);
    }
    return out;
}

template <typename Enum, typename Parse>
std::vector<Enum> parse_categories(const json& v, Parse parse, const char* what) {
    if (!v.is_array()) throw parse_error(std::string(what) + " must be an array");
    std::vector<Enum> out;
    for (const auto& item : v) {
        auto c = parse(item.get<std::string>());
        if (!c) throw parse_error(std::string("unknown ") + what + " label '" +
                                  item.get<std::string>() + "'");
        if (std::find(out.begin(), out.end(), *c) == out.end()) out.push_back(*c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <typename Enum>
std::vector<std::string> names(const std::vector<Enum>& values) {
    std::vector<std::string> out;
    for (auto v : values) out.emplace_back(to_string(v));
    return out;
}

LikertLevel likert_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw parse_error(std::string("missing '") + key + "'");
    std::optional<LikertLevel> level;
    if (it->is_number_integer()) level = parse_likert(std::to_string(it->get<int>()));
    else if (it->is_string()) level = parse_likert(it->get<std::string>());
    if (!level) throw parse_error(std::string("'") + key + "' is not a Likert level");
    return *level;
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string_view to_string(LikertLevel level) {
    switch (level) {
        case LikertLevel::StronglyDisagree: return "Strongly Disagree";
        case LikertLevel::Disagree: return "Disagree";
        case LikertLevel::Neutral: return "Neutral";
        case LikertLevel::Agree: return "Agree";
        case LikertLevel::StronglyAgree: return "Strongly Agree";
    }
    return "";
}

std::optional<LikertLevel> parse_likert(std::string_view text) {
    std::string key;
    for (unsigned char c : text) {
        if (!std::isspace(c) && c != '_' && c != '-') key += static_cast<char>(std::tolower(c));
    }
    if (key.size() == 1 && key[0] >= '1' && key[0] <= '5') {
        return static_cast<LikertLevel>(key[0] - '0');
    }
    for (auto level : kAllLikert) {
        std::string name;
        for (unsigned char c : to_string(level)) {
            if (!std::isspace(c)) name += static_cast<char>(std::tolower(c));
        }
        if (name == key) return level;
    }
    return std::nullopt;
}

void ScenarioJudgment::validate() const {
    if (corrected_cia && corrected_cia->empty()) {
        throw validation_error("corrected CIA set is empty for scenario " +
                               std::to_string(scenario_id));
    }
    if (corrected_stride && corrected_stride->empty()) {
        throw validation_error("corrected STRIDE set is empty for scenario " +
                               std::to_string(scenario_id));
    }
}

void to_json(json& j, const ModelSurveyResponse& r) {
    j = {{"system_label", r.system_label},
         {"expert_id", r.expert_id},
         {"q1_clarity", to_string(r.q1_clarity)},
         {"q2_enhancement", to_string(r.q2_enhancement)}};
}

void from_json(const json& j, ModelSurveyResponse& r) {
    r.system_label = j.at("system_label").get<std::string>();
    r.expert_id = j.value("expert_id", std::string{});
    r.q1_clarity = likert_field(j, "q1_clarity");
    r.q2_enhancement = likert_field(j, "q2_enhancement");
}

void to_json(json& j, const ScenarioJudgment& s) {
    j = {{"system_label", s.system_label},
         {"expert_id", s.expert_id},
         {"scenario_id", s.scenario_id},
         {"realism", to_string(s.realism)},
         {"false_positive", s.false_positive}};
    if (s.corrected_cia) j["corrected_cia"] = names(*s.corrected_cia);
    if (s.corrected_stride) j["corrected_stride"] = names(*s.corrected_stride);
}

void from_json(const json& j, ScenarioJudgment& s) {
    if (!j.is_object()) throw parse_error("judgment must be an object");
    s.system_label = j.value("system_label", std::string{});
    s.expert_id = j.value("expert_id", std::string{});
    if (!j.contains("scenario_id") || !j["scenario_id"].is_number_integer()) {
        throw parse_error("judgment needs an integer scenario_id");
    }
    s.scenario_id = j["scenario_id"].get<int>();
    s.realism = likert_field(j, "realism");
    s.false_positive = j.value("false_positive", false);
    s.corrected_cia.reset();
    s.corrected_stride.reset();
    if (auto it = j.find("corrected_cia"); it != j.end() && !it->is_null()) {
        s.corrected_cia = parse_categories<CiaCategory>(*it, parse_cia, "CIA");
    }
    if (auto it = j.find("corrected_stride"); it != j.end() && !it->is_null()) {
        s.corrected_stride = parse_categories<StrideCategory>(*it, parse_stride, "STRIDE");
    }
    s.validate();
}

// ---------------------------------------------------------------------------

double hamming_loss(const std::vector<LabelIndexSet>& predicted,
                    const std::vector<LabelIndexSet>& gold, std::size_t universe_size) {
    if (predicted.size() != gold.size() || predicted.empty()) {
        throw length_mismatch(predicted.size(), gold.size());
    }
    if (universe_size == 0) throw validation_error("universe_size must be >= 1");
    std::size_t disagreements = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        auto p = as_set(predicted[i], universe_size);
        auto g = as_set(gold[i], universe_size);
        std::vector<std::size_t> diff;
        std::set_symmetric_difference(p.begin(), p.end(), g.begin(), g.end(),
                                      std::back_inserter(diff));
        disagreements += diff.size();
    }
    return static_cast<double>(disagreements) /
           (static_cast<double>(predicted.size()) * static_cast<double>(universe_size));
}

double hamming_loss(const std::vector<std::vector<std::string>>& predicted,
                    const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::string>& universe) {
    auto to_indices = [&](const std::vector<std::vector<std::string>>& sets) {
        std::vector<LabelIndexSet> out;
        for (const auto& s : sets) {
            LabelIndexSet idx;
            for (const auto& label : s) {
                auto it = std::find(universe.begin(), universe.end(), label);
                if (it == universe.end()) {
                    throw Error(ErrorKind::Validation, "LabelOutsideUniverse",
                                "label '" + label + "' outside universe", {{"label", label}});
                }
                idx.push_back(static_cast<std::size_t>(it - universe.begin()));
            }
            out.push_back(std::move(idx));
        }
        return out;
    };
    return hamming_loss(to_indices(predicted), to_indices(gold), universe.size());
}

FalsePositiveCrosstab crosstab_false_positive(const std::vector<ScenarioJudgment>& judgments) {
    FalsePositiveCrosstab t;
    for (const auto& j : judgments) {
        const int row = j.false_positive ? 0 : 1;
        const int col = ordinal(j.realism) - 1;
        ++t.cells[row][col];
        ++t.row_totals[row];
        ++t.column_totals[col];
        ++t.grand_total;
    }
    return t;
}

LikertHistograms aggregate_likert(const std::vector<ModelSurveyResponse>& responses) {
    LikertHistograms h;
    for (const auto& r : responses) {
        ++h.q1_clarity[ordinal(r.q1_clarity) - 1];
        ++h.q2_enhancement[ordinal(r.q2_enhancement) - 1];
    }
    return h;
}

EvaluationReport build_report(const std::vector<ThreatMatrix>& matrices,
                              const std::vector<ScenarioJudgment>& judgments,
                              const std::vector<ModelSurveyResponse>& responses,
                              LossDenominator denominator) {
    std::map<std::string, const ThreatMatrix*> by_label;
    for (const auto& m : matrices) {
        if (!by_label.emplace(m.system_label, &m).second) {
            throw validation_error("two matrices share system label '" + m.system_label + "'");
        }
    }

    // (system, scenario id) -> judgments on that row
    std::map<std::pair<std::string, int>, std::vector<const ScenarioJudgment*>> on_row;
    std::vector<int> dangling;
    for (const auto& j : judgments) {
        j.validate();
        auto it = by_label.find(j.system_label);
        if (it == by_label.end() || !it->second->scenario(j.scenario_id)) {
            dangling.push_back(j.scenario_id);
            continue;
        }
        on_row[{j.system_label, j.scenario_id}].push_back(&j);
    }
    if (!dangling.empty()) throw dangling_judgment(dangling);

    struct Samples {
        std::vector<std::vector<std::string>> cia_pred, cia_gold, stride_pred, stride_gold;
        std::size_t count = 0;
    };
    std::vector<std::pair<std::string, Samples>> per_system;
    std::size_t pooled_count = 0;
    for (const auto& m : matrices) {
        const auto* cia = m.column("CIA");
        const auto* stride = m.column("STRIDE");
        Samples s;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const int id = m.scenarios[i].id;
            auto it = on_row.find({m.system_label, id});
            std::vector<const ScenarioJudgment*> row_judgments;
            if (it != on_row.end()) row_judgments = it->second;
            if (row_judgments.empty()) row_judgments.push_back(nullptr);
            for (const auto* j : row_judgments) {
                ++s.count;
                if (cia) {
                    const auto& pred = cia->values[i];
                    s.cia_pred.push_back(pred);
                    s.cia_gold.push_back(j && j->corrected_cia ? names(*j->corrected_cia) : pred);
                }
                if (stride) {
                    const auto& pred = stride->values[i];
                    s.stride_pred.push_back(pred);
                    s.stride_gold.push_back(j && j->corrected_stride ? names(*j->corrected_stride)
                                                                     : pred);
                }
            }
        }
        pooled_count += s.count;
        per_system.emplace_back(m.system_label, std::move(s));
    }

    EvaluationReport report;
    report.denominator = denominator;
    for (const auto& [label, s] : per_system) {
        SystemLoss loss;
        loss.system_label = label;
        loss.samples = s.count;
        const double scale = denominator == LossDenominator::Pooled && pooled_count > 0
                                 ? static_cast<double>(s.count) / static_cast<double>(pooled_count)
                                 : 1.0;
        if (!s.cia_pred.empty()) {
            loss.cia = hamming_loss(s.cia_pred, s.cia_gold, cia_universe()) * scale;
        }
        if (!s.stride_pred.empty()) {
            loss.stride = hamming_loss(s.stride_pred, s.stride_gold, stride_universe()) * scale;
        }
        report.losses.push_back(std::move(loss));
    }
    report.crosstab = crosstab_false_positive(judgments);
    report.likert = aggregate_likert(responses);
    report.judgment_count = judgments.size();
    report.survey_count = responses.size();
    return report;
}

json report_to_json(const EvaluationReport& report) {
    json losses = json::array();
    for (const auto& l : report.losses) {
        losses.push_back({{"system_label", l.system_label},
                          {"samples", l.samples},
                          {"CIA", l.cia ? json(*l.cia) : json(nullptr)},
                          {"STRIDE", l.stride ? json(*l.stride) : json(nullptr)}});
    }
    json levels = json::array();
    for (auto level : kAllLikert) levels.push_back(to_string(level));
    const auto& t = report.crosstab;
    return {
        {"hamming_loss",
         {{"denominator",
           report.denominator == LossDenominator::Pooled ? "pooled" : "per_system"},
          {"systems", std::move(losses)}}},
        {"false_positive_crosstab",
         {{"columns", levels},
          {"rows", {{"Yes", t.cells[0]}, {"No", t.cells[1]}}},
          {"row_totals", {{"Yes", t.row_totals[0]}, {"No", t.row_totals[1]}}},
          {"column_totals", t.column_totals},
          {"grand_total", t.grand_total}}},
        {"likert",
         {{"levels", levels},
          {"q1_clarity", report.likert.q1_clarity},
          {"q2_enhancement", report.likert.q2_enhancement},
          {"responses", report.survey_count}}},
        {"judgment_count", report.judgment_count},
    };
}

std::string report_to_text(const EvaluationReport& report) {
    std::ostringstream out;
    out << "Hamming loss ("
        << (report.denominator == LossDenominator::Pooled ? "pooled rows" : "per-system mean")
        << ")\n";
    out << "  system                 samples      CIA   STRIDE\n";
    for (const auto& l : report.losses) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-22s %7zu %8s %8s\n", l.system_label.c_str(),
                      l.samples, l.cia ? fixed(*l.cia, 4).c_str() : "-",
                      l.stride ? fixed(*l.stride, 4).c_str() : "-");
        out << line;
    }
    const auto& t = report.crosstab;
    out << "\nFalse positive vs. realism\n";
    out << "  FP     SD    D    N    A   SA  Total\n";
    const char* rows[] = {"Yes", "No"};
    for (int r = 0; r < 2; ++r) {
        char line[128];
        std::snprintf(line, sizeof line, "  %-4s %4d %4d %4d %4d %4d %6d\n", rows[r],
                      t.cells[r][0], t.cells[r][1], t.cells[r][2], t.cells[r][3], t.cells[r][4],
                      t.row_totals[r]);
        out << line;
    }
    char total[128];
    std::snprintf(total, sizeof total, "  %-4s %4d %4d %4d %4d %4d %6d\n", "All",
                  t.column_totals[0], t.column_totals[1], t.column_totals[2], t.column_totals[3],
                  t.column_totals[4], t.grand_total);
    out << total;
    out << "\nSurvey responses (" << report.survey_count << ")\n";
    const auto& h = report.likert;
    char q[128];
    std::snprintf(q, sizeof q, "  Q1 clarity      %4d %4d %4d %4d %4d\n", h.q1_clarity[0],
                  h.q1_clarity[1], h.q1_clarity[2], h.q1_clarity[3], h.q1_clarity[4]);
    out << q;
    std::snprintf(q, sizeof q, "  Q2 enhancement  %4d %4d %4d %4d %4d\n", h.q2_enhancement[0],
                  h.q2_enhancement[1], h.q2_enhancement[2], h.q2_enhancement[3],
                  h.q2_enhancement[4]);
    out << q;
    return out.str();
}

std::vector<ScenarioJudgment> parse_judgments(const json& doc) {
    const json* arr = &doc;
    if (doc.is_object() && doc.contains("judgments")) arr = &doc["judgments"];
    if (!arr->is_array()) throw parse_error("judgments document needs a 'judgments' array");
    std::vector<ScenarioJudgment> out;
    for (const auto& j : *arr) out.push_back(j.get<ScenarioJudgment>());
    return out;
}

std::vector<ModelSurveyResponse> parse_survey_responses(const json& doc) {
    const json* arr = &doc;
    if (doc.is_object() && doc.contains("responses")) arr = &doc["responses"];
    if (!arr->is_array()) throw parse_error("survey document needs a 'responses' array");
    std::vector<ModelSurveyResponse> out;
    for (const auto& r : *arr) out.push_back(r.get<ModelSurveyResponse>());
    return out;
}

}  // namespace tmc
