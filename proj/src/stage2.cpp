#include "tmc/stage2.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <set>

#include "tmc/error.hpp"
#include "tmc/stage1.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

TranscriptHook hook_for(TranscriptRecorder* recorder, const std::string& key) {
    return recorder ? recorder->hook(key) : TranscriptHook{};
}

std::vector<ThreatScenario> scenarios_from(const json& value,
                                           const std::vector<std::string>& in_scope) {
    std::vector<ThreatScenario> out;
    int id = 0;
    for (const auto& item : value) {
        ThreatScenario s;
        s.id = ++id;
        s.description = item.at("description").get<std::string>();
        std::set<std::string> named;
        for (const auto& c : item.at("components")) named.insert(c.get<std::string>());
        for (const auto& component : in_scope) {
            if (named.count(component) || s.description.find(component) != std::string::npos) {
                s.related_components.push_back(component);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

Error count_out_of_range(std::size_t count, int min, int max) {
    return Error(ErrorKind::Backend, "ScenarioCountOutOfRange",
                 "model produced " + std::to_string(count) + " threat scenarios; expected " +
                     std::to_string(min) + ".." + std::to_string(max),
                 {{"count", count}, {"min", min}, {"max", max}});
}

struct AssignmentCheck {
    std::vector<std::vector<std::string>> values;  // canonical, by row
    std::vector<int> missing;
    std::vector<std::pair<std::string, int>> unknown_labels;
    std::vector<int> unknown_ids;
    std::vector<int> duplicate_ids;

    bool ok() const {
        return missing.empty() && unknown_labels.empty() && unknown_ids.empty() &&
               duplicate_ids.empty();
    }

    std::string describe() const {
        std::vector<std::string> parts;
        auto ids = [](const std::vector<int>& v) {
            std::vector<std::string> s;
            for (int i : v) s.push_back(std::to_string(i));
            return text::join(s, ", ");
        };
        if (!missing.empty()) parts.push_back("missing assignments for ids " + ids(missing));
        for (const auto& [label, id] : unknown_labels) {
            parts.push_back("id " + std::to_string(id) + " uses label '" + label +
                            "' which is not an allowed label");
        }
        if (!unknown_ids.empty()) parts.push_back("unknown scenario ids " + ids(unknown_ids));
        if (!duplicate_ids.empty()) parts.push_back("ids assigned twice " + ids(duplicate_ids));
        return text::join(parts, "; ");
    }
};

AssignmentCheck check_assignments(const json& value, std::size_t rows,
                                  const std::vector<std::string>& universe) {
    AssignmentCheck check;
    check.values.resize(rows);
    std::vector<bool> seen(rows, false);
    for (const auto& a : value) {
        const int id = a.at("id").get<int>();
        if (id < 1 || static_cast<std::size_t>(id) > rows) {
            check.unknown_ids.push_back(id);
            continue;
        }
        const auto idx = static_cast<std::size_t>(id - 1);
        if (seen[idx]) {
            check.duplicate_ids.push_back(id);
            continue;
        }
        seen[idx] = true;
        std::vector<std::string> labels;
        for (const auto& l : a.at("labels")) {
            const auto raw = l.get<std::string>();
            if (auto canonical = canonical_label(universe, raw)) {
                if (std::find(labels.begin(), labels.end(), *canonical) == labels.end()) {
                    labels.push_back(*canonical);
                }
            } else {
                check.unknown_labels.emplace_back(raw, id);
            }
        }
        check.values[static_cast<std::size_t>(id - 1)] = order_by_universe(universe, labels);
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (!seen[i]) check.missing.push_back(static_cast<int>(i) + 1);
    }
    return check;
}

Error assignment_error(const AssignmentCheck& check, const std::string& column) {
    if (!check.missing.empty()) {
        std::string ids;
        for (int id : check.missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
        return Error(ErrorKind::Backend, "MissingAssignment",
                     column + " mapping has no assignment for scenario id(s) " + ids,
                     {{"ids", check.missing}, {"column", column}});
    }
    if (!check.unknown_labels.empty()) {
        const auto& [label, id] = check.unknown_labels.front();
        return Error(ErrorKind::Backend, "UnknownLabel",
                     column + " mapping uses unknown label '" + label + "' for scenario " +
                         std::to_string(id),
                     {{"label", label}, {"id", id}, {"column", column}});
    }
    return Error(ErrorKind::Backend, "InvalidAssignment",
                 column + " mapping is inconsistent: " + check.describe(),
                 {{"unknown_ids", check.unknown_ids},
                  {"duplicate_ids", check.duplicate_ids},
                  {"column", column}});
}

}  // namespace

MappingSpec cia_mapping() { return {"CIA", keys::kCia, cia_universe()}; }
MappingSpec stride_mapping() { return {"STRIDE", keys::kStride, stride_universe()}; }

std::optional<MappingSpec> builtin_mapping(std::string_view name) {
    auto n = text::to_lower(name);
    if (n == "cia") return cia_mapping();
    if (n == "stride") return stride_mapping();
    return std::nullopt;
}

void Stage2Config::validate() const {
    if (role.empty()) throw validation_error("stage-2 role is empty");
    if (min_scenarios < 1 || min_scenarios > max_scenarios) {
        throw validation_error("scenario bounds must satisfy 1 <= min <= max (got " +
                               std::to_string(min_scenarios) + ".." +
                               std::to_string(max_scenarios) + ")");
    }
    if (mappings.empty()) throw validation_error("stage-2 needs at least one mapping");
    std::set<std::string> names;
    for (const auto& m : mappings) {
        if (m.label_universe.empty()) {
            throw validation_error("mapping '" + m.name + "' has an empty label universe");
        }
        if (!names.insert(m.name).second) {
            throw validation_error("mapping '" + m.name + "' listed twice");
        }
    }
}

void to_json(json& j, const Stage2Config& c) {
    json mappings = json::array();
    for (const auto& m : c.mappings) {
        if (builtin_mapping(m.name) == m) {
            mappings.push_back(m.name);
        } else {
            mappings.push_back(
                {{"name", m.name}, {"prompt_key", m.prompt_key}, {"label_universe", m.label_universe}});
        }
    }
    j = {{"role", c.role},
         {"min_scenarios", c.min_scenarios},
         {"max_scenarios", c.max_scenarios},
         {"mappings", std::move(mappings)}};
}

void from_json(const json& j, Stage2Config& c) {
    c = Stage2Config{};
    c.role = j.value("role", c.role);
    c.min_scenarios = j.value("min_scenarios", j.value("min", c.min_scenarios));
    c.max_scenarios = j.value("max_scenarios", j.value("max", c.max_scenarios));
    if (auto it = j.find("mappings"); it != j.end()) {
        if (!it->is_array()) throw parse_error("mappings must be an array");
        c.mappings.clear();
        for (const auto& m : *it) {
            if (m.is_string()) {
                auto spec = builtin_mapping(m.get<std::string>());
                if (!spec) throw validation_error("unknown mapping '" + m.get<std::string>() + "'");
                c.mappings.push_back(*spec);
            } else {
                c.mappings.push_back({m.at("name").get<std::string>(),
                                      m.at("prompt_key").get<std::string>(),
                                      m.at("label_universe").get<std::vector<std::string>>()});
            }
        }
    }
}

std::string render_scenario_list(const std::vector<ThreatScenario>& scenarios) {
    std::vector<std::string> lines;
    lines.reserve(scenarios.size());
    for (const auto& s : scenarios) lines.push_back(std::to_string(s.id) + ". " + s.description);
    return text::join(lines, "\n");
}

std::vector<ThreatScenario> generate_threat_list(const SolutionDescription& sol,
                                                 const Stage2Config& config,
                                                 const PromptLibrary& library,
                                                 ModelBackend& backend,
                                                 const Stage2Options& options,
                                                 TranscriptRecorder* recorder) {
    config.validate();
    if (auto problems = sol.violations(); !problems.empty()) {
        throw precondition_failed("invalid solution description: " + text::join(problems, "; "));
    }
    const auto* role = library.role(config.role);
    if (!role) {
        throw Error(ErrorKind::Conflict, "UnknownRole",
                    "role '" + config.role + "' is not in the prompt library",
                    {{"role", config.role}});
    }
    const auto& tmpl = library.at(role->prompt_key);
    auto prompt = render_template(tmpl, {{"solution_description", sol.composed_text},
                                         {"in_scope_components",
                                          render_item_list(sol.in_scope_components)},
                                         {"min_scenarios", std::to_string(config.min_scenarios)},
                                         {"max_scenarios", std::to_string(config.max_scenarios)}});
    auto request = ModelRequest::user_text(std::move(prompt), options.params, tmpl.key());
    auto hook = hook_for(recorder, tmpl.key());

    auto in_range = [&](std::size_t n) {
        return n >= static_cast<std::size_t>(config.min_scenarios) &&
               n <= static_cast<std::size_t>(config.max_scenarios);
    };
    auto res = complete_structured(backend, request, StructuredSchema::ThreatScenarioList,
                                   options.structured_attempts, hook);
    if (!in_range(res.value.size())) {
        auto retry = std::move(res.final_request);
        retry.messages.push_back(
            {MessageRole::User,
             {TextPart{repair_message(
                 "the list has " + std::to_string(res.value.size()) +
                     " threat scenarios but must have between " +
                     std::to_string(config.min_scenarios) + " and " +
                     std::to_string(config.max_scenarios),
                 res.raw_text)}}});
        res = complete_structured(backend, std::move(retry), StructuredSchema::ThreatScenarioList,
                                  options.structured_attempts, hook);
        if (!in_range(res.value.size())) {
            throw count_out_of_range(res.value.size(), config.min_scenarios,
                                     config.max_scenarios);
        }
    }
    return scenarios_from(res.value, sol.in_scope_components);
}

MappingColumn map_categories(const SolutionDescription& sol,
                             const std::vector<ThreatScenario>& scenarios,
                             const MappingSpec& mapping, const PromptLibrary& library,
                             ModelBackend& backend, const Stage2Options& options,
                             TranscriptRecorder* recorder) {
    if (scenarios.empty()) throw precondition_failed("no threat scenarios to map");
    const auto& tmpl = library.at(mapping.prompt_key);
    auto prompt = render_template(tmpl, {{"solution_description", sol.composed_text},
                                         {"threat_scenarios", render_scenario_list(scenarios)},
                                         {"label_universe", text::join(mapping.label_universe, ", ")}});
    auto request = ModelRequest::user_text(std::move(prompt), options.params, tmpl.key());
    auto hook = hook_for(recorder, tmpl.key());

    auto res = complete_structured(backend, request, StructuredSchema::CategoryAssignmentList,
                                   options.structured_attempts, hook);
    auto check = check_assignments(res.value, scenarios.size(), mapping.label_universe);
    if (!check.ok()) {
        auto retry = std::move(res.final_request);
        retry.messages.push_back(
            {MessageRole::User,
             {TextPart{repair_message(check.describe() + " (allowed labels: " +
                                          text::join(mapping.label_universe, ", ") +
                                          "; every id from 1 to " +
                                          std::to_string(scenarios.size()) +
                                          " must appear exactly once)",
                                      res.raw_text)}}});
        res = complete_structured(backend, std::move(retry),
                                  StructuredSchema::CategoryAssignmentList,
                                  options.structured_attempts, hook);
        check = check_assignments(res.value, scenarios.size(), mapping.label_universe);
        if (!check.ok()) throw assignment_error(check, mapping.name);
    }
    return {mapping.name, mapping.label_universe, std::move(check.values)};
}

Stage2Result run_stage2(const SolutionDescription& sol, const Stage2Config& config,
                        const PromptLibrary& library, ModelBackend& backend,
                        const std::string& system_label, const Stage2Options& options) {
    config.validate();
    Stage2Result result;
    TranscriptRecorder list_recorder;
    std::vector<ThreatScenario> scenarios;
    try {
        scenarios = generate_threat_list(sol, config, library, backend, options, &list_recorder);
    } catch (...) {
        rethrow_tagged("threat list");
    }

    const auto n = config.mappings.size();
    std::vector<TranscriptRecorder> recorders(n);
    auto run_one = [&](std::size_t i) {
        try {
            return map_categories(sol, scenarios, config.mappings[i], library, backend, options,
                                  &recorders[i]);
        } catch (...) {
            rethrow_tagged("mapping " + config.mappings[i].name);
        }
    };
    std::vector<MappingColumn> columns;
    if (config.parallel_mappings && n > 1) {
        std::vector<std::future<MappingColumn>> futures;
        for (std::size_t i = 0; i < n; ++i) {
            futures.push_back(std::async(std::launch::async, run_one, i));
        }
        // Drain every future before rethrowing so no task outlives this frame.
        std::exception_ptr first_error;
        for (auto& f : futures) {
            try {
                columns.push_back(f.get());
            } catch (...) {
                if (!first_error) first_error = std::current_exception();
            }
        }
        if (first_error) std::rethrow_exception(first_error);
    } else {
        for (std::size_t i = 0; i < n; ++i) columns.push_back(run_one(i));
    }

    result.matrix.system_label = system_label;
    result.matrix.scenarios = std::move(scenarios);
    for (auto& c : columns) {
        result.matrix = append_mapping_column(std::move(result.matrix), std::move(c));
    }
    if (auto violations = validate_matrix(result.matrix); !violations.empty()) {
        throw Error(ErrorKind::Internal, "InvalidMatrix",
                    "assembled matrix failed validation: " + violations.front().message,
                    {{"violations", violations}});
    }
    result.transcript = list_recorder.records();
    for (const auto& r : recorders) {
        auto records = r.records();
        result.transcript.insert(result.transcript.end(), records.begin(), records.end());
    }
    return result;
}

}  // namespace tmc
