#pragma once

// Stage 2: solution description -> threat matrix.
//
// A role-specific prompt produces the threat list; each mapping column is then
// produced by its own prompt saturated with the solution description and the
// full numbered list. Mapping calls are independent of each other.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmc/backend.hpp"
#include "tmc/model.hpp"
#include "tmc/prompt.hpp"
#include "tmc/transcript.hpp"

namespace tmc {

// A mapping column is a (prompt, label universe) pair; CIA and STRIDE are
// built in, further mappings plug in the same way.
struct MappingSpec {
    std::string name;
    std::string prompt_key;
    std::vector<std::string> label_universe;
    bool operator==(const MappingSpec&) const = default;
};

MappingSpec cia_mapping();
MappingSpec stride_mapping();
// "CIA" or "STRIDE", case-insensitive.
std::optional<MappingSpec> builtin_mapping(std::string_view name);

struct Stage2Config {
    std::string role = "baseline_threat_modeler";
    int min_scenarios = 25;
    int max_scenarios = 40;
    std::vector<MappingSpec> mappings = {cia_mapping(), stride_mapping()};
    bool parallel_mappings = true;

    // Throws ValidationError.
    void validate() const;
};

void to_json(nlohmann::json& j, const Stage2Config& c);
void from_json(const nlohmann::json& j, Stage2Config& c);

struct Stage2Options {
    RequestParams params;
    int structured_attempts = 3;
};

// "1. first scenario\n2. second scenario"
std::string render_scenario_list(const std::vector<ThreatScenario>& scenarios);

// Throws PreconditionFailed (unknown role), ScenarioCountOutOfRange,
// StructuredOutputFailure.
std::vector<ThreatScenario> generate_threat_list(const SolutionDescription& sol,
                                                 const Stage2Config& config,
                                                 const PromptLibrary& library,
                                                 ModelBackend& backend,
                                                 const Stage2Options& options = {},
                                                 TranscriptRecorder* recorder = nullptr);

// Throws MissingAssignment, UnknownLabel, StructuredOutputFailure.
MappingColumn map_categories(const SolutionDescription& sol,
                             const std::vector<ThreatScenario>& scenarios,
                             const MappingSpec& mapping, const PromptLibrary& library,
                             ModelBackend& backend, const Stage2Options& options = {},
                             TranscriptRecorder* recorder = nullptr);

struct Stage2Result {
    ThreatMatrix matrix;
    std::vector<TranscriptRecord> transcript;
};

Stage2Result run_stage2(const SolutionDescription& sol, const Stage2Config& config,
                        const PromptLibrary& library, ModelBackend& backend,
                        const std::string& system_label, const Stage2Options& options = {});

}  // namespace tmc
