#pragma once

// Stage 1: system representation -> solution description.
//
//   Diagram        : P_diag -> ad, cumulative chain (app details, key features,
//                    in-scope components), then P_desc composes the narrative.
//   Free text      : P_text, one structured call.
//   System of record: P_sor, one structured call.

#include <string>
#include <vector>

#include <json.hpp>

#include "tmc/backend.hpp"
#include "tmc/model.hpp"
#include "tmc/prompt.hpp"
#include "tmc/transcript.hpp"

namespace tmc {

struct Stage1Options {
    RequestParams params;
    int structured_attempts = 3;
};

struct Stage1Transcript {
    RepresentationKind input_kind = RepresentationKind::Diagram;
    std::vector<TranscriptRecord> records;
};

void to_json(nlohmann::json& j, const Stage1Transcript& t);
void from_json(const nlohmann::json& j, Stage1Transcript& t);

struct Stage1Result {
    SolutionDescription solution;
    Stage1Transcript transcript;
};

// Output names of the cumulative chain, seeded with "architecture_description".
ChainSpec stage1_chain_spec();

// Items rendered one per line as "- item".
std::string render_item_list(const std::vector<std::string>& items);

// Requires a Diagram representation and a multimodal backend (CapabilityError).
std::string decompose_diagram(const SystemRepresentation& rep, const PromptLibrary& library,
                              ModelBackend& backend, const Stage1Options& options = {},
                              TranscriptRecorder* recorder = nullptr);

struct ChainArtifacts {
    std::string application_details;
    std::vector<std::string> key_features;
    std::vector<std::string> in_scope_components;
    std::vector<TranscriptRecord> transcript;
};

ChainArtifacts run_stage1_chain(const std::string& architecture_description,
                                const PromptLibrary& library, ModelBackend& backend,
                                const Stage1Options& options = {});

// Stores the four inputs verbatim; composed_text is the P_desc response.
SolutionDescription compose_solution_description(const std::string& architecture_description,
                                                 const std::string& application_details,
                                                 const std::vector<std::string>& key_features,
                                                 const std::vector<std::string>& in_scope,
                                                 const PromptLibrary& library,
                                                 ModelBackend& backend,
                                                 const Stage1Options& options = {},
                                                 TranscriptRecorder* recorder = nullptr);

SolutionDescription solution_from_text(const SystemRepresentation& rep,
                                       const PromptLibrary& library, ModelBackend& backend,
                                       const Stage1Options& options = {},
                                       TranscriptRecorder* recorder = nullptr);

SolutionDescription solution_from_sor(const SystemRepresentation& rep,
                                      const PromptLibrary& library, ModelBackend& backend,
                                      const Stage1Options& options = {},
                                      TranscriptRecorder* recorder = nullptr);

// Dispatches on the representation kind.
Stage1Result run_stage1(const SystemRepresentation& rep, const PromptLibrary& library,
                        ModelBackend& backend, const Stage1Options& options = {});

}  // namespace tmc
