#include "tmc/stage1.hpp"

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

TranscriptHook hook_for(TranscriptRecorder* recorder, const std::string& key) {
    return recorder ? recorder->hook(key) : TranscriptHook{};
}

std::vector<std::string> string_items(const json& value) {
    std::vector<std::string> out;
    for (const auto& v : value) out.push_back(v.get<std::string>());
    return out;
}

SolutionDescription structured_solution(const std::string& template_key,
                                        const std::string& binding_name,
                                        const std::string& binding_value,
                                        const PromptLibrary& library, ModelBackend& backend,
                                        const Stage1Options& options,
                                        TranscriptRecorder* recorder) {
    const auto& tmpl = library.at(template_key);
    auto prompt = render_template(tmpl, {{binding_name, binding_value}});
    auto request = ModelRequest::user_text(std::move(prompt), options.params, template_key);
    try {
        auto res = complete_structured(backend, std::move(request),
                                       StructuredSchema::SolutionDescriptionDoc,
                                       options.structured_attempts,
                                       hook_for(recorder, template_key));
        return res.value.get<SolutionDescription>();
    } catch (...) {
        rethrow_tagged(template_key);
    }
}

}  // namespace

void to_json(json& j, const Stage1Transcript& t) {
    j = {{"input_kind", to_string(t.input_kind)}, {"records", t.records}};
}

void from_json(const json& j, Stage1Transcript& t) {
    auto kind = parse_representation_kind(j.value("input_kind", std::string{}));
    if (!kind) throw parse_error("stage-1 transcript has unknown input_kind");
    t.input_kind = *kind;
    t.records = j.value("records", std::vector<TranscriptRecord>{});
}

ChainSpec stage1_chain_spec() {
    return {{
        {keys::kChainAppDetails, "application_details"},
        {keys::kChainKeyFeatures, "key_features"},
        {keys::kChainInScope, "in_scope_components"},
    }};
}

std::string render_item_list(const std::vector<std::string>& items) {
    std::vector<std::string> lines;
    lines.reserve(items.size());
    for (const auto& item : items) lines.push_back("- " + item);
    return text::join(lines, "\n");
}

std::string decompose_diagram(const SystemRepresentation& rep, const PromptLibrary& library,
                              ModelBackend& backend, const Stage1Options& options,
                              TranscriptRecorder* recorder) {
    if (rep.kind() != RepresentationKind::Diagram) {
        throw precondition_failed("decompose_diagram needs a diagram representation");
    }
    if (!backend.capabilities().multimodal) {
        throw capability_error("backend '" + backend.id() +
                               "' cannot read images; diagram decomposition needs a multimodal "
                               "model");
    }
    const auto& image = rep.diagram();
    const auto& tmpl = library.at(keys::kDiag);
    const std::string context = "The attached diagram is '" + rep.source_label() + "' (" +
                                image.media_type + ", " + std::to_string(image.bytes.size()) +
                                " bytes).";
    auto prompt = render_template(tmpl, {{"diagram_context", context}});

    ModelRequest request;
    request.messages.push_back(
        {MessageRole::User, {TextPart{std::move(prompt)}, ImagePart{image.bytes, image.media_type}}});
    request.params = options.params;
    request.tag = keys::kDiag;
    try {
        return complete(backend, request, hook_for(recorder, keys::kDiag)).text;
    } catch (...) {
        rethrow_tagged(keys::kDiag);
    }
}

ChainArtifacts run_stage1_chain(const std::string& architecture_description,
                                const PromptLibrary& library, ModelBackend& backend,
                                const Stage1Options& options) {
    if (text::trim(architecture_description).empty()) {
        throw precondition_failed("architecture description is empty");
    }
    ChainOptions chain_options{options.params, options.structured_attempts};
    auto result = run_chain(stage1_chain_spec(), "architecture_description",
                            architecture_description, library, backend, chain_options);

    auto list_output = [&](const char* name) -> std::vector<std::string> {
        auto it = result.structured.find(name);
        if (it == result.structured.end()) {
            throw validation_error(std::string("template for '") + name +
                                   "' must declare an item_list contract");
        }
        return string_items(it->second);
    };
    ChainArtifacts out;
    out.application_details = result.output("application_details");
    out.key_features = list_output("key_features");
    out.in_scope_components = list_output("in_scope_components");
    out.transcript = std::move(result.transcript);
    return out;
}

SolutionDescription compose_solution_description(const std::string& architecture_description,
                                                 const std::string& application_details,
                                                 const std::vector<std::string>& key_features,
                                                 const std::vector<std::string>& in_scope,
                                                 const PromptLibrary& library,
                                                 ModelBackend& backend,
                                                 const Stage1Options& options,
                                                 TranscriptRecorder* recorder) {
    SolutionDescription sol;
    sol.architecture_description = architecture_description;
    sol.application_details = application_details;
    sol.key_features = key_features;
    sol.in_scope_components = in_scope;
    sol.composed_text = application_details;  // stand-in so only the inputs are checked
    if (auto problems = sol.violations(); !problems.empty()) {
        throw precondition_failed("cannot compose solution description: " +
                                  text::join(problems, "; "));
    }

    const auto& tmpl = library.at(keys::kDesc);
    auto prompt = render_template(tmpl, {{"architecture_description", architecture_description},
                                         {"application_details", application_details},
                                         {"key_features", render_item_list(key_features)},
                                         {"in_scope_components", render_item_list(in_scope)}});
    auto request = ModelRequest::user_text(std::move(prompt), options.params, keys::kDesc);
    try {
        sol.composed_text = complete(backend, request, hook_for(recorder, keys::kDesc)).text;
    } catch (...) {
        rethrow_tagged(keys::kDesc);
    }
    if (auto problems = sol.violations(); !problems.empty()) {
        throw validation_error("composed solution description is invalid: " +
                               text::join(problems, "; "));
    }
    return sol;
}

SolutionDescription solution_from_text(const SystemRepresentation& rep,
                                       const PromptLibrary& library, ModelBackend& backend,
                                       const Stage1Options& options,
                                       TranscriptRecorder* recorder) {
    if (rep.kind() != RepresentationKind::FreeText) {
        throw precondition_failed("solution_from_text needs a free-text representation");
    }
    return structured_solution(keys::kText, "system_text", rep.text(), library, backend, options,
                               recorder);
}

SolutionDescription solution_from_sor(const SystemRepresentation& rep,
                                      const PromptLibrary& library, ModelBackend& backend,
                                      const Stage1Options& options,
                                      TranscriptRecorder* recorder) {
    if (rep.kind() != RepresentationKind::SystemOfRecord) {
        throw precondition_failed("solution_from_sor needs a system-of-record representation");
    }
    return structured_solution(keys::kSor, "system_record", json(rep.record()).dump(2), library,
                               backend, options, recorder);
}

Stage1Result run_stage1(const SystemRepresentation& rep, const PromptLibrary& library,
                        ModelBackend& backend, const Stage1Options& options) {
    TranscriptRecorder recorder;
    Stage1Result result;
    result.transcript.input_kind = rep.kind();
    switch (rep.kind()) {
        case RepresentationKind::Diagram: {
            auto ad = decompose_diagram(rep, library, backend, options, &recorder);
            auto chain = run_stage1_chain(ad, library, backend, options);
            recorder.append(chain.transcript);
            result.solution = compose_solution_description(
                ad, chain.application_details, chain.key_features, chain.in_scope_components,
                library, backend, options, &recorder);
            break;
        }
        case RepresentationKind::FreeText:
            result.solution = solution_from_text(rep, library, backend, options, &recorder);
            break;
        case RepresentationKind::SystemOfRecord:
            result.solution = solution_from_sor(rep, library, backend, options, &recorder);
            break;
    }
    result.transcript.records = recorder.records();
    return result;
}

}  // namespace tmc
