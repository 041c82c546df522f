#pragma once

// Prompt templates, saturation, the prompt library, and cumulative chains.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tmc/backend.hpp"
#include "tmc/model.hpp"
#include "tmc/transcript.hpp"

namespace tmc {

struct OutputContract {
    enum class Kind { FreeText, ItemList, StructuredDocument };
    Kind kind = Kind::FreeText;
    std::string schema;  // StructuredDocument only

    bool operator==(const OutputContract&) const = default;

    // "free_text", "item_list", "structured:<SchemaName>"
    static std::optional<OutputContract> parse(std::string_view text);
    std::string to_string() const;
    // The schema complete_structured should enforce, if any.
    std::optional<StructuredSchema> structured_schema() const;
};

// Placeholders are written {{name}}; names match [A-Za-z_][A-Za-z0-9_.]*.
std::set<std::string> find_placeholders(std::string_view body);

class PromptTemplate {
public:
    PromptTemplate(std::string key, std::string body, OutputContract contract = {},
                   std::string description = {});

    const std::string& key() const { return key_; }
    const std::string& body() const { return body_; }
    const std::set<std::string>& placeholders() const { return placeholders_; }
    const OutputContract& output_contract() const { return contract_; }
    const std::string& description() const { return description_; }

    bool operator==(const PromptTemplate&) const = default;

private:
    std::string key_;
    std::string body_;
    std::set<std::string> placeholders_;
    OutputContract contract_;
    std::string description_;
};

using Bindings = std::map<std::string, std::string>;

// Substitutes every placeholder with its binding verbatim; bound text is not
// rescanned. Throws UnboundPlaceholder / EmptyBinding.
std::string render_template(const PromptTemplate& tmpl, const Bindings& bindings);

namespace keys {
inline constexpr const char* kDiag = "P_diag";
inline constexpr const char* kText = "P_text";
inline constexpr const char* kSor = "P_sor";
inline constexpr const char* kDesc = "P_desc";
inline constexpr const char* kCyberBaseline = "P_cyber.baseline";
inline constexpr const char* kCia = "P_cia";
inline constexpr const char* kStride = "P_stride";
inline constexpr const char* kChainAppDetails = "P_chain.app_details";
inline constexpr const char* kChainKeyFeatures = "P_chain.key_features";
inline constexpr const char* kChainInScope = "P_chain.in_scope";
}  // namespace keys

const std::vector<std::string>& required_template_keys();

class PromptLibrary {
public:
    // Validates invariants: required keys present, every role target exists.
    // Throws MissingRequiredTemplates or ValidationError.
    PromptLibrary(std::string version, std::vector<PromptTemplate> templates,
                  std::vector<CyberRole> roles);

    const std::string& version() const { return version_; }
    const std::map<std::string, PromptTemplate>& templates() const { return templates_; }
    const std::vector<CyberRole>& roles() const { return roles_; }

    const PromptTemplate* find(std::string_view key) const;
    // Throws NotFound.
    const PromptTemplate& at(std::string_view key) const;
    const CyberRole* role(std::string_view role_id) const;
    // Role id -> P_cyber template key.
    std::map<std::string, std::string> role_index() const;

private:
    std::string version_;
    std::map<std::string, PromptTemplate> templates_;
    std::vector<CyberRole> roles_;
};

// Library file format (UTF-8, TOML subset):
//
//   version = "2026.1"
//
//   [roles.baseline_threat_modeler]
//   display_name = "Experienced threat modeler"
//   prompt_key = "P_cyber.baseline"
//
//   [templates."P_diag"]
//   output_contract = "free_text"
//   description = "..."
//   body = """
//   multi-line text with {{placeholders}}
//   """
//
// Throws ParseError (with line/column) or MissingRequiredTemplates.
PromptLibrary parse_prompt_library(std::string_view text);
PromptLibrary load_prompt_library(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Cumulative chains

struct ChainStep {
    std::string template_key;
    std::string output_name;
};

struct ChainSpec {
    std::vector<ChainStep> steps;
};

inline constexpr const char* kAccumulatedBinding = "accumulated";

// "\n\n### <output_name>\n"
std::string chain_section_header(std::string_view output_name);

struct ChainOptions {
    RequestParams params;
    int structured_attempts = 3;
};

struct ChainResult {
    // Output text per step, in step order. ItemList outputs are normalized to
    // "- item" lines.
    std::vector<std::pair<std::string, std::string>> outputs;
    // Parsed values for steps whose template declares a structured contract.
    std::map<std::string, nlohmann::json> structured;
    std::vector<TranscriptRecord> transcript;

    const std::string& output(std::string_view name) const;
};

// Runs the chain sequentially. Step i is saturated with the seed, every prior
// output by name, and "accumulated" = seed followed by each prior output under
// its section header. All bindings are checked before any backend call.
// Throws ChainBindingError, or backend errors tagged with the failing step.
ChainResult run_chain(const ChainSpec& chain, const std::string& seed_name,
                      const std::string& seed_text, const PromptLibrary& library,
                      ModelBackend& backend, const ChainOptions& options = {});

}  // namespace tmc
