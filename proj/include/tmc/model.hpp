#pragma once

// Core data model: system representations, solution descriptions, threat
// scenarios and the column-extensible threat matrix.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace tmc {

// ---------------------------------------------------------------------------
// Categories

enum class CiaCategory { Confidentiality, Integrity, Availability };

enum class StrideCategory {
    Spoofing,
    Tampering,
    Repudiation,
    InformationDisclosure,
    DenialOfService,
    ElevationOfPrivilege,
};

inline constexpr std::array<CiaCategory, 3> kAllCia = {
    CiaCategory::Confidentiality, CiaCategory::Integrity, CiaCategory::Availability};

inline constexpr std::array<StrideCategory, 6> kAllStride = {
    StrideCategory::Spoofing,        StrideCategory::Tampering,
    StrideCategory::Repudiation,     StrideCategory::InformationDisclosure,
    StrideCategory::DenialOfService, StrideCategory::ElevationOfPrivilege};

std::string_view to_string(CiaCategory c);
std::string_view to_string(StrideCategory s);

// Accept display names, enum identifiers, and single-letter abbreviations
// (C/I/A, S/T/R/I/D/E), case-insensitively.
std::optional<CiaCategory> parse_cia(std::string_view text);
std::optional<StrideCategory> parse_stride(std::string_view text);

// Display-name universes used by the CIA and STRIDE mapping columns.
const std::vector<std::string>& cia_universe();
const std::vector<std::string>& stride_universe();

// Resolves `raw` against an arbitrary label universe. Matching ignores case,
// whitespace, '_' and '-'; a single letter matches when exactly one label
// starts with it. Returns the canonical display name.
std::optional<std::string> canonical_label(const std::vector<std::string>& universe,
                                           std::string_view raw);

// Sorts a label subset into universe order. Labels outside the universe are
// kept at the end in input order so validation can still report them.
std::vector<std::string> order_by_universe(const std::vector<std::string>& universe,
                                           std::vector<std::string> labels);

// ---------------------------------------------------------------------------
// System representation

struct SorComponent {
    std::string name;
    std::string kind;
    std::string description;
    bool operator==(const SorComponent&) const = default;
};

struct SorConnection {
    std::string from;
    std::string to;
    std::string protocol;
    bool operator==(const SorConnection&) const = default;
};

struct SorRecord {
    std::string system_name;
    std::vector<SorComponent> components;
    std::vector<SorConnection> connections;
    std::vector<std::string> data_classifications;

    bool operator==(const SorRecord&) const = default;

    // Empty when valid; otherwise one message per violation.
    std::vector<std::string> violations() const;
};

void to_json(nlohmann::json& j, const SorRecord& r);
// Throws ParseError when the document does not have the SorRecord shape.
void from_json(const nlohmann::json& j, SorRecord& r);

enum class RepresentationKind { Diagram, FreeText, SystemOfRecord };

std::string_view to_string(RepresentationKind k);
std::optional<RepresentationKind> parse_representation_kind(std::string_view text);

struct DiagramImage {
    std::vector<std::uint8_t> bytes;
    std::string media_type;  // image/png or image/jpeg
    bool operator==(const DiagramImage&) const = default;
};

class SystemRepresentation {
public:
    using Payload = std::variant<DiagramImage, std::string, SorRecord>;

    static SystemRepresentation diagram(DiagramImage image, std::string source_label);
    static SystemRepresentation free_text(std::string text, std::string source_label);
    static SystemRepresentation system_of_record(SorRecord record, std::string source_label);

    RepresentationKind kind() const;
    const DiagramImage& diagram() const { return std::get<DiagramImage>(payload_); }
    const std::string& text() const { return std::get<std::string>(payload_); }
    const SorRecord& record() const { return std::get<SorRecord>(payload_); }
    const std::string& source_label() const { return source_label_; }

    bool operator==(const SystemRepresentation&) const = default;

private:
    SystemRepresentation(Payload payload, std::string source_label)
        : payload_(std::move(payload)), source_label_(std::move(source_label)) {}

    Payload payload_;
    std::string source_label_;
};

// ---------------------------------------------------------------------------
// Stage 1 output

struct SolutionDescription {
    std::string architecture_description;
    std::string application_details;
    std::vector<std::string> key_features;
    std::vector<std::string> in_scope_components;
    std::string composed_text;

    bool operator==(const SolutionDescription&) const = default;

    std::vector<std::string> violations() const;
};

void to_json(nlohmann::json& j, const SolutionDescription& s);
void from_json(const nlohmann::json& j, SolutionDescription& s);

// ---------------------------------------------------------------------------
// Threat matrix

struct ThreatScenario {
    int id = 0;
    std::string description;
    std::vector<std::string> related_components;
    bool operator==(const ThreatScenario&) const = default;
};

struct MappingColumn {
    std::string name;
    std::vector<std::string> label_universe;
    std::vector<std::vector<std::string>> values;  // one label subset per scenario
    bool operator==(const MappingColumn&) const = default;
};

struct ThreatMatrix {
    std::string system_label;
    std::vector<ThreatScenario> scenarios;
    std::vector<MappingColumn> columns;

    bool operator==(const ThreatMatrix&) const = default;

    std::size_t rows() const { return scenarios.size(); }
    const MappingColumn* column(std::string_view name) const;
    const ThreatScenario* scenario(int id) const;
};

struct MatrixViolation {
    std::optional<int> row;            // scenario id, when the violation is row-scoped
    std::optional<std::string> column;
    std::string message;
    bool operator==(const MatrixViolation&) const = default;
};

// Returns a copy of `matrix` with `column` appended last.
// Throws LengthMismatch or DuplicateColumn.
ThreatMatrix append_mapping_column(ThreatMatrix matrix, MappingColumn column);

// Lists every invariant violation; an empty result means the matrix is valid.
std::vector<MatrixViolation> validate_matrix(const ThreatMatrix& matrix);

void to_json(nlohmann::json& j, const ThreatScenario& s);
void from_json(const nlohmann::json& j, ThreatScenario& s);
void to_json(nlohmann::json& j, const MappingColumn& c);
void from_json(const nlohmann::json& j, MappingColumn& c);
void to_json(nlohmann::json& j, const ThreatMatrix& m);
void from_json(const nlohmann::json& j, ThreatMatrix& m);
void to_json(nlohmann::json& j, const MatrixViolation& v);

// Canonical JSON document (2-space indent, trailing newline).
std::string matrix_to_json(const ThreatMatrix& matrix);
// Throws ParseError on malformed input.
ThreatMatrix matrix_from_json(std::string_view text);
// id, description, then one cell per mapping column with labels joined by '|'.
std::string matrix_to_csv(const ThreatMatrix& matrix);
std::string matrix_to_markdown(const ThreatMatrix& matrix);

// ---------------------------------------------------------------------------
// Cybersecurity roles

struct CyberRole {
    std::string id;
    std::string display_name;
    std::string prompt_key;
    bool operator==(const CyberRole&) const = default;
};

// baseline_threat_modeler, cloud_security_analyst, network_security_analyst
const std::vector<CyberRole>& builtin_roles();

}  // namespace tmc
