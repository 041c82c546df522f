#pragma once

// Normalizes raw user input into a validated SystemRepresentation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include <json.hpp>

#include "tmc/model.hpp"

namespace tmc {

struct IngestLimits {
    std::size_t max_diagram_bytes = 10 * 1024 * 1024;
    std::size_t max_text_chars = 200'000;
};

struct FilePath {
    std::filesystem::path path;
};
struct InlineText {
    std::string text;
};
struct InlineRecord {
    nlohmann::json document;
};
struct InlineBytes {
    std::vector<std::uint8_t> bytes;
    std::string label;  // e.g. uploaded file name
};

struct RawInput {
    std::variant<FilePath, InlineText, InlineRecord, InlineBytes> source;
    std::optional<RepresentationKind> kind_hint;
};

// Media type from magic bytes: "image/png", "image/jpeg", or empty.
std::string sniff_image_type(std::span<const std::uint8_t> bytes);

// Throws UnsupportedMediaType, OversizeInput, EmptyInput, SorValidationError,
// NotFound (missing file).
SystemRepresentation ingest(const RawInput& raw, const IngestLimits& limits = {});

// Canonical JSON for a representation (diagram bytes base64-encoded) and back.
nlohmann::json representation_to_json(const SystemRepresentation& rep);
SystemRepresentation representation_from_json(const nlohmann::json& j);

}  // namespace tmc
