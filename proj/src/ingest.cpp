#include "tmc/ingest.hpp"

#include <array>

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

Error unsupported_media(const std::string& message) {
    return Error(ErrorKind::Validation, "UnsupportedMediaType", message);
}

Error oversize(std::size_t size, std::size_t limit, const char* unit) {
    return Error(ErrorKind::Validation, "OversizeInput",
                 "input of " + std::to_string(size) + " " + unit + " exceeds limit of " +
                     std::to_string(limit),
                 {{"size", size}, {"limit", limit}, {"unit", unit}});
}

Error empty_input() { return Error(ErrorKind::Validation, "EmptyInput", "input is empty"); }

Error sor_invalid(const std::vector<std::string>& problems) {
    return Error(ErrorKind::Validation, "SorValidationError",
                 "invalid system-of-record: " + text::join(problems, "; "),
                 {{"violations", problems}});
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

// Rejects NUL bytes and malformed UTF-8, the usual signs of a binary file.
bool plausible_text(std::span<const std::uint8_t> bytes) {
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto c = bytes[i];
        if (c == 0) return false;
        std::size_t extra = 0;
        if (c >= 0x80) {
            if ((c >> 5) == 0x6) extra = 1;
            else if ((c >> 4) == 0xE) extra = 2;
            else if ((c >> 3) == 0x1E) extra = 3;
            else return false;
        }
        if (i + extra >= bytes.size() && extra > 0) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((bytes[i + k] & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

bool looks_like_record(const json& doc) {
    return doc.is_object() && doc.contains("system_name") && doc.contains("components");
}

SystemRepresentation record_from_json(const json& doc, const std::string& label) {
    SorRecord record;
    try {
        record = doc.get<SorRecord>();
    } catch (const Error& e) {
        throw sor_invalid({e.what()});
    } catch (const json::exception& e) {
        throw sor_invalid({e.what()});
    }
    auto problems = record.violations();
    if (!problems.empty()) throw sor_invalid(problems);
    auto name = label.empty() ? record.system_name : label;
    return SystemRepresentation::system_of_record(std::move(record), std::move(name));
}

SystemRepresentation from_text(std::string content, const std::optional<RepresentationKind>& hint,
                               const std::string& label, const IngestLimits& limits) {
    if (text::trim(content).empty()) throw empty_input();
    const auto chars = utf8_length(content);
    if (chars > limits.max_text_chars) throw oversize(chars, limits.max_text_chars, "characters");

    if (hint == RepresentationKind::Diagram) {
        throw unsupported_media("input is not a PNG or JPEG image");
    }
    if (hint != RepresentationKind::FreeText) {
        json doc = json::parse(content, nullptr, false);
        if (!doc.is_discarded() && looks_like_record(doc)) return record_from_json(doc, label);
        if (hint == RepresentationKind::SystemOfRecord) {
            if (doc.is_discarded()) throw sor_invalid({"input is not a JSON document"});
            throw sor_invalid({"document lacks system_name/components"});
        }
    }
    return SystemRepresentation::free_text(std::move(content),
                                           label.empty() ? "inline text" : label);
}

SystemRepresentation from_bytes(std::vector<std::uint8_t> bytes,
                                const std::optional<RepresentationKind>& hint,
                                const std::string& label, const IngestLimits& limits) {
    if (bytes.empty()) throw empty_input();
    auto media = sniff_image_type(bytes);
    if (!media.empty()) {
        if (hint && *hint != RepresentationKind::Diagram) {
            throw unsupported_media("input is a " + media + " image but kind '" +
                                    std::string(to_string(*hint)) + "' was requested");
        }
        if (bytes.size() > limits.max_diagram_bytes) {
            throw oversize(bytes.size(), limits.max_diagram_bytes, "bytes");
        }
        return SystemRepresentation::diagram({std::move(bytes), media},
                                             label.empty() ? "diagram" : label);
    }
    if (!plausible_text(bytes)) {
        throw unsupported_media("input is neither a PNG/JPEG image nor UTF-8 text");
    }
    return from_text(std::string(bytes.begin(), bytes.end()), hint, label, limits);
}

}  // namespace

std::string sniff_image_type(std::span<const std::uint8_t> bytes) {
    static constexpr std::array<std::uint8_t, 8> kPng = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= kPng.size() && std::equal(kPng.begin(), kPng.end(), bytes.begin())) {
        return "image/png";
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        return "image/jpeg";
    }
    return {};
}

SystemRepresentation ingest(const RawInput& raw, const IngestLimits& limits) {
    return std::visit(
        [&](const auto& src) -> SystemRepresentation {
            using T = std::decay_t<decltype(src)>;
            if constexpr (std::is_same_v<T, FilePath>) {
                std::error_code ec;
                if (!std::filesystem::is_regular_file(src.path, ec)) {
                    throw not_found("input file '" + src.path.string() + "'");
                }
                return from_bytes(text::read_file_bytes(src.path), raw.kind_hint,
                                  src.path.filename().string(), limits);
            } else if constexpr (std::is_same_v<T, InlineText>) {
                return from_text(src.text, raw.kind_hint, "", limits);
            } else if constexpr (std::is_same_v<T, InlineBytes>) {
                return from_bytes(src.bytes, raw.kind_hint, src.label, limits);
            } else {
                if (raw.kind_hint && *raw.kind_hint != RepresentationKind::SystemOfRecord) {
                    throw unsupported_media("inline record cannot be ingested as '" +
                                            std::string(to_string(*raw.kind_hint)) + "'");
                }
                if (src.document.is_null() ||
                    (src.document.is_object() && src.document.empty())) {
                    throw empty_input();
                }
                return record_from_json(src.document, "");
            }
        },
        raw.source);
}

json representation_to_json(const SystemRepresentation& rep) {
    json j = {{"kind", to_string(rep.kind())}, {"source_label", rep.source_label()}};
    switch (rep.kind()) {
        case RepresentationKind::Diagram:
            j["media_type"] = rep.diagram().media_type;
            j["data"] = text::base64_encode(rep.diagram().bytes);
            break;
        case RepresentationKind::FreeText: j["text"] = rep.text(); break;
        case RepresentationKind::SystemOfRecord: j["record"] = rep.record(); break;
    }
    return j;
}

SystemRepresentation representation_from_json(const json& j) {
    auto kind = parse_representation_kind(j.value("kind", std::string{}));
    if (!kind) throw parse_error("representation has unknown kind");
    auto label = j.value("source_label", std::string{});
    switch (*kind) {
        case RepresentationKind::Diagram:
            return SystemRepresentation::diagram(
                {text::base64_decode(j.at("data").get<std::string>()),
                 j.at("media_type").get<std::string>()},
                label);
        case RepresentationKind::FreeText:
            return SystemRepresentation::free_text(j.at("text").get<std::string>(), label);
        case RepresentationKind::SystemOfRecord:
            return SystemRepresentation::system_of_record(j.at("record").get<SorRecord>(), label);
    }
    throw parse_error("representation has unknown kind");
}

}  // namespace tmc
