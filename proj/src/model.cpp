#include "tmc/model.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

std::string squash(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isspace(c) || c == '_' || c == '-') continue;
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

const json& field(const json& j, const char* key, const char* owner) {
    if (!j.is_object()) throw parse_error(std::string(owner) + " must be a JSON object");
    auto it = j.find(key);
    if (it == j.end()) throw parse_error(std::string(owner) + " is missing '" + key + "'");
    return *it;
}

std::string string_field(const json& j, const char* key, const char* owner) {
    const auto& v = field(j, key, owner);
    if (!v.is_string()) throw parse_error(std::string(owner) + "." + key + " must be a string");
    return v.get<std::string>();
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw parse_error(where + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string()) throw parse_error(where + " must be an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::string csv_cell(std::string_view s) {
    bool quote = s.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!quote) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_cell(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else if (c == '\n') out += "<br>";
        else if (c != '\r') out += c;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Categories

std::string_view to_string(CiaCategory c) {
    switch (c) {
        case CiaCategory::Confidentiality: return "Confidentiality";
        case CiaCategory::Integrity: return "Integrity";
        case CiaCategory::Availability: return "Availability";
    }
    return "";
}

std::string_view to_string(StrideCategory s) {
    switch (s) {
        case StrideCategory::Spoofing: return "Spoofing";
        case StrideCategory::Tampering: return "Tampering";
        case StrideCategory::Repudiation: return "Repudiation";
        case StrideCategory::InformationDisclosure: return "Information Disclosure";
        case StrideCategory::DenialOfService: return "Denial of Service";
        case StrideCategory::ElevationOfPrivilege: return "Elevation of Privilege";
    }
    return "";
}

const std::vector<std::string>& cia_universe() {
    static const std::vector<std::string> u = [] {
        std::vector<std::string> v;
        for (auto c : kAllCia) v.emplace_back(to_string(c));
        return v;
    }();
    return u;
}

const std::vector<std::string>& stride_universe() {
    static const std::vector<std::string> u = [] {
        std::vector<std::string> v;
        for (auto s : kAllStride) v.emplace_back(to_string(s));
        return v;
    }();
    return u;
}

std::optional<std::string> canonical_label(const std::vector<std::string>& universe,
                                           std::string_view raw) {
    const std::string key = squash(raw);
    if (key.empty()) return std::nullopt;
    for (const auto& label : universe) {
        if (squash(label) == key) return label;
    }
    if (key.size() == 1) {
        const std::string* hit = nullptr;
        for (const auto& label : universe) {
            auto sq = squash(label);
            if (!sq.empty() && sq.front() == key.front()) {
                if (hit) return std::nullopt;
                hit = &label;
            }
        }
        if (hit) return *hit;
    }
    return std::nullopt;
}

std::optional<CiaCategory> parse_cia(std::string_view text) {
    auto label = canonical_label(cia_universe(), text);
    if (!label) return std::nullopt;
    for (auto c : kAllCia) {
        if (to_string(c) == *label) return c;
    }
    return std::nullopt;
}

std::optional<StrideCategory> parse_stride(std::string_view text) {
    auto label = canonical_label(stride_universe(), text);
    if (!label) return std::nullopt;
    for (auto s : kAllStride) {
        if (to_string(s) == *label) return s;
    }
    return std::nullopt;
}

std::vector<std::string> order_by_universe(const std::vector<std::string>& universe,
                                           std::vector<std::string> labels) {
    auto rank = [&](const std::string& l) {
        auto it = std::find(universe.begin(), universe.end(), l);
        return static_cast<std::size_t>(it - universe.begin());
    };
    std::stable_sort(labels.begin(), labels.end(),
                     [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
    return labels;
}

// ---------------------------------------------------------------------------
// SorRecord

std::vector<std::string> SorRecord::violations() const {
    std::vector<std::string> out;
    if (text::trim(system_name).empty()) out.push_back("system_name is empty");
    if (components.empty()) out.push_back("record has no components");
    std::set<std::string> names;
    for (const auto& c : components) {
        if (text::trim(c.name).empty()) out.push_back("component with empty name");
        else if (!names.insert(c.name).second) out.push_back("duplicate component '" + c.name + "'");
    }
    for (const auto& conn : connections) {
        for (const auto* end : {&conn.from, &conn.to}) {
            if (!names.count(*end)) {
                out.push_back("connection " + conn.from + " -> " + conn.to +
                              " references unknown component '" + *end + "'");
            }
        }
    }
    return out;
}

void to_json(json& j, const SorRecord& r) {
    j = json::object();
    j["system_name"] = r.system_name;
    j["components"] = json::array();
    for (const auto& c : r.components) {
        j["components"].push_back(
            {{"name", c.name}, {"kind", c.kind}, {"description", c.description}});
    }
    j["connections"] = json::array();
    for (const auto& c : r.connections) {
        j["connections"].push_back({{"from", c.from}, {"to", c.to}, {"protocol", c.protocol}});
    }
    j["data_classifications"] = r.data_classifications;
}

void from_json(const json& j, SorRecord& r) {
    r.system_name = string_field(j, "system_name", "record");
    r.components.clear();
    r.connections.clear();
    const auto& comps = field(j, "components", "record");
    if (!comps.is_array()) throw parse_error("record.components must be an array");
    for (const auto& c : comps) {
        r.components.push_back({string_field(c, "name", "component"),
                                c.value("kind", std::string{}),
                                c.value("description", std::string{})});
    }
    if (auto it = j.find("connections"); it != j.end()) {
        if (!it->is_array()) throw parse_error("record.connections must be an array");
        for (const auto& c : *it) {
            r.connections.push_back({string_field(c, "from", "connection"),
                                     string_field(c, "to", "connection"),
                                     c.value("protocol", std::string{})});
        }
    }
    r.data_classifications.clear();
    if (auto it = j.find("data_classifications"); it != j.end()) {
        r.data_classifications = string_list(*it, "record.data_classifications");
    }
}

// ---------------------------------------------------------------------------
// SystemRepresentation

std::string_view to_string(RepresentationKind k) {
    switch (k) {
        case RepresentationKind::Diagram: return "diagram";
        case RepresentationKind::FreeText: return "text";
        case RepresentationKind::SystemOfRecord: return "sor";
    }
    return "";
}

std::optional<RepresentationKind> parse_representation_kind(std::string_view text) {
    auto t = text::to_lower(text);
    if (t == "diagram") return RepresentationKind::Diagram;
    if (t == "text" || t == "freetext" || t == "free_text") return RepresentationKind::FreeText;
    if (t == "sor" || t == "systemofrecord" || t == "system_of_record") {
        return RepresentationKind::SystemOfRecord;
    }
    return std::nullopt;
}

SystemRepresentation SystemRepresentation::diagram(DiagramImage image, std::string source_label) {
    if (image.bytes.empty()) throw validation_error("diagram payload is empty");
    if (image.media_type != "image/png" && image.media_type != "image/jpeg") {
        throw validation_error("unsupported diagram media type '" + image.media_type + "'");
    }
    return {std::move(image), std::move(source_label)};
}

SystemRepresentation SystemRepresentation::free_text(std::string text, std::string source_label) {
    if (text::trim(text).empty()) throw validation_error("text payload is empty");
    return {std::move(text), std::move(source_label)};
}

SystemRepresentation SystemRepresentation::system_of_record(SorRecord record,
                                                            std::string source_label) {
    auto problems = record.violations();
    if (!problems.empty()) {
        throw validation_error("invalid system-of-record: " + text::join(problems, "; "),
                               {{"violations", problems}});
    }
    return {std::move(record), std::move(source_label)};
}

RepresentationKind SystemRepresentation::kind() const {
    switch (payload_.index()) {
        case 0: return RepresentationKind::Diagram;
        case 1: return RepresentationKind::FreeText;
        default: return RepresentationKind::SystemOfRecord;
    }
}

// ---------------------------------------------------------------------------
// SolutionDescription

std::vector<std::string> SolutionDescription::violations() const {
    std::vector<std::string> out;
    auto blank = [](const std::string& s) { return text::trim(s).empty(); };
    if (blank(architecture_description)) out.push_back("architecture_description is empty");
    if (blank(application_details)) out.push_back("application_details is empty");
    if (blank(composed_text)) out.push_back("composed_text is empty");
    if (key_features.empty()) out.push_back("key_features has no items");
    if (in_scope_components.empty()) out.push_back("in_scope_components has no items");
    for (const auto& k : key_features) {
        if (blank(k)) out.push_back("key_features contains an empty item");
    }
    for (const auto& c : in_scope_components) {
        if (blank(c)) out.push_back("in_scope_components contains an empty item");
    }
    if (composed_text.size() < application_details.size()) {
        out.push_back("composed_text is shorter than application_details");
    }
    return out;
}

void to_json(json& j, const SolutionDescription& s) {
    j = {{"architecture_description", s.architecture_description},
         {"application_details", s.application_details},
         {"key_features", s.key_features},
         {"in_scope_components", s.in_scope_components},
         {"composed_text", s.composed_text}};
}

void from_json(const json& j, SolutionDescription& s) {
    s.architecture_description = string_field(j, "architecture_description", "solution");
    s.application_details = string_field(j, "application_details", "solution");
    s.key_features = string_list(field(j, "key_features", "solution"), "key_features");
    s.in_scope_components =
        string_list(field(j, "in_scope_components", "solution"), "in_scope_components");
    s.composed_text = string_field(j, "composed_text", "solution");
}

// ---------------------------------------------------------------------------
// ThreatMatrix

const MappingColumn* ThreatMatrix::column(std::string_view name) const {
    for (const auto& c : columns) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

const ThreatScenario* ThreatMatrix::scenario(int id) const {
    for (const auto& s : scenarios) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

ThreatMatrix append_mapping_column(ThreatMatrix matrix, MappingColumn column) {
    if (column.values.size() != matrix.rows()) {
        throw length_mismatch(matrix.rows(), column.values.size());
    }
    if (matrix.column(column.name)) throw duplicate_column(column.name);
    matrix.columns.push_back(std::move(column));
    return matrix;
}

std::vector<MatrixViolation> validate_matrix(const ThreatMatrix& matrix) {
    std::vector<MatrixViolation> out;
    for (std::size_t i = 0; i < matrix.scenarios.size(); ++i) {
        const auto& s = matrix.scenarios[i];
        const int expected = static_cast<int>(i) + 1;
        if (s.id != expected) {
            out.push_back({s.id, std::nullopt,
                           "scenario at position " + std::to_string(expected) + " has id " +
                               std::to_string(s.id) + " (ids must be contiguous from 1)"});
        }
        if (text::trim(s.description).empty()) {
            out.push_back({s.id, std::nullopt, "empty scenario description"});
        }
    }
    std::set<std::string> seen;
    for (const auto& col : matrix.columns) {
        if (!seen.insert(col.name).second) {
            out.push_back({std::nullopt, col.name, "duplicate column name '" + col.name + "'"});
        }
        if (col.values.size() != matrix.rows()) {
            out.push_back({std::nullopt, col.name,
                           "column has " + std::to_string(col.values.size()) +
                               " values for " + std::to_string(matrix.rows()) + " rows"});
        }
        std::set<std::string> universe(col.label_universe.begin(), col.label_universe.end());
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            const int row = i < matrix.rows() ? matrix.scenarios[i].id : static_cast<int>(i) + 1;
            const auto& value = col.values[i];
            if (value.empty()) {
                out.push_back({row, col.name, "empty label set"});
                continue;
            }
            std::set<std::string> distinct;
            for (const auto& label : value) {
                if (!universe.count(label)) {
                    out.push_back({row, col.name, "label '" + label + "' outside universe"});
                }
                if (!distinct.insert(label).second) {
                    out.push_back({row, col.name, "label '" + label + "' repeated"});
                }
            }
        }
    }
    return out;
}

void to_json(json& j, const ThreatScenario& s) {
    j = {{"id", s.id}, {"description", s.description}, {"related_components", s.related_components}};
}

void from_json(const json& j, ThreatScenario& s) {
    const auto& id = field(j, "id", "scenario");
    if (!id.is_number_integer()) throw parse_error("scenario.id must be an integer");
    s.id = id.get<int>();
    s.description = string_field(j, "description", "scenario");
    s.related_components.clear();
    if (auto it = j.find("related_components"); it != j.end()) {
        s.related_components = string_list(*it, "scenario.related_components");
    }
}

void to_json(json& j, const MappingColumn& c) {
    j = {{"name", c.name}, {"label_universe", c.label_universe}, {"values", c.values}};
}

void from_json(const json& j, MappingColumn& c) {
    c.name = string_field(j, "name", "column");
    c.label_universe = string_list(field(j, "label_universe", "column"), "column.label_universe");
    const auto& values = field(j, "values", "column");
    if (!values.is_array()) throw parse_error("column.values must be an array");
    c.values.clear();
    for (const auto& v : values) c.values.push_back(string_list(v, "column.values[]"));
}

void to_json(json& j, const ThreatMatrix& m) {
    j = json::object();
    j["system_label"] = m.system_label;
    j["scenarios"] = m.scenarios;
    j["columns"] = m.columns;
}

void from_json(const json& j, ThreatMatrix& m) {
    m.system_label = string_field(j, "system_label", "matrix");
    const auto& scenarios = field(j, "scenarios", "matrix");
    const auto& columns = field(j, "columns", "matrix");
    if (!scenarios.is_array() || !columns.is_array()) {
        throw parse_error("matrix.scenarios and matrix.columns must be arrays");
    }
    m.scenarios.clear();
    for (const auto& s : scenarios) m.scenarios.push_back(s.get<ThreatScenario>());
    m.columns.clear();
    for (const auto& c : columns) m.columns.push_back(c.get<MappingColumn>());
}

void to_json(json& j, const MatrixViolation& v) {
    j = {{"message", v.message}};
    j["row"] = v.row ? json(*v.row) : json(nullptr);
    j["column"] = v.column ? json(*v.column) : json(nullptr);
}

std::string matrix_to_json(const ThreatMatrix& matrix) {
    return json(matrix).dump(2) + "\n";
}

ThreatMatrix matrix_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error(std::string("matrix JSON: ") + e.what());
    }
    return doc.get<ThreatMatrix>();
}

std::string matrix_to_csv(const ThreatMatrix& matrix) {
    std::ostringstream out;
    out << "id,description";
    for (const auto& c : matrix.columns) out << ',' << csv_cell(c.name);
    out << "\r\n";
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        const auto& s = matrix.scenarios[i];
        out << s.id << ',' << csv_cell(s.description);
        for (const auto& c : matrix.columns) {
            out << ',' << csv_cell(i < c.values.size() ? text::join(c.values[i], "|") : "");
        }
        out << "\r\n";
    }
    return out.str();
}

std::string matrix_to_markdown(const ThreatMatrix& matrix) {
    std::ostringstream out;
    out << "# Threat matrix: " << md_cell(matrix.system_label) << "\n\n";
    out << "| # | Threat scenario |";
    for (const auto& c : matrix.columns) out << ' ' << md_cell(c.name) << " |";
    out << "\n|---|---|";
    for (std::size_t k = 0; k < matrix.columns.size(); ++k) out << "---|";
    out << '\n';
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        const auto& s = matrix.scenarios[i];
        out << "| " << s.id << " | " << md_cell(s.description) << " |";
        for (const auto& c : matrix.columns) {
            out << ' ' << md_cell(i < c.values.size() ? text::join(c.values[i], ", ") : "")
                << " |";
        }
        out << '\n';
    }
    return out.str();
}

const std::vector<CyberRole>& builtin_roles() {
    static const std::vector<CyberRole> roles = {
        {"baseline_threat_modeler", "Experienced threat modeler (baseline)", "P_cyber.baseline"},
        {"cloud_security_analyst", "Cloud security analyst", "P_cyber.cloud"},
        {"network_security_analyst", "Network security analyst", "P_cyber.network"},
    };
    return roles;
}

}  // namespace tmc
