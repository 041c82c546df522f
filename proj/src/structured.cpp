// Structured-output extraction and the repair loop.

#include <algorithm>
#include <cctype>
#include <regex>

#include "tmc/backend.hpp"
#include "tmc/error.hpp"
#include "tmc/model.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

// Contents of every ``` fenced block, in order.
std::vector<std::string> fenced_blocks(std::string_view raw) {
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    while (true) {
        auto open = raw.find("```", pos);
        if (open == std::string_view::npos) break;
        auto body = raw.find('\n', open);
        if (body == std::string_view::npos) break;
        auto close = raw.find("```", body + 1);
        if (close == std::string_view::npos) break;
        blocks.emplace_back(raw.substr(body + 1, close - body - 1));
        pos = close + 3;
    }
    return blocks;
}

std::optional<json> try_json(std::string_view s) {
    auto t = text::trim(s);
    if (t.empty() || (t.front() != '[' && t.front() != '{')) return std::nullopt;
    try {
        return json::parse(t);
    } catch (const json::parse_error&) {
        return std::nullopt;
    }
}

// Fenced blocks first, then the whole text, then the outermost bracket span.
std::optional<json> extract_json(std::string_view raw) {
    for (const auto& block : fenced_blocks(raw)) {
        if (auto j = try_json(block)) return j;
    }
    if (auto j = try_json(raw)) return j;
    auto first = raw.find_first_of("[{");
    if (first == std::string_view::npos) return std::nullopt;
    const char close = raw[first] == '[' ? ']' : '}';
    auto last = raw.find_last_of(close);
    if (last == std::string_view::npos || last < first) return std::nullopt;
    return try_json(raw.substr(first, last - first + 1));
}

StructuredParse fail(std::string why) { return {std::nullopt, std::move(why)}; }

// "- item", "* item", "• item", "1. item", "1) item", "(1) item"
std::optional<std::string> strip_list_marker(const std::string& line) {
    static const std::regex marker(R"(^\s*(?:[-*+•]|\(?\d{1,3}[.)])\s+(.*\S)\s*$)");
    std::smatch m;
    if (!std::regex_match(line, m, marker)) return std::nullopt;
    auto item = text::trim(m[1].str());
    // Markdown emphasis around the whole item is presentation noise.
    if (item.size() > 4 && text::starts_with(item, "**") && item.substr(item.size() - 2) == "**") {
        item = text::trim(item.substr(2, item.size() - 4));
    }
    return item;
}

StructuredParse parse_item_list(std::string_view raw) {
    if (auto doc = extract_json(raw)) {
        const json* arr = nullptr;
        if (doc->is_array()) arr = &*doc;
        else if (doc->is_object() && doc->contains("items")) arr = &(*doc)["items"];
        if (arr) {
            if (!arr->is_array()) return fail("'items' must be an array of strings");
            json out = json::array();
            for (const auto& v : *arr) {
                if (!v.is_string()) return fail("list items must be strings");
                auto item = text::trim(v.get<std::string>());
                if (item.empty()) return fail("list contains an empty item");
                out.push_back(item);
            }
            if (out.empty()) return fail("the list is empty; at least one item is required");
            return {out, {}};
        }
    }
    json out = json::array();
    for (const auto& line : text::split_lines(raw)) {
        if (auto item = strip_list_marker(line); item && !item->empty()) out.push_back(*item);
    }
    if (out.empty()) {
        return fail("no list items found; emit one item per line prefixed with '- ' or a number");
    }
    return {out, {}};
}

StructuredParse parse_scenario_list(std::string_view raw) {
    auto doc = extract_json(raw);
    if (!doc) return fail("no JSON document found; emit a fenced ```json array of scenarios");
    const json* arr = &*doc;
    if (doc->is_object() && doc->contains("scenarios")) arr = &(*doc)["scenarios"];
    if (!arr->is_array()) return fail("expected a JSON array of threat scenarios");
    json out = json::array();
    std::size_t index = 0;
    for (const auto& v : *arr) {
        ++index;
        json components = json::array();
        std::string description;
        if (v.is_string()) {
            description = v.get<std::string>();
        } else if (v.is_object() && v.contains("description") && v["description"].is_string()) {
            description = v["description"].get<std::string>();
            if (auto it = v.find("components"); it != v.end()) {
                if (!it->is_array()) return fail("scenario components must be an array");
                for (const auto& c : *it) {
                    if (!c.is_string()) return fail("scenario components must be strings");
                    components.push_back(text::trim(c.get<std::string>()));
                }
            }
        } else {
            return fail("scenario " + std::to_string(index) +
                        " must be a string or an object with a 'description' string");
        }
        description = text::trim(description);
        if (description.empty()) {
            return fail("scenario " + std::to_string(index) + " has an empty description");
        }
        out.push_back({{"description", description}, {"components", components}});
    }
    if (out.empty()) return fail("the scenario list is empty");
    return {out, {}};
}

StructuredParse parse_assignments(std::string_view raw) {
    auto doc = extract_json(raw);
    if (!doc) return fail("no JSON document found; emit a fenced ```json array of assignments");
    const json* arr = &*doc;
    if (doc->is_object() && doc->contains("assignments")) arr = &(*doc)["assignments"];
    if (!arr->is_array()) return fail("expected a JSON array of {\"id\", \"labels\"} objects");
    json out = json::array();
    for (const auto& v : *arr) {
        if (!v.is_object()) return fail("each assignment must be an object");
        auto id_it = v.find("id");
        std::optional<int> id_value;
        if (id_it != v.end() && id_it->is_number_integer()) {
            id_value = id_it->get<int>();
        } else if (id_it != v.end() && id_it->is_string()) {
            // Models sometimes quote ids: "7".
            const auto s = text::trim(id_it->get<std::string>());
            if (!s.empty() && s.size() < 9 &&
                std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
                id_value = std::stoi(s);
            }
        }
        if (!id_value) return fail("each assignment needs an integer 'id'");
        const json id_json = *id_value;
        const json* id = &id_json;
        auto labels = v.find("labels");
        if (labels == v.end()) labels = v.find("categories");
        if (labels == v.end()) {
            return fail("assignment " + std::to_string(id->get<int>()) + " has no 'labels'");
        }
        json list = json::array();
        if (labels->is_string()) {
            list.push_back(text::trim(labels->get<std::string>()));
        } else if (labels->is_array()) {
            for (const auto& l : *labels) {
                if (!l.is_string()) return fail("labels must be strings");
                list.push_back(text::trim(l.get<std::string>()));
            }
        } else {
            return fail("labels must be an array of strings");
        }
        if (list.empty()) {
            return fail("assignment " + std::to_string(id->get<int>()) +
                        " has no labels; at least one is required");
        }
        out.push_back({{"id", id->get<int>()}, {"labels", list}});
    }
    if (out.empty()) return fail("the assignment list is empty");
    return {out, {}};
}

StructuredParse parse_solution_doc(std::string_view raw) {
    auto doc = extract_json(raw);
    if (!doc || !doc->is_object()) {
        return fail("no JSON object found; emit a fenced ```json solution description object");
    }
    SolutionDescription sol;
    try {
        sol = doc->get<SolutionDescription>();
    } catch (const Error& e) {
        return fail(e.what());
    } catch (const json::exception& e) {
        return fail(e.what());
    }
    for (auto* list : {&sol.key_features, &sol.in_scope_components}) {
        for (auto& item : *list) item = text::trim(item);
    }
    auto problems = sol.violations();
    if (!problems.empty()) return fail(text::join(problems, "; "));
    return {json(sol), {}};
}

}  // namespace

std::string_view to_string(StructuredSchema schema) {
    switch (schema) {
        case StructuredSchema::ItemList: return "ItemList";
        case StructuredSchema::ThreatScenarioList: return "ThreatScenarioList";
        case StructuredSchema::CategoryAssignmentList: return "CategoryAssignmentList";
        case StructuredSchema::SolutionDescriptionDoc: return "SolutionDescriptionDoc";
    }
    return "";
}

std::optional<StructuredSchema> parse_schema(std::string_view name) {
    for (auto s : {StructuredSchema::ItemList, StructuredSchema::ThreatScenarioList,
                   StructuredSchema::CategoryAssignmentList,
                   StructuredSchema::SolutionDescriptionDoc}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

StructuredParse parse_structured(StructuredSchema schema, std::string_view raw) {
    switch (schema) {
        case StructuredSchema::ItemList: return parse_item_list(raw);
        case StructuredSchema::ThreatScenarioList: return parse_scenario_list(raw);
        case StructuredSchema::CategoryAssignmentList: return parse_assignments(raw);
        case StructuredSchema::SolutionDescriptionDoc: return parse_solution_doc(raw);
    }
    return fail("unknown schema");
}

std::string repair_message(const std::string& reason, const std::string& previous_output) {
    return "Your previous output failed validation: " + reason +
           "; re-emit only the corrected document.\n\nPrevious output:\n" + previous_output;
}

StructuredResult complete_structured(ModelBackend& backend, ModelRequest request,
                                     StructuredSchema schema, int max_attempts,
                                     const TranscriptHook& hook) {
    if (max_attempts < 1) throw validation_error("max_attempts must be >= 1");
    std::string last_raw, last_reason;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        auto response = complete(backend, request, hook);
        auto parsed = parse_structured(schema, response.text);
        if (parsed.value) {
            return {std::move(*parsed.value), attempt, std::move(response.text),
                    std::move(request)};
        }
        last_raw = std::move(response.text);
        last_reason = std::move(parsed.error);
        if (attempt < max_attempts) {
            request.messages.push_back(
                {MessageRole::User, {TextPart{repair_message(last_reason, last_raw)}}});
        }
    }
    throw structured_output_failure(max_attempts, last_reason, last_raw);
}

}  // namespace tmc
