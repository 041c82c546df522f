#include "tmc/prompt.hpp"

#include <algorithm>
#include <cctype>

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

// Scans `body` for {{name}} tokens; calls `on_token(start, end, name)` for each.
template <typename F>
void scan_placeholders(std::string_view body, F&& on_token) {
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string_view::npos) {
        std::size_t i = pos + 2;
        if (i < body.size() && name_start(body[i])) {
            std::size_t j = i + 1;
            while (j < body.size() && name_char(body[j])) ++j;
            if (body.substr(j, 2) == "}}") {
                on_token(pos, j + 2, std::string(body.substr(i, j - i)));
                pos = j + 2;
                continue;
            }
        }
        ++pos;
    }
}

Error missing_required(const std::vector<std::string>& missing) {
    return Error(ErrorKind::Validation, "MissingRequiredTemplates",
                 "prompt library is missing required templates: " + text::join(missing, ", "),
                 {{"missing", missing}});
}

// ---------------------------------------------------------------------------
// TOML-subset reader: [dotted."quoted".headers], key = "string" | """multi-line"""
// | 'literal' | '''multi-line literal''', and # comments.

class TomlReader {
public:
    explicit TomlReader(std::string_view src) : src_(src) {}

    json read() {
        json root = json::object();
        json* table = &root;
        while (skip_blank_lines()) {
            if (peek() == '[') {
                table = &open_table(root);
            } else {
                read_pair(*table);
            }
        }
        return root;
    }

    // Line where each table header appeared, keyed by its dotted path.
    const std::map<std::string, std::size_t>& header_lines() const { return header_lines_; }

private:
    [[noreturn]] void fail(const std::string& what) const { throw parse_error(what, line_, col_); }

    bool eof() const { return pos_ >= src_.size(); }
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }
    char get() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }
    bool at(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }
    void skip(std::size_t n) {
        while (n-- && !eof()) get();
    }

    void skip_inline_space() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) get();
    }

    void skip_comment() {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') get();
        }
    }

    // Skips whitespace, comments and newlines. Returns false at end of input.
    bool skip_blank_lines() {
        while (!eof()) {
            skip_inline_space();
            skip_comment();
            if (peek() == '\r') get();
            if (peek() == '\n') {
                get();
                continue;
            }
            return !eof();
        }
        return false;
    }

    void expect_line_end() {
        skip_inline_space();
        skip_comment();
        if (peek() == '\r') get();
        if (eof()) return;
        if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "'");
        get();
    }

    std::string read_key_segment() {
        if (peek() == '"') return read_basic_string();
        if (peek() == '\'') return read_literal_string();
        std::string key;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-')) {
            key += get();
        }
        if (key.empty()) fail("expected a key");
        return key;
    }

    std::vector<std::string> read_dotted_key() {
        std::vector<std::string> parts;
        while (true) {
            skip_inline_space();
            parts.push_back(read_key_segment());
            skip_inline_space();
            if (peek() != '.') return parts;
            get();
        }
    }

    json& open_table(json& root) {
        const auto header_line = line_;
        get();  // [
        if (peek() == '[') fail("arrays of tables are not supported");
        auto path = read_dotted_key();
        if (peek() != ']') fail("expected ']' to close table header");
        get();
        expect_line_end();
        json* node = &root;
        std::string dotted;
        for (const auto& part : path) {
            dotted += (dotted.empty() ? "" : ".") + part;
            auto& child = (*node)[part];
            if (child.is_null()) child = json::object();
            if (!child.is_object()) fail("'" + dotted + "' is already a value");
            node = &child;
        }
        if (!header_lines_.emplace(dotted, header_line).second) {
            line_ = header_line;
            fail("table [" + dotted + "] defined twice");
        }
        return *node;
    }

    void read_pair(json& table) {
        auto path = read_dotted_key();
        if (path.size() != 1) fail("dotted keys are only supported in table headers");
        skip_inline_space();
        if (peek() != '=') fail("expected '=' after key '" + path[0] + "'");
        get();
        skip_inline_space();
        const auto value_line = line_, value_col = col_;
        std::string value;
        if (at("\"\"\"")) value = read_multiline_basic();
        else if (at("'''")) value = read_multiline_literal();
        else if (peek() == '"') value = read_basic_string();
        else if (peek() == '\'') value = read_literal_string();
        else fail("only string values are supported");
        if (table.contains(path[0])) {
            line_ = value_line;
            col_ = value_col;
            fail("duplicate key '" + path[0] + "'");
        }
        table[path[0]] = value;
        expect_line_end();
    }

    void read_escape(std::string& out) {
        get();  // backslash
        if (eof()) fail("unterminated escape");
        char c = get();
        switch (c) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'u': {
                std::string hex;
                for (int i = 0; i < 4; ++i) {
                    if (eof() || !std::isxdigit(static_cast<unsigned char>(peek()))) {
                        fail("bad \\u escape");
                    }
                    hex += get();
                }
                unsigned cp = std::stoul(hex, nullptr, 16);
                if (cp < 0x80) {
                    out += static_cast<char>(cp);
                } else if (cp < 0x800) {
                    out += static_cast<char>(0xC0 | (cp >> 6));
                    out += static_cast<char>(0x80 | (cp & 0x3F));
                } else {
                    out += static_cast<char>(0xE0 | (cp >> 12));
                    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                    out += static_cast<char>(0x80 | (cp & 0x3F));
                }
                break;
            }
            default: fail(std::string("unknown escape '\\") + c + "'");
        }
    }

    std::string read_basic_string() {
        get();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            if (peek() == '"') {
                get();
                return out;
            }
            if (peek() == '\\') read_escape(out);
            else out += get();
        }
    }

    std::string read_literal_string() {
        get();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            if (peek() == '\'') {
                get();
                return out;
            }
            out += get();
        }
    }

    void trim_leading_newline() {
        if (peek() == '\r' && peek(1) == '\n') skip(2);
        else if (peek() == '\n') get();
    }

    std::string read_multiline_basic() {
        const auto start_line = line_, start_col = col_;
        skip(3);
        trim_leading_newline();
        std::string out;
        while (true) {
            if (eof()) {
                line_ = start_line;
                col_ = start_col;
                fail("unterminated multi-line string");
            }
            if (at("\"\"\"")) {
                skip(3);
                return out;
            }
            if (peek() == '\\') {
                // Line-ending backslash joins lines.
                std::size_t k = 1;
                while (peek(k) == ' ' || peek(k) == '\t' || peek(k) == '\r') ++k;
                if (peek(k) == '\n') {
                    skip(k + 1);
                    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) get();
                    continue;
                }
                read_escape(out);
                continue;
            }
            char c = get();
            if (c != '\r') out += c;
        }
    }

    std::string read_multiline_literal() {
        const auto start_line = line_, start_col = col_;
        skip(3);
        trim_leading_newline();
        std::string out;
        while (true) {
            if (eof()) {
                line_ = start_line;
                col_ = start_col;
                fail("unterminated multi-line string");
            }
            if (at("'''")) {
                skip(3);
                return out;
            }
            char c = get();
            if (c != '\r') out += c;
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
    std::map<std::string, std::size_t> header_lines_;
};

std::string required_string(const json& table, const char* key, const std::string& owner,
                            std::size_t line) {
    auto it = table.find(key);
    if (it == table.end() || !it->is_string()) {
        throw parse_error(owner + " is missing string '" + key + "'", line, 1);
    }
    return it->get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------------------
// OutputContract

std::optional<OutputContract> OutputContract::parse(std::string_view text) {
    if (text == "free_text") return OutputContract{Kind::FreeText, {}};
    if (text == "item_list") return OutputContract{Kind::ItemList, {}};
    constexpr std::string_view prefix = "structured:";
    if (text.substr(0, prefix.size()) == prefix) {
        auto schema = text.substr(prefix.size());
        if (!parse_schema(schema)) return std::nullopt;
        return OutputContract{Kind::StructuredDocument, std::string(schema)};
    }
    return std::nullopt;
}

std::string OutputContract::to_string() const {
    switch (kind) {
        case Kind::FreeText: return "free_text";
        case Kind::ItemList: return "item_list";
        case Kind::StructuredDocument: return "structured:" + schema;
    }
    return "";
}

std::optional<StructuredSchema> OutputContract::structured_schema() const {
    switch (kind) {
        case Kind::FreeText: return std::nullopt;
        case Kind::ItemList: return StructuredSchema::ItemList;
        case Kind::StructuredDocument: return parse_schema(schema);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Templates

std::set<std::string> find_placeholders(std::string_view body) {
    std::set<std::string> names;
    scan_placeholders(body, [&](std::size_t, std::size_t, std::string name) {
        names.insert(std::move(name));
    });
    return names;
}

PromptTemplate::PromptTemplate(std::string key, std::string body, OutputContract contract,
                               std::string description)
    : key_(std::move(key)), body_(std::move(body)), placeholders_(find_placeholders(body_)),
      contract_(std::move(contract)), description_(std::move(description)) {
    if (key_.empty()) throw validation_error("prompt template key is empty");
}

std::string render_template(const PromptTemplate& tmpl, const Bindings& bindings) {
    for (const auto& name : tmpl.placeholders()) {
        auto it = bindings.find(name);
        if (it == bindings.end()) {
            throw Error(ErrorKind::Validation, "UnboundPlaceholder",
                        "template '" + tmpl.key() + "' placeholder '" + name + "' is unbound",
                        {{"template", tmpl.key()}, {"placeholder", name}});
        }
        if (it->second.empty()) {
            throw Error(ErrorKind::Validation, "EmptyBinding",
                        "template '" + tmpl.key() + "' placeholder '" + name +
                            "' is bound to empty text",
                        {{"template", tmpl.key()}, {"placeholder", name}});
        }
    }
    const auto& body = tmpl.body();
    std::string out;
    out.reserve(body.size());
    std::size_t copied = 0;
    scan_placeholders(body, [&](std::size_t start, std::size_t end, const std::string& name) {
        out.append(body, copied, start - copied);
        out += bindings.at(name);
        copied = end;
    });
    out.append(body, copied, std::string::npos);
    return out;
}

const std::vector<std::string>& required_template_keys() {
    static const std::vector<std::string> keys = {
        keys::kDiag,          keys::kText,           keys::kSor,
        keys::kDesc,          keys::kCyberBaseline,  keys::kCia,
        keys::kStride,        keys::kChainAppDetails, keys::kChainKeyFeatures,
        keys::kChainInScope,
    };
    return keys;
}

// ---------------------------------------------------------------------------
// PromptLibrary

PromptLibrary::PromptLibrary(std::string version, std::vector<PromptTemplate> templates,
                             std::vector<CyberRole> roles)
    : version_(std::move(version)), roles_(std::move(roles)) {
    for (auto& t : templates) {
        auto key = t.key();
        if (!templates_.emplace(key, std::move(t)).second) {
            throw validation_error("duplicate template key '" + key + "'");
        }
    }
    std::vector<std::string> missing;
    for (const auto& key : required_template_keys()) {
        if (!templates_.count(key)) missing.push_back(key);
    }
    if (!missing.empty()) throw missing_required(missing);
    std::set<std::string> ids;
    for (const auto& r : roles_) {
        if (!ids.insert(r.id).second) throw validation_error("duplicate role id '" + r.id + "'");
        if (!templates_.count(r.prompt_key)) {
            throw validation_error("role '" + r.id + "' targets unknown template '" +
                                   r.prompt_key + "'");
        }
    }
}

const PromptTemplate* PromptLibrary::find(std::string_view key) const {
    auto it = templates_.find(std::string(key));
    return it == templates_.end() ? nullptr : &it->second;
}

const PromptTemplate& PromptLibrary::at(std::string_view key) const {
    if (const auto* t = find(key)) return *t;
    throw not_found("prompt template '" + std::string(key) + "'");
}

const CyberRole* PromptLibrary::role(std::string_view role_id) const {
    for (const auto& r : roles_) {
        if (r.id == role_id) return &r;
    }
    return nullptr;
}

std::map<std::string, std::string> PromptLibrary::role_index() const {
    std::map<std::string, std::string> index;
    for (const auto& r : roles_) index[r.id] = r.prompt_key;
    return index;
}

PromptLibrary parse_prompt_library(std::string_view text) {
    TomlReader reader(text);
    const json doc = reader.read();
    const auto& lines = reader.header_lines();
    auto line_of = [&](const std::string& dotted) {
        auto it = lines.find(dotted);
        return it == lines.end() ? std::size_t{0} : it->second;
    };

    std::string version = doc.value("version", std::string{});
    if (version.empty()) throw parse_error("prompt library has no 'version'");

    for (const auto& [key, value] : doc.items()) {
        if (key != "version" && key != "templates" && key != "roles") {
            throw parse_error("unknown top-level entry '" + key + "'", line_of(key), 1);
        }
    }

    std::vector<PromptTemplate> templates;
    if (auto it = doc.find("templates"); it != doc.end()) {
        for (const auto& [key, table] : it->items()) {
            const auto line = line_of("templates." + key);
            const auto owner = "template '" + key + "'";
            if (!table.is_object()) throw parse_error(owner + " must be a table", line, 1);
            auto body = required_string(table, "body", owner, line);
            auto contract_text = table.value("output_contract", std::string("free_text"));
            auto contract = OutputContract::parse(contract_text);
            if (!contract) {
                throw parse_error(owner + " has unknown output_contract '" + contract_text + "'",
                                  line, 1);
            }
            templates.emplace_back(key, std::move(body), *contract,
                                   table.value("description", std::string{}));
        }
    }

    std::vector<CyberRole> roles;
    if (auto it = doc.find("roles"); it != doc.end()) {
        for (const auto& [id, table] : it->items()) {
            const auto line = line_of("roles." + id);
            const auto owner = "role '" + id + "'";
            if (!table.is_object()) throw parse_error(owner + " must be a table", line, 1);
            roles.push_back({id, table.value("display_name", id),
                             required_string(table, "prompt_key", owner, line)});
        }
    }
    return PromptLibrary(std::move(version), std::move(templates), std::move(roles));
}

PromptLibrary load_prompt_library(const std::filesystem::path& path) {
    return parse_prompt_library(text::read_file_text(path));
}

// ---------------------------------------------------------------------------
// Chains

std::string chain_section_header(std::string_view output_name) {
    return "\n\n### " + std::string(output_name) + "\n";
}

const std::string& ChainResult::output(std::string_view name) const {
    for (const auto& [n, text] : outputs) {
        if (n == name) return text;
    }
    throw not_found("chain output '" + std::string(name) + "'");
}

ChainResult run_chain(const ChainSpec& chain, const std::string& seed_name,
                      const std::string& seed_text, const PromptLibrary& library,
                      ModelBackend& backend, const ChainOptions& options) {
    auto binding_error = [](const std::string& message, json detail) {
        return Error(ErrorKind::Validation, "ChainBindingError", message, std::move(detail));
    };
    if (chain.steps.empty()) throw binding_error("chain has no steps", json::object());

    // Static check of every step before the first backend call.
    std::set<std::string> available = {seed_name, kAccumulatedBinding};
    std::set<std::string> outputs_seen;
    for (std::size_t i = 0; i < chain.steps.size(); ++i) {
        const auto& step = chain.steps[i];
        const auto* tmpl = library.find(step.template_key);
        if (!tmpl) {
            throw binding_error("chain step " + std::to_string(i + 1) + " uses unknown template '" +
                                    step.template_key + "'",
                                {{"step", i + 1}, {"template", step.template_key}});
        }
        for (const auto& name : tmpl->placeholders()) {
            if (!available.count(name)) {
                throw binding_error("chain step " + std::to_string(i + 1) + " ('" +
                                        step.template_key + "') references undeclared '" + name +
                                        "'",
                                    {{"step", i + 1}, {"template", step.template_key},
                                     {"placeholder", name}});
            }
        }
        if (step.output_name.empty() || step.output_name == seed_name ||
            step.output_name == kAccumulatedBinding || !outputs_seen.insert(step.output_name).second) {
            throw binding_error("chain output name '" + step.output_name + "' is not unique",
                                {{"step", i + 1}, {"output", step.output_name}});
        }
        available.insert(step.output_name);
    }

    ChainResult result;
    TranscriptRecorder recorder;
    Bindings bindings = {{seed_name, seed_text}};
    std::string accumulated = seed_text;
    for (std::size_t i = 0; i < chain.steps.size(); ++i) {
        const auto& step = chain.steps[i];
        const auto& tmpl = library.at(step.template_key);
        bindings[kAccumulatedBinding] = accumulated;
        std::string output;
        try {
            auto prompt = render_template(tmpl, bindings);
            auto request = ModelRequest::user_text(std::move(prompt), options.params, tmpl.key());
            if (auto schema = tmpl.output_contract().structured_schema()) {
                auto res = complete_structured(backend, std::move(request), *schema,
                                               options.structured_attempts,
                                               recorder.hook(tmpl.key()));
                if (*schema == StructuredSchema::ItemList) {
                    std::vector<std::string> lines;
                    for (const auto& item : res.value) lines.push_back("- " + item.get<std::string>());
                    output = text::join(lines, "\n");
                } else {
                    output = res.raw_text;
                }
                result.structured[step.output_name] = std::move(res.value);
            } else {
                output = complete(backend, request, recorder.hook(tmpl.key())).text;
            }
        } catch (...) {
            rethrow_tagged("chain step " + std::to_string(i + 1) + " (" + step.template_key + ")");
        }
        bindings[step.output_name] = output;
        accumulated += chain_section_header(step.output_name) + output;
        result.outputs.emplace_back(step.output_name, std::move(output));
    }
    result.transcript = recorder.records();
    return result;
}

}  // namespace tmc
