#include "tmc/config.hpp"

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

Error usage(const std::string& message) { return Error(ErrorKind::Usage, "UsageError", message); }

}  // namespace

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Live: return "live";
        case BackendKind::Replay: return "replay";
        case BackendKind::Scripted: return "scripted";
        case BackendKind::Mock: return "mock";
    }
    return "";
}

std::optional<BackendKind> parse_backend_kind(std::string_view text) {
    for (auto k : {BackendKind::Live, BackendKind::Replay, BackendKind::Scripted, BackendKind::Mock}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

AppConfig AppConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    AppConfig c;
    if (!j.is_object()) throw parse_error("config must be a JSON object");
    if (j.contains("storage_root")) {
        c.storage_root = resolve(j["storage_root"].get<std::string>(), base_dir);
    }
    if (j.contains("prompt_library")) {
        c.prompt_library = resolve(j["prompt_library"].get<std::string>(), base_dir);
    }
    if (auto b = j.find("backend"); b != j.end() && b->is_object()) {
        auto kind_text = b->value("kind", std::string("live"));
        auto kind = parse_backend_kind(kind_text);
        if (!kind) throw parse_error("unknown backend kind '" + kind_text + "'");
        c.backend.kind = *kind;
        if (b->contains("cassette")) {
            c.backend.cassette = resolve((*b)["cassette"].get<std::string>(), base_dir);
        }
        if (b->contains("script")) {
            c.backend.script = resolve((*b)["script"].get<std::string>(), base_dir);
        }
        c.backend.multimodal = b->value("multimodal", true);
        c.backend.live = *b;
        c.params.model_id = b->value("model_id", c.params.model_id);
    }
    if (auto r = j.find("request"); r != j.end() && r->is_object()) {
        c.params.temperature = r->value("temperature", c.params.temperature);
        c.params.max_output_tokens = r->value("max_output_tokens", c.params.max_output_tokens);
    }
    if (auto l = j.find("limits"); l != j.end() && l->is_object()) {
        c.limits.max_diagram_bytes = l->value("max_diagram_bytes", c.limits.max_diagram_bytes);
        c.limits.max_text_chars = l->value("max_text_chars", c.limits.max_text_chars);
    }
    c.structured_attempts = j.value("structured_attempts", c.structured_attempts);
    return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(text::read_file_text(path));
    } catch (const json::parse_error& e) {
        throw parse_error("config '" + path.string() + "': " + e.what());
    }
    return from_json(doc, path.parent_path());
}

std::shared_ptr<ModelBackend> make_backend(const BackendSettings& settings,
                                           const RequestParams& params) {
    BackendCapabilities caps;
    caps.multimodal = settings.multimodal;
    switch (settings.kind) {
        case BackendKind::Replay:
            if (settings.cassette.empty()) throw usage("replay backend needs a cassette path");
            return std::make_shared<ReplayBackend>(Cassette::load(settings.cassette), caps);
        case BackendKind::Scripted:
            if (settings.script.empty()) throw usage("scripted backend needs a script path");
            return ScriptedBackend::from_file(settings.script, caps);
        case BackendKind::Mock:
            return std::make_shared<MockBackend>(MockBackend::Responder{}, caps);
        case BackendKind::Live: {
            auto live = LiveBackendConfig::from_json(settings.live);
            live.model_id = params.model_id;
            return std::make_shared<ChatCompletionsBackend>(std::move(live));
        }
    }
    throw usage("unknown backend kind");
}

}  // namespace tmc
