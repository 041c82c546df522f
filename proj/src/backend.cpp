#include "tmc/backend.hpp"

#include <algorithm>

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

constexpr std::size_t kImageTokenCost = 800;

std::string_view role_name(MessageRole role) {
    return role == MessageRole::System ? "system" : "user";
}

void validate_request(const ModelRequest& request) {
    if (request.messages.empty()) throw validation_error("model request has no messages");
    for (const auto& m : request.messages) {
        if (m.parts.empty()) throw validation_error("model request message has no parts");
    }
    if (request.params.temperature < 0.0) throw validation_error("temperature must be >= 0");
    if (request.params.max_output_tokens <= 0) {
        throw validation_error("max_output_tokens must be positive");
    }
}

}  // namespace

ModelRequest ModelRequest::user_text(std::string text, RequestParams params, std::string tag) {
    ModelRequest r;
    r.messages.push_back({MessageRole::User, {TextPart{std::move(text)}}});
    r.params = std::move(params);
    r.tag = std::move(tag);
    return r;
}

bool ModelRequest::has_images() const {
    for (const auto& m : messages) {
        for (const auto& p : m.parts) {
            if (std::holds_alternative<ImagePart>(p)) return true;
        }
    }
    return false;
}

std::string ModelRequest::text() const {
    std::string out;
    for (const auto& m : messages) {
        for (const auto& p : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&p)) {
                if (!out.empty()) out += "\n\n";
                out += t->text;
            }
        }
    }
    return out;
}

json request_to_json(const ModelRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        json parts = json::array();
        for (const auto& p : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&p)) {
                parts.push_back({{"type", "text"}, {"text", t->text}});
            } else {
                const auto& img = std::get<ImagePart>(p);
                parts.push_back({{"type", "image"},
                                 {"media_type", img.media_type},
                                 {"data", text::base64_encode(img.bytes)}});
            }
        }
        messages.push_back({{"role", role_name(m.role)}, {"parts", std::move(parts)}});
    }
    return {{"messages", std::move(messages)},
            {"params",
             {{"temperature", request.params.temperature},
              {"max_output_tokens", request.params.max_output_tokens},
              {"model_id", request.params.model_id}}}};
}

std::string request_digest(const ModelRequest& request) {
    return text::sha256_hex(request_to_json(request).dump());
}

std::string request_summary(const ModelRequest& request) {
    std::size_t images = 0;
    for (const auto& m : request.messages) {
        for (const auto& p : m.parts) images += std::holds_alternative<ImagePart>(p) ? 1 : 0;
    }
    std::string head = request.text();
    for (auto& c : head) {
        if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    }
    if (head.size() > 96) head = head.substr(0, 96) + "...";
    std::string out = request.tag.empty() ? "" : "[" + request.tag + "] ";
    out += std::to_string(request.messages.size()) + " msg";
    if (images) out += ", " + std::to_string(images) + " image";
    return out + ": " + head;
}

std::size_t estimate_tokens(const ModelRequest& request) {
    std::size_t chars = 0, images = 0;
    for (const auto& m : request.messages) {
        for (const auto& p : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&p)) chars += t->text.size();
            else ++images;
        }
    }
    return (chars + 3) / 4 + images * kImageTokenCost;
}

ModelResponse complete(ModelBackend& backend, const ModelRequest& request,
                       const TranscriptHook& hook) {
    validate_request(request);
    const auto caps = backend.capabilities();
    if (request.has_images() && !caps.multimodal) {
        throw capability_error("backend '" + backend.id() +
                               "' is text-only but the request carries an image");
    }
    const auto needed = estimate_tokens(request) +
                        static_cast<std::size_t>(request.params.max_output_tokens);
    if (needed > caps.max_context_tokens) throw budget_exceeded(needed, caps.max_context_tokens);

    ModelResponse response = backend.send(request);
    if (response.backend_id.empty()) response.backend_id = backend.id();
    if (response.text.empty()) {
        throw transport_error("backend '" + backend.id() + "' returned an empty response");
    }
    if (hook) hook(request, response);
    return response;
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(Responder responder, BackendCapabilities caps, std::string id)
    : responder_(std::move(responder)), caps_(caps), id_(std::move(id)) {
    if (!responder_) responder_ = &MockBackend::digest_echo;
}

std::string MockBackend::digest_echo(const ModelRequest& request) {
    return "mock response " + request_digest(request).substr(0, 16) + " (" +
           std::to_string(request.text().size()) + " chars)";
}

ModelResponse MockBackend::send(const ModelRequest& request) {
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
    }
    ModelResponse r;
    r.text = responder_(request);
    r.usage = {static_cast<int>(estimate_tokens(request)), static_cast<int>(r.text.size() / 4)};
    r.backend_id = id_;
    return r;
}

std::size_t MockBackend::call_count() const {
    std::lock_guard lock(mu_);
    return requests_.size();
}

std::vector<ModelRequest> MockBackend::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend::ScriptedBackend(BackendCapabilities caps, std::string id)
    : caps_(caps), id_(std::move(id)) {}

ScriptedBackend& ScriptedBackend::push(std::string response) {
    std::lock_guard lock(mu_);
    untagged_.push_back(std::move(response));
    return *this;
}

ScriptedBackend& ScriptedBackend::push(const std::string& tag, std::string response) {
    std::lock_guard lock(mu_);
    tagged_[tag].push_back(std::move(response));
    return *this;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path,
                                                            BackendCapabilities caps) {
    json doc;
    try {
        doc = json::parse(text::read_file_text(path));
    } catch (const json::parse_error& e) {
        throw parse_error("script '" + path.string() + "': " + e.what());
    }
    if (!doc.contains("responses") || !doc["responses"].is_array()) {
        throw parse_error("script '" + path.string() + "' needs a 'responses' array");
    }
    auto backend = std::make_unique<ScriptedBackend>(caps);
    for (const auto& r : doc["responses"]) {
        if (!r.contains("text") || !r["text"].is_string()) {
            throw parse_error("script response without 'text'");
        }
        auto body = r["text"].get<std::string>();
        if (r.contains("tag")) backend->push(r["tag"].get<std::string>(), std::move(body));
        else backend->push(std::move(body));
    }
    return backend;
}

ModelResponse ScriptedBackend::send(const ModelRequest& request) {
    std::string text;
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
        auto it = tagged_.find(request.tag);
        if (it != tagged_.end() && !it->second.empty()) {
            text = std::move(it->second.front());
            it->second.pop_front();
        } else if (!untagged_.empty()) {
            text = std::move(untagged_.front());
            untagged_.pop_front();
        } else {
            throw transport_error("script exhausted (request tag '" + request.tag + "')");
        }
    }
    return {std::move(text), {static_cast<int>(estimate_tokens(request)), 0}, id_};
}

std::size_t ScriptedBackend::call_count() const {
    std::lock_guard lock(mu_);
    return requests_.size();
}

std::vector<ModelRequest> ScriptedBackend::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard lock(mu_);
    std::size_t n = untagged_.size();
    for (const auto& [tag, q] : tagged_) n += q.size();
    return n;
}

// ---------------------------------------------------------------------------
// Cassettes

Cassette Cassette::parse(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error(std::string("cassette: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array()) {
        throw parse_error("cassette needs a 'records' array");
    }
    Cassette c;
    for (const auto& r : doc["records"]) {
        if (!r.is_object() || !r.contains("request_digest") || !r.contains("response_text")) {
            throw parse_error("cassette record needs request_digest and response_text");
        }
        c.records.push_back({r["request_digest"].get<std::string>(),
                             r.value("request_summary", std::string{}),
                             r["response_text"].get<std::string>()});
    }
    return c;
}

Cassette Cassette::load(const std::filesystem::path& path) {
    return parse(text::read_file_text(path));
}

std::string Cassette::dump() const {
    json out = json::array();
    for (const auto& r : records) {
        out.push_back({{"request_digest", r.request_digest},
                           {"request_summary", r.request_summary},
                           {"response_text", r.response_text}});
    }
    return json{{"format", "tmc-cassette/1"}, {"records", std::move(out)}}.dump(2) + "\n";
}

void Cassette::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    text::write_file_atomic(path, dump());
}

ReplayBackend::ReplayBackend(Cassette cassette, BackendCapabilities caps, std::string id)
    : caps_(caps), id_(std::move(id)) {
    for (auto& r : cassette.records) {
        by_digest_.try_emplace(r.request_digest, std::move(r.response_text));
    }
}

ModelResponse ReplayBackend::send(const ModelRequest& request) {
    const auto digest = request_digest(request);
    std::lock_guard lock(mu_);
    auto it = by_digest_.find(digest);
    if (it == by_digest_.end()) {
        throw transport_error("no recording for request " + digest.substr(0, 12) + " (" +
                              request_summary(request) + ")");
    }
    return {it->second, {static_cast<int>(estimate_tokens(request)), 0}, id_};
}

RecordingBackend::RecordingBackend(std::shared_ptr<ModelBackend> inner)
    : inner_(std::move(inner)) {}

ModelResponse RecordingBackend::send(const ModelRequest& request) {
    auto response = inner_->send(request);
    std::lock_guard lock(mu_);
    cassette_.records.push_back(
        {request_digest(request), request_summary(request), response.text});
    return response;
}

Cassette RecordingBackend::cassette() const {
    std::lock_guard lock(mu_);
    // Concurrent calls land in arbitrary order; sort so recordings are stable.
    Cassette c = cassette_;
    std::stable_sort(c.records.begin(), c.records.end(),
                     [](const CassetteRecord& a, const CassetteRecord& b) {
                         return a.request_digest < b.request_digest;
                     });
    return c;
}

}  // namespace tmc
