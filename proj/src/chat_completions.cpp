// OpenAI-compatible chat-completions client.

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "tmc/backend.hpp"
#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw validation_error("base_url needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    e.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
    return e;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

LiveBackendConfig LiveBackendConfig::from_json(const json& j) {
    LiveBackendConfig c;
    if (!j.is_object()) return c;
    c.base_url = j.value("base_url", c.base_url);
    c.model_id = j.value("model_id", c.model_id);
    c.timeout = std::chrono::seconds(j.value("timeout_seconds", c.timeout.count()));
    c.capabilities.multimodal = j.value("multimodal", c.capabilities.multimodal);
    c.capabilities.max_context_tokens =
        j.value("max_context_tokens", c.capabilities.max_context_tokens);
    if (auto r = j.find("retry"); r != j.end() && r->is_object()) {
        c.retry.max_attempts = r->value("max_attempts", c.retry.max_attempts);
        c.retry.initial_backoff =
            std::chrono::milliseconds(r->value("initial_backoff_ms", 500));
    }
    if (const char* key = std::getenv("AUSPEX_API_KEY")) c.api_key = key;
    return c;
}

json chat_completions_body(const ModelRequest& request, const std::string& model_id) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        json content = json::array();
        for (const auto& p : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&p)) {
                content.push_back({{"type", "text"}, {"text", t->text}});
            } else {
                const auto& img = std::get<ImagePart>(p);
                content.push_back(
                    {{"type", "image_url"},
                     {"image_url",
                      {{"url", "data:" + img.media_type + ";base64," +
                                   text::base64_encode(img.bytes)}}}});
            }
        }
        messages.push_back(
            {{"role", m.role == MessageRole::System ? "system" : "user"}, {"content", content}});
    }
    return {{"model", request.params.model_id.empty() ? model_id : request.params.model_id},
            {"messages", std::move(messages)},
            {"temperature", request.params.temperature},
            {"max_tokens", request.params.max_output_tokens}};
}

ChatCompletionsBackend::ChatCompletionsBackend(LiveBackendConfig config)
    : config_(std::move(config)) {
    split_url(config_.base_url);
}

ModelResponse ChatCompletionsBackend::send(const ModelRequest& request) {
    auto backoff = config_.retry.initial_backoff;
    const int attempts = std::max(1, config_.retry.max_attempts);
    for (int attempt = 1;; ++attempt) {
        try {
            return send_once(request);
        } catch (const Error& e) {
            const bool retryable = e.detail().value("retryable", false);
            if (!retryable || attempt >= attempts) throw;
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

ModelResponse ChatCompletionsBackend::send_once(const ModelRequest& request) {
    const auto endpoint = split_url(config_.base_url);
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    const auto body = chat_completions_body(request, config_.model_id).dump();
    auto res = client.Post(endpoint.path + "/chat/completions", headers, body, "application/json");
    if (!res) {
        throw transport_error("request to " + endpoint.origin + " failed: " +
                              httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        std::string message = res->body.substr(0, 400);
        json err = json::parse(res->body, nullptr, false);
        if (err.is_object() && err.contains("error") && err["error"].is_object()) {
            const auto& e = err["error"];
            message = e.value("message", message);
            if (e.value("code", std::string{}) == "context_length_exceeded") {
                throw Error(ErrorKind::Backend, "BudgetExceeded", message);
            }
        }
        if (retryable_status(res->status)) {
            throw transport_error("HTTP " + std::to_string(res->status) + ": " + message);
        }
        throw Error(ErrorKind::Backend, "BackendRejected",
                    "HTTP " + std::to_string(res->status) + ": " + message,
                    {{"status", res->status}, {"retryable", false}});
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty()) {
        throw transport_error("malformed chat-completions response");
    }
    const auto& message = doc["choices"][0].value("message", json::object());
    ModelResponse out;
    if (message.contains("content") && message["content"].is_string()) {
        out.text = message["content"].get<std::string>();
    }
    if (auto u = doc.find("usage"); u != doc.end() && u->is_object()) {
        out.usage.prompt_tokens = u->value("prompt_tokens", 0);
        out.usage.completion_tokens = u->value("completion_tokens", 0);
    }
    out.backend_id = id();
    if (out.text.empty()) throw transport_error("chat-completions response had no content");
    return out;
}

}  // namespace tmc
