#pragma once

// Generative-model boundary. Every prompt crosses to a model through
// `complete`; `complete_structured` adds schema validation with a bounded
// repair loop on top of it.

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace tmc {

struct TextPart {
    std::string text;
    bool operator==(const TextPart&) const = default;
};

struct ImagePart {
    std::vector<std::uint8_t> bytes;
    std::string media_type;
    bool operator==(const ImagePart&) const = default;
};

using ContentPart = std::variant<TextPart, ImagePart>;

enum class MessageRole { System, User };

struct Message {
    MessageRole role = MessageRole::User;
    std::vector<ContentPart> parts;
    bool operator==(const Message&) const = default;
};

struct RequestParams {
    double temperature = 0.0;
    int max_output_tokens = 4096;
    std::string model_id = "gpt-4-turbo";
    bool operator==(const RequestParams&) const = default;
};

struct ModelRequest {
    std::vector<Message> messages;
    RequestParams params;
    // Free-form label (usually the prompt key). Not part of the digest.
    std::string tag;

    static ModelRequest user_text(std::string text, RequestParams params = {},
                                  std::string tag = {});

    bool has_images() const;
    // Concatenated text of every part, for logging and summaries.
    std::string text() const;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ModelResponse {
    std::string text;
    Usage usage;
    std::string backend_id;
};

struct BackendCapabilities {
    bool multimodal = true;
    std::size_t max_context_tokens = 128000;
};

// Canonical request document; images are embedded as base64. The digest is
// SHA-256 over its compact serialization and is what cassettes key on.
nlohmann::json request_to_json(const ModelRequest& request);
std::string request_digest(const ModelRequest& request);
std::string request_summary(const ModelRequest& request);
// Rough token estimate (4 characters per token, flat cost per image).
std::size_t estimate_tokens(const ModelRequest& request);

using TranscriptHook = std::function<void(const ModelRequest&, const ModelResponse&)>;

class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    virtual std::string id() const = 0;
    virtual BackendCapabilities capabilities() const = 0;

    // Transport only; callers go through tmc::complete, which validates first.
    virtual ModelResponse send(const ModelRequest& request) = 0;
};

// Validates the request against the backend's capabilities, sends it, and
// invokes `hook` with the exchange. Throws CapabilityError, BudgetExceeded,
// TransportError, or ValidationError for malformed requests.
ModelResponse complete(ModelBackend& backend, const ModelRequest& request,
                       const TranscriptHook& hook = {});

// ---------------------------------------------------------------------------
// Structured output

enum class StructuredSchema {
    ItemList,
    ThreatScenarioList,
    CategoryAssignmentList,
    SolutionDescriptionDoc,
};

std::string_view to_string(StructuredSchema schema);
std::optional<StructuredSchema> parse_schema(std::string_view name);

struct StructuredParse {
    std::optional<nlohmann::json> value;
    std::string error;  // set when value is empty
};

// Extracts and validates a document of `schema` from raw model text. The
// returned value is normalized:
//   ItemList               -> ["item", ...]
//   ThreatScenarioList     -> [{"description": s, "components": [s...]}, ...]
//   CategoryAssignmentList -> [{"id": n, "labels": [s...]}, ...]
//   SolutionDescriptionDoc -> SolutionDescription JSON object
StructuredParse parse_structured(StructuredSchema schema, std::string_view raw);

struct StructuredResult {
    nlohmann::json value;
    int attempts = 0;
    std::string raw_text;
    ModelRequest final_request;  // includes any appended repair turns
};

// Renders the repair instruction appended after a failed attempt.
std::string repair_message(const std::string& reason, const std::string& previous_output);

// Sends `request`, parses the response as `schema`, and on failure appends a
// repair turn and retries, up to `max_attempts` total model calls. Throws
// StructuredOutputFailure carrying the last raw text.
StructuredResult complete_structured(ModelBackend& backend, ModelRequest request,
                                     StructuredSchema schema, int max_attempts = 3,
                                     const TranscriptHook& hook = {});

// ---------------------------------------------------------------------------
// Offline backends

// Response is a pure function of the request, supplied by the caller.
class MockBackend : public ModelBackend {
public:
    using Responder = std::function<std::string(const ModelRequest&)>;

    explicit MockBackend(Responder responder, BackendCapabilities caps = {},
                         std::string id = "mock");

    // Deterministic default responder: a short text derived from the digest.
    static std::string digest_echo(const ModelRequest& request);

    std::string id() const override { return id_; }
    BackendCapabilities capabilities() const override { return caps_; }
    ModelResponse send(const ModelRequest& request) override;

    std::size_t call_count() const;
    std::vector<ModelRequest> requests() const;

private:
    Responder responder_;
    BackendCapabilities caps_;
    std::string id_;
    mutable std::mutex mu_;
    std::vector<ModelRequest> requests_;
};

// Replies from a fixed script. Responses queued under a tag are consumed by
// requests carrying that tag; untagged responses serve everything else, in
// order. Running dry raises TransportError.
class ScriptedBackend : public ModelBackend {
public:
    explicit ScriptedBackend(BackendCapabilities caps = {}, std::string id = "scripted");

    ScriptedBackend& push(std::string response);
    ScriptedBackend& push(const std::string& tag, std::string response);

    // Script file: {"responses": [{"tag"?: str, "text": str}, ...]}
    static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path,
                                                      BackendCapabilities caps = {});

    std::string id() const override { return id_; }
    BackendCapabilities capabilities() const override { return caps_; }
    ModelResponse send(const ModelRequest& request) override;

    std::size_t call_count() const;
    std::vector<ModelRequest> requests() const;
    std::size_t remaining() const;

private:
    BackendCapabilities caps_;
    std::string id_;
    mutable std::mutex mu_;
    std::deque<std::string> untagged_;
    std::map<std::string, std::deque<std::string>> tagged_;
    std::vector<ModelRequest> requests_;
};

struct CassetteRecord {
    std::string request_digest;
    std::string request_summary;
    std::string response_text;
    bool operator==(const CassetteRecord&) const = default;
};

struct Cassette {
    std::vector<CassetteRecord> records;

    // Throws ParseError / NotFound.
    static Cassette load(const std::filesystem::path& path);
    static Cassette parse(std::string_view text);
    std::string dump() const;
    void save(const std::filesystem::path& path) const;
};

class ReplayBackend : public ModelBackend {
public:
    explicit ReplayBackend(Cassette cassette, BackendCapabilities caps = {},
                           std::string id = "replay");

    std::string id() const override { return id_; }
    BackendCapabilities capabilities() const override { return caps_; }
    ModelResponse send(const ModelRequest& request) override;

private:
    BackendCapabilities caps_;
    std::string id_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> by_digest_;
};

// Forwards to another backend and captures every exchange as a cassette record.
class RecordingBackend : public ModelBackend {
public:
    explicit RecordingBackend(std::shared_ptr<ModelBackend> inner);

    std::string id() const override { return inner_->id(); }
    BackendCapabilities capabilities() const override { return inner_->capabilities(); }
    ModelResponse send(const ModelRequest& request) override;

    Cassette cassette() const;

private:
    std::shared_ptr<ModelBackend> inner_;
    mutable std::mutex mu_;
    Cassette cassette_;
};

// ---------------------------------------------------------------------------
// Live backend (OpenAI-compatible chat completions)

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

struct LiveBackendConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_id = "gpt-4-turbo";
    std::string api_key;  // taken from AUSPEX_API_KEY, never from files
    std::chrono::seconds timeout{120};
    BackendCapabilities capabilities{};
    RetryPolicy retry{};

    // Reads {"base_url", "model_id", "timeout_seconds", "multimodal",
    // "max_context_tokens", "retry": {"max_attempts", "initial_backoff_ms"}}
    // and the API key from the environment.
    static LiveBackendConfig from_json(const nlohmann::json& j);
};

// Chat-completions request body for `request` (exposed for tests).
nlohmann::json chat_completions_body(const ModelRequest& request, const std::string& model_id);

class ChatCompletionsBackend : public ModelBackend {
public:
    explicit ChatCompletionsBackend(LiveBackendConfig config);

    std::string id() const override { return "chat-completions:" + config_.model_id; }
    BackendCapabilities capabilities() const override { return config_.capabilities; }
    ModelResponse send(const ModelRequest& request) override;

private:
    ModelResponse send_once(const ModelRequest& request);

    LiveBackendConfig config_;
};

}  // namespace tmc
