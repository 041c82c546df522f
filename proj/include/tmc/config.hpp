#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "tmc/backend.hpp"
#include "tmc/ingest.hpp"

namespace tmc {

enum class BackendKind { Live, Replay, Scripted, Mock };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view text);

struct BackendSettings {
    BackendKind kind = BackendKind::Live;
    std::filesystem::path cassette;  // replay
    std::filesystem::path script;    // scripted
    bool multimodal = true;          // offline backends
    nlohmann::json live = nlohmann::json::object();
};

// Shared configuration file (JSON):
//
//   {
//     "storage_root": "sessions",
//     "prompt_library": "prompts/default_library.toml",
//     "backend": {"kind": "live", "base_url": "...", "model_id": "gpt-4-turbo",
//                 "timeout_seconds": 120, "cassette": "...", "script": "..."},
//     "request": {"temperature": 0.0, "max_output_tokens": 4096},
//     "limits": {"max_diagram_bytes": 10485760, "max_text_chars": 200000},
//     "structured_attempts": 3
//   }
//
// Relative paths resolve against the config file's directory. The API key is
// read only from the AUSPEX_API_KEY environment variable.
struct AppConfig {
    std::filesystem::path storage_root = "tmc-sessions";
    std::filesystem::path prompt_library = TMC_DEFAULT_PROMPT_LIBRARY;
    BackendSettings backend;
    RequestParams params;
    IngestLimits limits;
    int structured_attempts = 3;

    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static AppConfig load(const std::filesystem::path& path);
};

// Throws Usage errors for incomplete settings (e.g. replay without cassette).
std::shared_ptr<ModelBackend> make_backend(const BackendSettings& settings,
                                           const RequestParams& params);

}  // namespace tmc
