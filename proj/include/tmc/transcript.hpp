#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmc/backend.hpp"

namespace tmc {

// One model exchange as seen by the pipeline: which prompt, what was sent,
// what came back.
struct TranscriptRecord {
    std::string prompt_key;
    std::string rendered_prompt;
    std::string raw_response;
    int attempt = 1;
    double elapsed_ms = 0.0;

    bool operator==(const TranscriptRecord&) const = default;
};

void to_json(nlohmann::json& j, const TranscriptRecord& r);
void from_json(const nlohmann::json& j, TranscriptRecord& r);

// Collects exchanges from one or more backend calls. Thread-safe, so the
// hooks it hands out may be used from concurrent calls.
class TranscriptRecorder {
public:
    TranscriptRecorder();

    // Hook that records each exchange under `prompt_key`, numbering attempts.
    TranscriptHook hook(std::string prompt_key);

    void append(const std::vector<TranscriptRecord>& records);
    std::vector<TranscriptRecord> records() const;

private:
    mutable std::mutex mu_;
    std::vector<TranscriptRecord> records_;
};

}  // namespace tmc
