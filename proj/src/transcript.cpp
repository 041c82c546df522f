#include "tmc/transcript.hpp"

#include <memory>

namespace tmc {

void to_json(nlohmann::json& j, const TranscriptRecord& r) {
    j = {{"prompt_key", r.prompt_key},
         {"rendered_prompt", r.rendered_prompt},
         {"raw_response", r.raw_response},
         {"attempt", r.attempt},
         {"elapsed_ms", r.elapsed_ms}};
}

void from_json(const nlohmann::json& j, TranscriptRecord& r) {
    r.prompt_key = j.at("prompt_key").get<std::string>();
    r.rendered_prompt = j.at("rendered_prompt").get<std::string>();
    r.raw_response = j.at("raw_response").get<std::string>();
    r.attempt = j.value("attempt", 1);
    r.elapsed_ms = j.value("elapsed_ms", 0.0);
}

TranscriptRecorder::TranscriptRecorder() = default;

TranscriptHook TranscriptRecorder::hook(std::string prompt_key) {
    struct State {
        std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();
        int attempt = 0;
    };
    auto state = std::make_shared<State>();
    return [this, key = std::move(prompt_key), state](const ModelRequest& req,
                                                      const ModelResponse& resp) {
        auto now = std::chrono::steady_clock::now();
        TranscriptRecord rec;
        rec.prompt_key = key;
        rec.rendered_prompt = req.text();
        rec.raw_response = resp.text;
        std::lock_guard lock(mu_);
        rec.attempt = ++state->attempt;
        rec.elapsed_ms = std::chrono::duration<double, std::milli>(now - state->mark).count();
        state->mark = now;
        records_.push_back(std::move(rec));
    };
}

void TranscriptRecorder::append(const std::vector<TranscriptRecord>& records) {
    std::lock_guard lock(mu_);
    records_.insert(records_.end(), records.begin(), records.end());
}

std::vector<TranscriptRecord> TranscriptRecorder::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

}  // namespace tmc
