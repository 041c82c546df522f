#pragma once

// Session lifecycle and storage: the workflow spine shared by the CLI and the
// HTTP API (ingest -> decompose -> edit -> threat model -> judgments -> export).

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tmc/backend.hpp"
#include "tmc/evaluation.hpp"
#include "tmc/ingest.hpp"
#include "tmc/model.hpp"
#include "tmc/prompt.hpp"
#include "tmc/stage1.hpp"
#include "tmc/stage2.hpp"

namespace tmc {

enum class SessionStatus { Ingested, Decomposed, Modeled };

std::string_view to_string(SessionStatus s);
std::optional<SessionStatus> parse_session_status(std::string_view text);

struct Stage1State {
    SolutionDescription artifacts;
    Stage1Transcript transcript;
    bool operator==(const Stage1State& o) const {
        return artifacts == o.artifacts && transcript.records == o.transcript.records &&
               transcript.input_kind == o.transcript.input_kind;
    }
};

struct Stage2State {
    Stage2Config config;
    ThreatMatrix matrix;
    std::vector<TranscriptRecord> transcript;
    bool operator==(const Stage2State& o) const {
        return matrix == o.matrix && transcript == o.transcript;
    }
};

struct FailureRecord {
    std::string operation;
    std::string code;
    std::string message;
    std::string at;
    bool operator==(const FailureRecord&) const = default;
};

struct Session {
    std::string id;
    std::string created_at;
    std::string updated_at;
    SystemRepresentation representation = SystemRepresentation::free_text("-", "-");
    std::optional<Stage1State> stage1;
    std::optional<Stage2State> stage2;
    std::vector<ScenarioJudgment> judgments;
    std::vector<FailureRecord> failures;
    SessionStatus status = SessionStatus::Ingested;
    long revision = 0;

    bool operator==(const Session&) const = default;
};

// Full document; transcripts are included only when asked for.
nlohmann::json session_to_json(const Session& s, bool include_transcripts = true);

// Stage-1 artifact names accepted by edit_artifact.
const std::vector<std::string>& artifact_names();

// ---------------------------------------------------------------------------
// Storage

class SessionStore {
public:
    virtual ~SessionStore() = default;
    virtual bool exists(const std::string& id) const = 0;
    // Throws NotFound / StorageError.
    virtual Session load(const std::string& id) const = 0;
    virtual void save(const Session& session) = 0;
    virtual std::vector<std::string> list() const = 0;
};

// One directory per session: session.json, stage1_transcript.json,
// stage2_transcript.json, and the uploaded diagram (diagram.png / .jpg).
class FileSessionStore : public SessionStore {
public:
    explicit FileSessionStore(std::filesystem::path root);

    bool exists(const std::string& id) const override;
    Session load(const std::string& id) const override;
    void save(const Session& session) override;
    std::vector<std::string> list() const override;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path dir_for(const std::string& id) const;

    std::filesystem::path root_;
};

// Process-local store for one-shot pipelines and tests.
class MemorySessionStore : public SessionStore {
public:
    bool exists(const std::string& id) const override;
    Session load(const std::string& id) const override;
    void save(const Session& session) override;
    std::vector<std::string> list() const override;

private:
    mutable std::mutex mu_;
    std::map<std::string, Session> sessions_;
};

// ---------------------------------------------------------------------------
// Service

struct ServiceOptions {
    RequestParams params;
    int structured_attempts = 3;
};

enum class ExportFormat { Json, Csv, Markdown };
std::optional<ExportFormat> parse_export_format(std::string_view text);

class SessionService {
public:
    SessionService(std::shared_ptr<SessionStore> store,
                   std::shared_ptr<const PromptLibrary> library,
                   std::shared_ptr<ModelBackend> backend, ServiceOptions options = {});

    Session create_session(SystemRepresentation rep);
    Session get(const std::string& id) const;
    std::vector<std::string> list() const;

    // Runs stage 1; replaces stage-1 artifacts and clears stage 2. On failure
    // the session keeps its status and gains a failure record.
    Session run_decompose(const std::string& id);
    // `value` is a string for text artifacts and an array of strings for lists.
    // Clears stage 2. Throws UnknownArtifact / ValidationError / PreconditionFailed.
    Session edit_artifact(const std::string& id, const std::string& name,
                          const nlohmann::json& value);
    Session run_threat_model(const std::string& id, const Stage2Config& config);
    // Missing system_label defaults to the session matrix's label.
    Session record_judgment(const std::string& id, ScenarioJudgment judgment);
    std::string export_matrix(const std::string& id, ExportFormat format) const;

    const PromptLibrary& library() const { return *library_; }
    ModelBackend& backend() const { return *backend_; }

private:
    std::mutex& lock_for(const std::string& id);
    Session commit(Session s);
    void record_failure(const std::string& id, const std::string& operation);

    std::shared_ptr<SessionStore> store_;
    std::shared_ptr<const PromptLibrary> library_;
    std::shared_ptr<ModelBackend> backend_;
    ServiceOptions options_;
    std::mutex locks_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// ---------------------------------------------------------------------------
// Background jobs

enum class JobState { Running, Done, Failed };
std::string_view to_string(JobState s);

struct Job {
    std::string id;
    std::string session_id;
    std::string kind;
    JobState state = JobState::Running;
    nlohmann::json error;  // {code, message, detail} when failed
    long revision = 0;     // session revision after success
};

nlohmann::json job_to_json(const Job& job);

class JobRunner {
public:
    JobRunner() = default;
    ~JobRunner();
    JobRunner(const JobRunner&) = delete;
    JobRunner& operator=(const JobRunner&) = delete;

    // Runs `work` on a background thread; its returned session revision is
    // recorded when it finishes.
    Job submit(const std::string& session_id, const std::string& kind,
               std::function<Session()> work);
    std::optional<Job> get(const std::string& job_id) const;
    // Blocks until the job leaves Running (test helper).
    Job wait(const std::string& job_id) const;

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<std::string, Job> jobs_;
    std::vector<std::thread> threads_;
    std::atomic<long> counter_{0};
};

// {code, message, detail} body used by the HTTP layer.
nlohmann::json error_body(const std::exception& e);

std::string make_id();
std::string now_iso8601();

}  // namespace tmc
