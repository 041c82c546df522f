#include "tmc/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <random>

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSessionFile = "session.json";
constexpr const char* kStage1File = "stage1_transcript.json";
constexpr const char* kStage2File = "stage2_transcript.json";

std::string diagram_file_name(const std::string& media_type) {
    return media_type == "image/jpeg" ? "diagram.jpg" : "diagram.png";
}

json failure_to_json(const FailureRecord& f) {
    return {{"operation", f.operation}, {"code", f.code}, {"message", f.message}, {"at", f.at}};
}

FailureRecord failure_from_json(const json& j) {
    return {j.value("operation", ""), j.value("code", ""), j.value("message", ""),
            j.value("at", "")};
}

// Everything but transcripts and image bytes; those live in sibling files.
json session_core_json(const Session& s) {
    json rep;
    if (s.representation.kind() == RepresentationKind::Diagram) {
        rep = {{"kind", to_string(RepresentationKind::Diagram)},
               {"source_label", s.representation.source_label()},
               {"media_type", s.representation.diagram().media_type},
               {"file", diagram_file_name(s.representation.diagram().media_type)}};
    } else {
        rep = representation_to_json(s.representation);
    }
    json j = {{"id", s.id},
              {"created_at", s.created_at},
              {"updated_at", s.updated_at},
              {"status", to_string(s.status)},
              {"revision", s.revision},
              {"representation", rep},
              {"judgments", s.judgments},
              {"failures", json::array()}};
    for (const auto& f : s.failures) j["failures"].push_back(failure_to_json(f));
    j["stage1"] = s.stage1 ? json{{"artifacts", s.stage1->artifacts}} : json(nullptr);
    j["stage2"] = s.stage2 ? json{{"config", s.stage2->config}, {"matrix", s.stage2->matrix}}
                           : json(nullptr);
    return j;
}

void check_status(const Session& s) {
    if (s.status == SessionStatus::Decomposed && !s.stage1) {
        throw storage_error("session " + s.id + " is Decomposed without stage-1 artifacts");
    }
    if (s.status == SessionStatus::Modeled && (!s.stage1 || !s.stage2)) {
        throw storage_error("session " + s.id + " is Modeled without a matrix");
    }
}

Error unknown_artifact(const std::string& name) {
    return Error(ErrorKind::Validation, "UnknownArtifact", "unknown artifact '" + name + "'",
                 {{"name", name}, {"allowed", artifact_names()}});
}

std::string require_text(const json& value, const std::string& name) {
    if (!value.is_string()) throw validation_error(name + " must be a string");
    auto s = value.get<std::string>();
    if (text::trim(s).empty()) throw validation_error(name + " must not be empty");
    return s;
}

std::vector<std::string> require_list(const json& value, const std::string& name) {
    if (!value.is_array()) throw validation_error(name + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : value) {
        if (!v.is_string() || text::trim(v.get<std::string>()).empty()) {
            throw validation_error(name + " items must be non-empty strings");
        }
        out.push_back(v.get<std::string>());
    }
    if (out.empty()) throw validation_error(name + " must not be empty");
    return out;
}

}  // namespace

std::string_view to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::Ingested: return "Ingested";
        case SessionStatus::Decomposed: return "Decomposed";
        case SessionStatus::Modeled: return "Modeled";
    }
    return "";
}

std::optional<SessionStatus> parse_session_status(std::string_view text) {
    for (auto s : {SessionStatus::Ingested, SessionStatus::Decomposed, SessionStatus::Modeled}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

json session_to_json(const Session& s, bool include_transcripts) {
    json j = session_core_json(s);
    j["representation"] = representation_to_json(s.representation);
    if (include_transcripts) {
        if (s.stage1) j["stage1"]["transcript"] = s.stage1->transcript;
        if (s.stage2) j["stage2"]["transcript"] = s.stage2->transcript;
    }
    return j;
}

const std::vector<std::string>& artifact_names() {
    static const std::vector<std::string> names = {"architecture_description",
                                                   "application_details", "key_features",
                                                   "in_scope_components", "composed_text"};
    return names;
}

std::string make_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char hex[] = "0123456789abcdef";
    auto v = rng();
    std::string id(16, '0');
    for (auto& c : id) {
        c = hex[v & 0xF];
        v >>= 4;
    }
    return id;
}

std::string now_iso8601() {
    auto now = std::chrono::system_clock::now();
    auto t = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms.count()));
    return out;
}

// ---------------------------------------------------------------------------
// FileSessionStore

FileSessionStore::FileSessionStore(fs::path root) : root_(std::move(root)) {}

fs::path FileSessionStore::dir_for(const std::string& id) const {
    // Ids are generated hex; anything else cannot name a stored session.
    bool ok = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
    if (!ok) throw not_found("session '" + id + "'");
    return root_ / id;
}

bool FileSessionStore::exists(const std::string& id) const {
    std::error_code ec;
    try {
        return fs::exists(dir_for(id) / kSessionFile, ec);
    } catch (const Error&) {
        return false;
    }
}

Session FileSessionStore::load(const std::string& id) const {
    auto dir = dir_for(id);
    if (!fs::exists(dir / kSessionFile)) throw not_found("session '" + id + "'");
    try {
        json j = json::parse(text::read_file_text(dir / kSessionFile));
        Session s;
        s.id = j.at("id").get<std::string>();
        s.created_at = j.value("created_at", "");
        s.updated_at = j.value("updated_at", "");
        auto status = parse_session_status(j.value("status", ""));
        if (!status) throw storage_error("session " + id + " has an unknown status");
        s.status = *status;
        s.revision = j.value("revision", 0L);

        const json& rep = j.at("representation");
        if (rep.value("kind", "") == to_string(RepresentationKind::Diagram)) {
            auto bytes = text::read_file_bytes(dir / rep.at("file").get<std::string>());
            s.representation = SystemRepresentation::diagram(
                {std::move(bytes), rep.at("media_type").get<std::string>()},
                rep.value("source_label", ""));
        } else {
            s.representation = representation_from_json(rep);
        }

        s.judgments = j.value("judgments", std::vector<ScenarioJudgment>{});
        for (const auto& f : j.value("failures", json::array())) {
            s.failures.push_back(failure_from_json(f));
        }
        if (j.contains("stage1") && !j["stage1"].is_null()) {
            Stage1State st;
            st.artifacts = j["stage1"].at("artifacts").get<SolutionDescription>();
            st.transcript.input_kind = s.representation.kind();
            if (fs::exists(dir / kStage1File)) {
                st.transcript =
                    json::parse(text::read_file_text(dir / kStage1File)).get<Stage1Transcript>();
            }
            s.stage1 = std::move(st);
        }
        if (j.contains("stage2") && !j["stage2"].is_null()) {
            Stage2State st;
            st.config = j["stage2"].at("config").get<Stage2Config>();
            st.matrix = j["stage2"].at("matrix").get<ThreatMatrix>();
            if (fs::exists(dir / kStage2File)) {
                st.transcript = json::parse(text::read_file_text(dir / kStage2File))
                                    .get<std::vector<TranscriptRecord>>();
            }
            s.stage2 = std::move(st);
        }
        check_status(s);
        return s;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Storage) throw;
        throw storage_error("session " + id + " is unreadable: " + e.what());
    } catch (const std::exception& e) {
        throw storage_error("session " + id + " is unreadable: " + e.what());
    }
}

void FileSessionStore::save(const Session& session) {
    auto dir = dir_for(session.id);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw storage_error("cannot create " + dir.string() + ": " + ec.message());
    try {
        if (session.representation.kind() == RepresentationKind::Diagram) {
            const auto& img = session.representation.diagram();
            auto path = dir / diagram_file_name(img.media_type);
            if (!fs::exists(path)) {
                text::write_file_atomic(path, std::string(img.bytes.begin(), img.bytes.end()));
            }
        }
        if (session.stage1) {
            text::write_file_atomic(dir / kStage1File,
                                    json(session.stage1->transcript).dump(2) + "\n");
        } else {
            fs::remove(dir / kStage1File, ec);
        }
        if (session.stage2) {
            text::write_file_atomic(dir / kStage2File,
                                    json(session.stage2->transcript).dump(2) + "\n");
        } else {
            fs::remove(dir / kStage2File, ec);
        }
        // session.json last: it is the commit point readers look for.
        text::write_file_atomic(dir / kSessionFile, session_core_json(session).dump(2) + "\n");
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Storage) throw;
        throw storage_error("cannot write session " + session.id + ": " + e.what());
    }
}

std::vector<std::string> FileSessionStore::list() const {
    std::vector<std::string> ids;
    std::error_code ec;
    if (!fs::is_directory(root_, ec)) return ids;
    for (const auto& entry : fs::directory_iterator(root_, ec)) {
        if (entry.is_directory() && fs::exists(entry.path() / kSessionFile)) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool MemorySessionStore::exists(const std::string& id) const {
    std::lock_guard lock(mu_);
    return sessions_.count(id) > 0;
}

Session MemorySessionStore::load(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("session '" + id + "'");
    return it->second;
}

void MemorySessionStore::save(const Session& session) {
    check_status(session);
    std::lock_guard lock(mu_);
    sessions_[session.id] = session;
}

std::vector<std::string> MemorySessionStore::list() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
}

// ---------------------------------------------------------------------------
// SessionService

std::optional<ExportFormat> parse_export_format(std::string_view text) {
    if (text == "json") return ExportFormat::Json;
    if (text == "csv") return ExportFormat::Csv;
    if (text == "markdown" || text == "md") return ExportFormat::Markdown;
    return std::nullopt;
}

SessionService::SessionService(std::shared_ptr<SessionStore> store,
                               std::shared_ptr<const PromptLibrary> library,
                               std::shared_ptr<ModelBackend> backend, ServiceOptions options)
    : store_(std::move(store)), library_(std::move(library)), backend_(std::move(backend)),
      options_(options) {}

std::mutex& SessionService::lock_for(const std::string& id) {
    std::lock_guard lock(locks_mu_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

Session SessionService::commit(Session s) {
    s.revision += 1;
    s.updated_at = now_iso8601();
    store_->save(s);
    return s;
}

void SessionService::record_failure(const std::string& id, const std::string& operation) {
    // Called from a catch block; the failure is appended without a revision
    // bump since no artifact changed.
    FailureRecord rec{operation, "InternalError", "unknown error", now_iso8601()};
    try {
        throw;
    } catch (const Error& e) {
        rec.code = e.code();
        rec.message = e.what();
    } catch (const std::exception& e) {
        rec.message = e.what();
    } catch (...) {
    }
    try {
        Session s = store_->load(id);
        s.failures.push_back(std::move(rec));
        store_->save(s);
    } catch (...) {
        // Reporting the original failure matters more than the record.
    }
}

Session SessionService::create_session(SystemRepresentation rep) {
    Session s;
    for (int attempt = 0;; ++attempt) {
        s.id = make_id();
        if (!store_->exists(s.id)) break;
        if (attempt > 16) throw storage_error("could not allocate a session id");
    }
    std::lock_guard lock(lock_for(s.id));
    s.representation = std::move(rep);
    s.created_at = now_iso8601();
    s.status = SessionStatus::Ingested;
    return commit(std::move(s));
}

Session SessionService::get(const std::string& id) const { return store_->load(id); }

std::vector<std::string> SessionService::list() const { return store_->list(); }

Session SessionService::run_decompose(const std::string& id) {
    std::lock_guard lock(lock_for(id));
    Session s = store_->load(id);
    Stage1Result result;
    try {
        result = run_stage1(s.representation, *library_, *backend_,
                            {options_.params, options_.structured_attempts});
    } catch (...) {
        record_failure(id, "decompose");
        throw;
    }
    s.stage1 = Stage1State{std::move(result.solution), std::move(result.transcript)};
    s.stage2.reset();
    s.judgments.clear();
    s.status = SessionStatus::Decomposed;
    return commit(std::move(s));
}

Session SessionService::edit_artifact(const std::string& id, const std::string& name,
                                      const json& value) {
    const auto& names = artifact_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) throw unknown_artifact(name);

    std::lock_guard lock(lock_for(id));
    Session s = store_->load(id);
    if (!s.stage1) throw precondition_failed("session " + id + " has not been decomposed");

    SolutionDescription& a = s.stage1->artifacts;
    if (name == "architecture_description") a.architecture_description = require_text(value, name);
    else if (name == "application_details") a.application_details = require_text(value, name);
    else if (name == "composed_text") a.composed_text = require_text(value, name);
    else if (name == "key_features") a.key_features = require_list(value, name);
    else a.in_scope_components = require_list(value, name);

    if (auto v = a.violations(); !v.empty()) {
        throw validation_error("edited artifacts are invalid", {{"violations", v}});
    }
    s.stage2.reset();
    s.judgments.clear();
    s.status = SessionStatus::Decomposed;
    return commit(std::move(s));
}

Session SessionService::run_threat_model(const std::string& id, const Stage2Config& config) {
    std::lock_guard lock(lock_for(id));
    Session s = store_->load(id);
    if (!s.stage1) throw precondition_failed("session " + id + " has not been decomposed");
    Stage2Result result;
    try {
        config.validate();
        result = run_stage2(s.stage1->artifacts, config, *library_, *backend_,
                            s.representation.source_label(),
                            {options_.params, options_.structured_attempts});
    } catch (...) {
        record_failure(id, "threat-model");
        throw;
    }
    s.stage2 = Stage2State{config, std::move(result.matrix), std::move(result.transcript)};
    s.judgments.clear();
    s.status = SessionStatus::Modeled;
    return commit(std::move(s));
}

Session SessionService::record_judgment(const std::string& id, ScenarioJudgment judgment) {
    std::lock_guard lock(lock_for(id));
    Session s = store_->load(id);
    if (!s.stage2) throw precondition_failed("session " + id + " has no threat matrix");
    judgment.validate();
    if (judgment.system_label.empty()) judgment.system_label = s.stage2->matrix.system_label;
    if (judgment.system_label != s.stage2->matrix.system_label) {
        throw validation_error("judgment names system '" + judgment.system_label +
                               "' but the session matrix is '" +
                               s.stage2->matrix.system_label + "'");
    }
    if (!s.stage2->matrix.scenario(judgment.scenario_id)) {
        throw dangling_judgment({judgment.scenario_id});
    }
    s.judgments.push_back(std::move(judgment));
    return commit(std::move(s));
}

std::string SessionService::export_matrix(const std::string& id, ExportFormat format) const {
    Session s = store_->load(id);
    if (!s.stage2) throw precondition_failed("session " + id + " has no threat matrix");
    switch (format) {
        case ExportFormat::Json: return matrix_to_json(s.stage2->matrix);
        case ExportFormat::Csv: return matrix_to_csv(s.stage2->matrix);
        case ExportFormat::Markdown: return matrix_to_markdown(s.stage2->matrix);
    }
    return {};
}

// ---------------------------------------------------------------------------
// Jobs

std::string_view to_string(JobState s) {
    switch (s) {
        case JobState::Running: return "running";
        case JobState::Done: return "done";
        case JobState::Failed: return "failed";
    }
    return "";
}

json job_to_json(const Job& job) {
    json j = {{"job_id", job.id},
              {"session_id", job.session_id},
              {"kind", job.kind},
              {"state", to_string(job.state)},
              {"error", job.error}};
    if (job.state == JobState::Done) j["revision"] = job.revision;
    return j;
}

json error_body(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        return {{"code", err->code()}, {"message", err->what()}, {"detail", err->detail()}};
    }
    return {{"code", "InternalError"}, {"message", e.what()}, {"detail", json::object()}};
}

JobRunner::~JobRunner() {
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mu_);
        threads.swap(threads_);
    }
    for (auto& t : threads) {
        if (t.joinable()) t.join();
    }
}

Job JobRunner::submit(const std::string& session_id, const std::string& kind,
                      std::function<Session()> work) {
    Job job;
    job.id = "job-" + std::to_string(++counter_) + "-" + make_id().substr(0, 8);
    job.session_id = session_id;
    job.kind = kind;
    std::lock_guard lock(mu_);
    jobs_[job.id] = job;
    threads_.emplace_back([this, id = job.id, work = std::move(work)] {
        JobState state = JobState::Done;
        json error = nullptr;
        long revision = 0;
        try {
            revision = work().revision;
        } catch (const std::exception& e) {
            state = JobState::Failed;
            error = error_body(e);
        }
        {
            std::lock_guard inner(mu_);
            auto& j = jobs_[id];
            j.state = state;
            j.error = std::move(error);
            j.revision = revision;
        }
        cv_.notify_all();
    });
    return job;
}

std::optional<Job> JobRunner::get(const std::string& job_id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

Job JobRunner::wait(const std::string& job_id) const {
    std::unique_lock lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw not_found("job '" + job_id + "'");
    cv_.wait(lock, [&] { return jobs_.at(job_id).state != JobState::Running; });
    return jobs_.at(job_id);
}

}  // namespace tmc
