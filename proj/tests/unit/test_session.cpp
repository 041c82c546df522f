#include <doctest.h>

#include "support.hpp"
#include "tmc/ingest.hpp"
#include "tmc/session.hpp"
#include "tmc/text.hpp"

using namespace tmc;
using namespace tmc::testing;
using nlohmann::json;

namespace {

std::shared_ptr<ModelBackend> replay(const std::string& cassette) {
    return std::make_shared<ReplayBackend>(Cassette::load(fixtures() / cassette));
}

SystemRepresentation three_tier() { return ingest({FilePath{fixtures() / "three_tier.txt"}, {}}); }

SessionService text_service(std::shared_ptr<SessionStore> store) {
    return SessionService(std::move(store), shared_library(), replay("three_tier.cassette.json"));
}

ScenarioJudgment judgment_on(int id) {
    ScenarioJudgment j;
    j.expert_id = "E_1";
    j.scenario_id = id;
    j.realism = LikertLevel::Agree;
    return j;
}

}  // namespace

TEST_CASE("the pipeline advances status and revision one step per mutation") {
    auto service = text_service(std::make_shared<MemorySessionStore>());
    auto s = service.create_session(three_tier());
    CHECK(s.status == SessionStatus::Ingested);
    const long r0 = s.revision;

    s = service.run_decompose(s.id);
    CHECK(s.status == SessionStatus::Decomposed);
    CHECK(s.revision == r0 + 1);
    CHECK(s.stage1->artifacts.in_scope_components.size() == 7);

    s = service.run_threat_model(s.id, Stage2Config{});
    CHECK(s.status == SessionStatus::Modeled);
    CHECK(s.revision == r0 + 2);
    CHECK(s.stage2->matrix.rows() == 26);
    CHECK(s.stage2->matrix.system_label == "three_tier.txt");

    s = service.record_judgment(s.id, judgment_on(3));
    CHECK(s.revision == r0 + 3);
    CHECK(s.judgments.back().system_label == "three_tier.txt");
    CHECK(service.get(s.id) == s);
}

TEST_CASE("editing an artifact invalidates the matrix and judgments") {
    auto service = text_service(std::make_shared<MemorySessionStore>());
    auto id = service.create_session(three_tier()).id;
    service.run_decompose(id);
    service.run_threat_model(id, Stage2Config{});
    auto before = service.record_judgment(id, judgment_on(1));

    auto after = service.edit_artifact(id, "key_features", json::array({"only feature"}));
    CHECK(after.revision == before.revision + 1);
    CHECK(after.status == SessionStatus::Decomposed);
    CHECK_FALSE(after.stage2.has_value());
    CHECK(after.judgments.empty());
    CHECK(after.stage1->artifacts.key_features == std::vector<std::string>{"only feature"});
    CHECK(error_code_of([&] { service.export_matrix(id, ExportFormat::Json); }) == "PreconditionFailed");
}

TEST_CASE("artifact edits are validated") {
    auto service = text_service(std::make_shared<MemorySessionStore>());
    auto id = service.create_session(three_tier()).id;
    CHECK(error_code_of([&] { service.edit_artifact(id, "key_features", json::array({"x"})); }) ==
          "PreconditionFailed");
    service.run_decompose(id);
    CHECK(error_code_of([&] { service.edit_artifact(id, "colour", "blue"); }) == "UnknownArtifact");
    CHECK(error_code_of([&] { service.edit_artifact(id, "key_features", "not a list"); }) ==
          "ValidationError");
    CHECK(error_code_of([&] { service.edit_artifact(id, "in_scope_components", json::array()); }) ==
          "ValidationError");
    CHECK(error_code_of([&] { service.edit_artifact(id, "application_details", 42); }) == "ValidationError");
    auto s = service.edit_artifact(id, "application_details", "Employees file expenses.");
    CHECK(s.stage1->artifacts.application_details == "Employees file expenses.");
    for (const auto& name : artifact_names()) CHECK_FALSE(name.empty());
}

TEST_CASE("preconditions and missing sessions") {
    auto service = text_service(std::make_shared<MemorySessionStore>());
    auto id = service.create_session(three_tier()).id;
    CHECK(error_code_of([&] { service.run_threat_model(id, Stage2Config{}); }) == "PreconditionFailed");
    CHECK(error_code_of([&] { service.record_judgment(id, judgment_on(1)); }) == "PreconditionFailed");
    CHECK(error_code_of([&] { service.get("nope"); }) == "NotFound");
    CHECK(error_code_of([&] { service.run_decompose("nope"); }) == "NotFound");
}

TEST_CASE("judgments must point at existing rows and the right system") {
    auto service = text_service(std::make_shared<MemorySessionStore>());
    auto id = service.create_session(three_tier()).id;
    service.run_decompose(id);
    service.run_threat_model(id, Stage2Config{});
    CHECK(error_code_of([&] { service.record_judgment(id, judgment_on(99)); }) == "DanglingJudgment");
    auto other = judgment_on(1);
    other.system_label = "elsewhere";
    CHECK(error_code_of([&] { service.record_judgment(id, other); }) == "ValidationError");
    auto empty = judgment_on(1);
    empty.corrected_cia = std::vector<CiaCategory>{};
    CHECK(error_code_of([&] { service.record_judgment(id, empty); }) == "ValidationError");
}

TEST_CASE("a failed operation is recorded without changing status") {
    auto store = std::make_shared<MemorySessionStore>();
    SessionService service(store, shared_library(), std::make_shared<ScriptedBackend>());
    auto s = service.create_session(three_tier());
    CHECK_FALSE(error_code_of([&] { service.run_decompose(s.id); }).empty());
    auto after = service.get(s.id);
    CHECK(after.status == SessionStatus::Ingested);
    CHECK(after.revision == s.revision);
    REQUIRE(after.failures.size() == 1);
    CHECK(after.failures[0].operation == "decompose");
    CHECK_FALSE(after.failures[0].code.empty());
}

TEST_CASE("the file store round-trips a modeled session") {
    TempDir dir;
    auto store = std::make_shared<FileSessionStore>(dir.path());
    auto service = text_service(store);
    auto id = service.create_session(three_tier()).id;
    service.run_decompose(id);
    service.run_threat_model(id, Stage2Config{});
    auto s = service.record_judgment(id, judgment_on(2));

    FileSessionStore reopened(dir.path());
    auto loaded = reopened.load(id);
    CHECK(loaded == s);
    CHECK(loaded.stage2->config.max_scenarios == 40);
    CHECK(reopened.list() == std::vector<std::string>{id});
    for (const char* f : {"session.json", "stage1_transcript.json", "stage2_transcript.json"}) {
        CHECK(std::filesystem::exists(dir / id / f));
    }
    CHECK(error_code_of([&] { reopened.load("../etc"); }) == "NotFound");
    CHECK(error_code_of([&] { reopened.load("0123456789abcdef"); }) == "NotFound");
}

TEST_CASE("the file store keeps uploaded diagrams beside the session") {
    TempDir dir;
    auto store = std::make_shared<FileSessionStore>(dir.path());
    SessionService service(store, shared_library(), replay("aws.json"));
    auto s = service.create_session(ingest({FilePath{fixtures() / "aws_cloud.png"}, {}}));
    CHECK(std::filesystem::exists(dir / s.id / "diagram.png"));
    auto loaded = FileSessionStore(dir.path()).load(s.id);
    CHECK(loaded.representation == s.representation);
    CHECK(json::parse(text::read_file_text(dir / s.id / "session.json")).dump().find("base64") ==
          std::string::npos);
}

TEST_CASE("an unwritable store root is a storage error") {
    TempDir dir;
    text::write_file_atomic(dir / "plain-file", "x");
    auto store = std::make_shared<FileSessionStore>(dir / "plain-file");
    auto service = text_service(store);
    CHECK(error_code_of([&] { service.create_session(three_tier()); }) == "StorageError");
}

TEST_CASE("a corrupt session file is a storage error") {
    TempDir dir;
    auto store = std::make_shared<FileSessionStore>(dir.path());
    auto id = text_service(store).create_session(three_tier()).id;
    text::write_file_atomic(dir / id / "session.json", "{ not json");
    CHECK(error_code_of([&] { store->load(id); }) == "StorageError");
}

TEST_CASE("exports render the stored matrix") {
    auto service = text_service(std::make_shared<MemorySessionStore>());
    auto id = service.create_session(three_tier()).id;
    service.run_decompose(id);
    auto s = service.run_threat_model(id, Stage2Config{});
    CHECK(service.export_matrix(id, ExportFormat::Json) == matrix_to_json(s.stage2->matrix));
    auto csv = parse_csv(service.export_matrix(id, ExportFormat::Csv));
    CHECK(csv.size() == 27);
    CHECK(csv[0] == std::vector<std::string>{"id", "description", "CIA", "STRIDE"});
    CHECK(text::starts_with(service.export_matrix(id, ExportFormat::Markdown), "# Threat matrix: three_tier.txt"));
    CHECK(parse_export_format("md") == ExportFormat::Markdown);
    CHECK_FALSE(parse_export_format("xml").has_value());
}

TEST_CASE("background jobs report completion and failure") {
    JobRunner runner;
    auto service = std::make_shared<SessionService>(std::make_shared<MemorySessionStore>(), shared_library(),
                                                    replay("three_tier.cassette.json"));
    auto id = service->create_session(three_tier()).id;
    auto ok = runner.submit(id, "decompose", [&] { return service->run_decompose(id); });
    CHECK(job_to_json(ok).at("state") == "running");
    auto done = runner.wait(ok.id);
    CHECK(done.state == JobState::Done);
    CHECK(done.revision == service->get(id).revision);

    auto bad = runner.wait(runner.submit(id, "threat-model", [&] {
                                 return service->run_threat_model("missing", Stage2Config{});
                             }).id);
    CHECK(bad.state == JobState::Failed);
    CHECK(bad.error.at("code") == "NotFound");
    CHECK_FALSE(runner.get("job-unknown").has_value());
}
