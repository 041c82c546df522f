#include "tmc/cli.hpp"

#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "tmc/config.hpp"
#include "tmc/error.hpp"
#include "tmc/evaluation.hpp"
#include "tmc/http_api.hpp"
#include "tmc/ingest.hpp"
#include "tmc/session.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

namespace {

Error usage(const std::string& message) { return Error(ErrorKind::Usage, "UsageError", message); }

struct CommonFlags {
    std::string config;
    std::string store;
    std::string backend;
    std::string cassette;
    std::string script;
    std::string prompts;
    bool text_only = false;
};

struct PipelineFlags {
    std::string session;
    std::string input;
    std::string kind;
    std::string role = "baseline_threat_modeler";
    int min_scenarios = 25;
    int max_scenarios = 40;
    std::string mappings = "CIA,STRIDE";
    std::string format = "json";
    std::string out;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "Shared JSON config file");
    sub->add_option("--store", f.store, "Session storage root");
    sub->add_option("--backend", f.backend, "Model backend")
        ->check(CLI::IsMember({"live", "replay", "scripted", "mock"}));
    sub->add_option("--cassette", f.cassette, "Cassette file (replay input, record output)");
    sub->add_option("--script", f.script, "Scripted responses file");
    sub->add_option("--prompts", f.prompts, "Prompt library (TOML)");
    sub->add_flag("--text-only", f.text_only, "Treat the offline backend as text-only");
}

void add_role_flags(CLI::App* sub, PipelineFlags& f) {
    sub->add_option("--role", f.role, "Cybersecurity role id");
    sub->add_option("--min-scenarios", f.min_scenarios, "Minimum scenario count");
    sub->add_option("--max-scenarios", f.max_scenarios, "Maximum scenario count");
    sub->add_option("--mappings", f.mappings, "Comma-separated mapping columns");
}

void add_input_flags(CLI::App* sub, PipelineFlags& f) {
    sub->add_option("--session", f.session, "Existing session id");
    sub->add_option("--input", f.input, "Representation file (diagram, text, or record JSON)");
    sub->add_option("--kind", f.kind, "Override input kind")
        ->check(CLI::IsMember({"diagram", "text", "sor"}));
}

void write_output(const std::string& doc, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << doc;
        if (!doc.empty() && doc.back() != '\n') out << '\n';
    } else {
        text::write_file_atomic(path, doc);
    }
}

Stage2Config stage2_config(const PipelineFlags& f) {
    Stage2Config c;
    c.role = f.role;
    c.min_scenarios = f.min_scenarios;
    c.max_scenarios = f.max_scenarios;
    c.mappings.clear();
    for (auto name : text::split(f.mappings, ',')) {
        name = text::trim(name);
        if (name.empty()) continue;
        auto spec = builtin_mapping(name);
        if (!spec) throw usage("unknown mapping '" + name + "' (known: CIA, STRIDE)");
        c.mappings.push_back(*spec);
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw usage(e.what());
    }
    return c;
}

ExportFormat export_format(const std::string& name) {
    auto f = parse_export_format(name);
    if (!f) throw usage("unknown format '" + name + "' (json, csv, markdown)");
    return *f;
}

// Everything a subcommand needs, resolved from --config plus flag overrides.
struct Context {
    AppConfig config;
    std::shared_ptr<ModelBackend> backend;
    std::shared_ptr<RecordingBackend> recorder;
    std::shared_ptr<SessionService> service;
};

AppConfig resolve_config(const CommonFlags& f) {
    AppConfig c = f.config.empty() ? AppConfig{} : AppConfig::load(f.config);
    if (!f.store.empty()) c.storage_root = f.store;
    if (!f.prompts.empty()) c.prompt_library = f.prompts;
    if (!f.backend.empty()) c.backend.kind = *parse_backend_kind(f.backend);
    if (!f.cassette.empty()) c.backend.cassette = f.cassette;
    if (!f.script.empty()) c.backend.script = f.script;
    if (f.text_only) c.backend.multimodal = false;
    return c;
}

// `ephemeral` keeps sessions in memory unless a store was named explicitly.
Context make_context(const CommonFlags& f, bool ephemeral, bool record = false) {
    Context ctx;
    ctx.config = resolve_config(f);
    auto library = std::make_shared<const PromptLibrary>(load_prompt_library(ctx.config.prompt_library));
    ctx.backend = make_backend(ctx.config.backend, ctx.config.params);
    if (record) {
        ctx.recorder = std::make_shared<RecordingBackend>(ctx.backend);
        ctx.backend = ctx.recorder;
    }
    std::shared_ptr<SessionStore> store;
    if (ephemeral && f.store.empty() && f.config.empty()) {
        store = std::make_shared<MemorySessionStore>();
    } else {
        store = std::make_shared<FileSessionStore>(ctx.config.storage_root);
    }
    ctx.service = std::make_shared<SessionService>(
        store, library, ctx.backend,
        ServiceOptions{ctx.config.params, ctx.config.structured_attempts});
    return ctx;
}

RawInput raw_input(const PipelineFlags& f) {
    RawInput raw;
    raw.source = FilePath{f.input};
    if (!f.kind.empty()) raw.kind_hint = parse_representation_kind(f.kind);
    return raw;
}

std::string open_session(Context& ctx, const PipelineFlags& f, std::ostream& err) {
    if (f.session.empty() == f.input.empty()) throw usage("give exactly one of --session or --input");
    if (!f.session.empty()) return f.session;
    auto s = ctx.service->create_session(ingest(raw_input(f), ctx.config.limits));
    err << "session " << s.id << " (" << to_string(s.representation.kind()) << ")\n";
    return s.id;
}

std::string format_matrix(const ThreatMatrix& m, ExportFormat format) {
    switch (format) {
        case ExportFormat::Json: return matrix_to_json(m);
        case ExportFormat::Csv: return matrix_to_csv(m);
        case ExportFormat::Markdown: return matrix_to_markdown(m);
    }
    return {};
}

// Full pipeline for --input runs; decompose is skipped for sessions that
// already have stage-1 artifacts.
Session threat_model(Context& ctx, const PipelineFlags& f, const Stage2Config& config,
                     std::ostream& err) {
    auto id = open_session(ctx, f, err);
    if (!f.input.empty()) ctx.service->run_decompose(id);
    return ctx.service->run_threat_model(id, config);
}

std::vector<ThreatMatrix> load_matrices(const std::vector<std::string>& paths) {
    std::vector<ThreatMatrix> out;
    for (const auto& p : paths) {
        auto body = text::read_file_text(p);
        json doc;
        try {
            doc = json::parse(body);
        } catch (const json::parse_error& e) {
            throw parse_error("'" + p + "': " + e.what());
        }
        const json* list = nullptr;
        if (doc.is_array()) list = &doc;
        else if (doc.is_object() && doc.contains("matrices")) list = &doc["matrices"];
        if (!list) {
            out.push_back(matrix_from_json(body));
            continue;
        }
        for (const auto& m : *list) out.push_back(matrix_from_json(m.dump()));
    }
    return out;
}

json read_json(const std::string& path) {
    try {
        return json::parse(text::read_file_text(path));
    } catch (const json::parse_error& e) {
        throw parse_error("'" + path + "': " + e.what());
    }
}

int serve(Context& ctx, const std::string& host, int port, std::ostream& err) {
    ApiServer server(ctx.service, ctx.config.limits);
    int bound = server.bind(host, port);
    err << "listening on http://" << host << ":" << bound << "\n" << std::flush;

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    server.listen();
    // listen() also returns if the socket fails; wake the waiter either way.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

void report_error(const std::exception& e, std::ostream& err) {
    if (const auto* x = dynamic_cast<const Error*>(&e)) {
        err << "error[" << x->code() << "]: " << x->what() << "\n";
        if (!x->detail().empty()) err << "  detail: " << x->detail().dump() << "\n";
    } else {
        err << "error: " << e.what() << "\n";
    }
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Threat-modeling copilot: diagram or description in, threat matrix out."};
    app.name("tmc");
    app.require_subcommand(1);

    CommonFlags common;
    PipelineFlags pf;

    auto* ingest_cmd = app.add_subcommand("ingest", "Create a session from an input file");
    add_common(ingest_cmd, common);
    ingest_cmd->add_option("input", pf.input, "Diagram, text, or record JSON")->required();
    ingest_cmd->add_option("--kind", pf.kind, "Override input kind")
        ->check(CLI::IsMember({"diagram", "text", "sor"}));

    auto* decompose_cmd = app.add_subcommand("decompose", "Run stage 1 and print the artifacts");
    add_common(decompose_cmd, common);
    add_input_flags(decompose_cmd, pf);
    decompose_cmd->add_option("--out", pf.out, "Write artifacts here");

    auto* model_cmd = app.add_subcommand("threat-model", "Produce the threat matrix");
    add_common(model_cmd, common);
    add_input_flags(model_cmd, pf);
    add_role_flags(model_cmd, pf);
    model_cmd->add_option("--format", pf.format, "json, csv, or markdown");
    model_cmd->add_option("--out", pf.out, "Write the matrix here");

    auto* export_cmd = app.add_subcommand("export", "Export a session's matrix");
    add_common(export_cmd, common);
    export_cmd->add_option("--session", pf.session, "Session id")->required();
    export_cmd->add_option("--format", pf.format, "json, csv, or markdown");
    export_cmd->add_option("--out", pf.out, "Write the document here");

    std::vector<std::string> matrix_paths;
    std::string judgments_path, surveys_path;
    bool pooled = false;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate matrices against expert judgments");
    eval_cmd->add_option("--matrix", matrix_paths, "Matrix file(s); arrays or {matrices} accepted")
        ->required();
    eval_cmd->add_option("--judgments", judgments_path, "Judgments file");
    eval_cmd->add_option("--surveys", surveys_path, "Per-system survey responses file");
    eval_cmd->add_flag("--pooled", pooled, "Divide by the pooled sample count");
    std::string eval_format = "text";
    eval_cmd->add_option("--format", eval_format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));
    eval_cmd->add_option("--out", pf.out, "Write the report here");

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    add_common(serve_cmd, common);
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port (0 picks one)");

    auto* record_cmd = app.add_subcommand(
        "record", "Run the full pipeline and save every model exchange to --cassette");
    add_common(record_cmd, common);
    add_input_flags(record_cmd, pf);
    add_role_flags(record_cmd, pf);
    record_cmd->add_option("--out", pf.out, "Write the matrix here");

    auto* replay_cmd = app.add_subcommand("replay", "Run the full pipeline from --cassette");
    add_common(replay_cmd, common);
    add_input_flags(replay_cmd, pf);
    add_role_flags(replay_cmd, pf);
    replay_cmd->add_option("--format", pf.format, "json, csv, or markdown");
    replay_cmd->add_option("--out", pf.out, "Write the matrix here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (ingest_cmd->parsed()) {
            auto ctx = make_context(common, false);
            auto s = ctx.service->create_session(ingest(raw_input(pf), ctx.config.limits));
            out << s.id << "\n";
            return 0;
        }
        if (decompose_cmd->parsed()) {
            auto ctx = make_context(common, !pf.input.empty());
            auto id = open_session(ctx, pf, err);
            auto s = ctx.service->run_decompose(id);
            write_output(json(s.stage1->artifacts).dump(2) + "\n", pf.out, out);
            return 0;
        }
        if (model_cmd->parsed() || replay_cmd->parsed()) {
            auto format = export_format(pf.format);
            auto config = stage2_config(pf);
            if (replay_cmd->parsed()) {
                if (common.cassette.empty()) throw usage("replay needs --cassette");
                if (pf.input.empty()) throw usage("replay needs --input");
                common.backend = "replay";
            }
            auto ctx = make_context(common, !pf.input.empty());
            auto s = threat_model(ctx, pf, config, err);
            write_output(format_matrix(s.stage2->matrix, format), pf.out, out);
            return 0;
        }
        if (record_cmd->parsed()) {
            auto config = stage2_config(pf);
            if (common.cassette.empty()) throw usage("record needs --cassette (output path)");
            if (pf.input.empty()) throw usage("record needs --input");
            auto cassette_out = common.cassette;
            common.cassette.clear();  // the flag names the output here
            if (common.backend == "replay") throw usage("record cannot wrap the replay backend");
            auto ctx = make_context(common, true, true);
            auto s = threat_model(ctx, pf, config, err);
            ctx.recorder->cassette().save(cassette_out);
            err << "recorded " << ctx.recorder->cassette().records.size() << " exchanges to "
                << cassette_out << "\n";
            write_output(matrix_to_json(s.stage2->matrix), pf.out, out);
            return 0;
        }
        if (export_cmd->parsed()) {
            auto format = export_format(pf.format);
            auto ctx = make_context(common, false);
            write_output(ctx.service->export_matrix(pf.session, format), pf.out, out);
            return 0;
        }
        if (eval_cmd->parsed()) {
            auto matrices = load_matrices(matrix_paths);
            std::vector<ScenarioJudgment> judgments;
            std::vector<ModelSurveyResponse> surveys;
            if (!judgments_path.empty()) judgments = parse_judgments(read_json(judgments_path));
            if (!surveys_path.empty()) surveys = parse_survey_responses(read_json(surveys_path));
            auto report = build_report(matrices, judgments, surveys,
                                       pooled ? LossDenominator::Pooled : LossDenominator::PerSystem);
            write_output(eval_format == "json" ? report_to_json(report).dump(2) + "\n"
                                               : report_to_text(report),
                         pf.out, out);
            return 0;
        }
        if (serve_cmd->parsed()) {
            auto ctx = make_context(common, false);
            return serve(ctx, host, port, err);
        }
    } catch (const Error& e) {
        report_error(e, err);
        return e.kind() == ErrorKind::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        report_error(e, err);
        return 1;
    }
    return 2;
}

}  // namespace tmc
