#include "tmc/http_api.hpp"

#include <regex>

#include <httplib.h>

#include "tmc/error.hpp"
#include "tmc/text.hpp"

namespace tmc {

using nlohmann::json;

int http_status_for(const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    if (!err) return 500;
    switch (err->kind()) {
        case ErrorKind::Usage:
        case ErrorKind::Validation: return 400;
        case ErrorKind::NotFound: return 404;
        case ErrorKind::Conflict: return 409;
        case ErrorKind::Backend: return 502;
        case ErrorKind::Storage:
        case ErrorKind::Internal: return 500;
    }
    return 500;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw parse_error(std::string("request body is not JSON: ") + e.what());
    }
}

std::optional<RepresentationKind> kind_field(const std::string& value) {
    if (value.empty()) return std::nullopt;
    auto k = parse_representation_kind(value);
    if (!k) throw validation_error("unknown representation kind '" + value + "'");
    return k;
}

// JSON form: {"kind"?, "source_label"?, one of "text" | "record" | "image_base64"}.
RawInput raw_from_json(const json& body) {
    if (!body.is_object()) throw validation_error("session body must be an object");
    RawInput raw;
    raw.kind_hint = kind_field(body.value("kind", std::string{}));
    auto label = body.value("source_label", std::string{});
    if (body.contains("image_base64")) {
        raw.source = InlineBytes{text::base64_decode(body["image_base64"].get<std::string>()),
                                 label.empty() ? "upload" : label};
    } else if (body.contains("record")) {
        raw.source = InlineRecord{body["record"]};
        if (!raw.kind_hint) raw.kind_hint = RepresentationKind::SystemOfRecord;
    } else if (body.contains("text")) {
        auto text = body["text"].get<std::string>();
        if (label.empty()) raw.source = InlineText{std::move(text)};
        else raw.source = InlineBytes{{text.begin(), text.end()}, label};
    } else {
        throw validation_error("session body needs one of text, record, image_base64");
    }
    return raw;
}

}  // namespace

struct ApiServer::Impl {
    std::shared_ptr<SessionService> service;
    IngestLimits limits;
    httplib::Server server;
    JobRunner jobs;

    Impl(std::shared_ptr<SessionService> s, IngestLimits l) : service(std::move(s)), limits(l) {
        routes();
    }

    template <class Fn>
    httplib::Server::Handler guarded(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const std::exception& e) {
                send_json(res, http_status_for(e), error_body(e));
            }
        };
    }

    SystemRepresentation ingest_request(const httplib::Request& req) {
        if (req.is_multipart_form_data()) {
            if (!req.has_file("file")) throw validation_error("multipart upload needs a 'file' part");
            const auto& file = req.get_file_value("file");
            RawInput raw;
            if (req.has_file("kind")) raw.kind_hint = kind_field(req.get_file_value("kind").content);
            raw.source = InlineBytes{{file.content.begin(), file.content.end()},
                                     file.filename.empty() ? "upload" : file.filename};
            return ingest(raw, limits);
        }
        return ingest(raw_from_json(parse_body(req)), limits);
    }

    void routes() {
        server.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        }));

        server.Get("/roles", guarded([this](const httplib::Request&, httplib::Response& res) {
            json roles = json::array();
            for (const auto& r : service->library().roles()) {
                roles.push_back(
                    {{"id", r.id}, {"display_name", r.display_name}, {"prompt_key", r.prompt_key}});
            }
            send_json(res, 200, {{"roles", roles}});
        }));

        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = service->create_session(ingest_request(req));
            send_json(res, 201, session_to_json(s));
        }));

        server.Get(R"(/sessions/([^/]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, session_to_json(service->get(req.matches[1])));
                   }));

        server.Post(R"(/sessions/([^/]+)/decompose)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        std::string id = req.matches[1];
                        service->get(id);  // 404 before a job is created
                        auto job = jobs.submit(id, "decompose",
                                               [svc = service, id] { return svc->run_decompose(id); });
                        send_json(res, 202, job_to_json(job));
                    }));

        server.Post(R"(/sessions/([^/]+)/threat-model)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        std::string id = req.matches[1];
                        auto config = parse_body(req).get<Stage2Config>();
                        config.validate();
                        auto s = service->get(id);
                        if (!s.stage1) {
                            throw precondition_failed("session " + id + " has not been decomposed");
                        }
                        auto job = jobs.submit(id, "threat-model", [svc = service, id, config] {
                            return svc->run_threat_model(id, config);
                        });
                        send_json(res, 202, job_to_json(job));
                    }));

        server.Get(R"(/jobs/([^/]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       auto job = jobs.get(req.matches[1]);
                       if (!job) throw not_found("job '" + std::string(req.matches[1]) + "'");
                       send_json(res, 200, job_to_json(*job));
                   }));

        server.Patch(R"(/sessions/([^/]+)/artifacts/([^/]+))",
                     guarded([this](const httplib::Request& req, httplib::Response& res) {
                         json body = parse_body(req);
                         json value = body.is_object() && body.contains("value") ? body["value"] : body;
                         auto s = service->edit_artifact(req.matches[1], req.matches[2], value);
                         send_json(res, 200, session_to_json(s));
                     }));

        server.Get(R"(/sessions/([^/]+)/matrix)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       auto s = service->get(req.matches[1]);
                       if (!s.stage2) {
                           send_json(res, 200, {{"state", "not_modeled"}, {"revision", s.revision}});
                           return;
                       }
                       send_json(res, 200,
                                 {{"state", "modeled"},
                                  {"revision", s.revision},
                                  {"config", s.stage2->config},
                                  {"matrix", s.stage2->matrix}});
                   }));

        server.Post(R"(/sessions/([^/]+)/judgments)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        auto judgment = parse_body(req).get<ScenarioJudgment>();
                        auto s = service->record_judgment(req.matches[1], std::move(judgment));
                        send_json(res, 201,
                                  {{"revision", s.revision},
                                   {"judgment", s.judgments.back()},
                                   {"judgments", s.judgments.size()}});
                    }));

        server.Get(R"(/sessions/([^/]+)/export)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       auto name = req.has_param("format") ? req.get_param_value("format") : "json";
                       auto format = parse_export_format(name);
                       if (!format) throw validation_error("unknown export format '" + name + "'");
                       auto doc = service->export_matrix(req.matches[1], *format);
                       const char* type = *format == ExportFormat::Json ? "application/json"
                                          : *format == ExportFormat::Csv ? "text/csv"
                                                                          : "text/markdown";
                       res.status = 200;
                       res.set_content(doc, type);
                   }));
    }
};

ApiServer::ApiServer(std::shared_ptr<SessionService> service, IngestLimits limits)
    : impl_(std::make_unique<Impl>(std::move(service), limits)) {}

ApiServer::~ApiServer() {
    stop();
}

int ApiServer::bind(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                          : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error(ErrorKind::Usage, "BindFailed",
                                "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

void ApiServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

JobRunner& ApiServer::jobs() { return impl_->jobs; }

}  // namespace tmc
