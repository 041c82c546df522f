#pragma once

// JSON HTTP API over SessionService. Pipeline operations run as background
// jobs which clients poll via GET /jobs/{id}.

#include <memory>
#include <string>

#include "tmc/ingest.hpp"
#include "tmc/session.hpp"

namespace tmc {

// HTTP status for an exception, following its ErrorKind.
int http_status_for(const std::exception& e);

class ApiServer {
public:
    ApiServer(std::shared_ptr<SessionService> service, IngestLimits limits = {});
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Binds; port 0 picks a free port. Returns the bound port (throws on failure).
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();
    // Blocks until the server is accepting connections.
    void wait_until_ready() const;

    JobRunner& jobs();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tmc
