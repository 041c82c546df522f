#pragma once

// Error taxonomy shared by every module.
//
// Each error carries a stable machine code (used by the HTTP layer and the
// CLI exit-code mapping) plus an optional structured detail payload.

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tmc {

enum class ErrorKind {
    Usage,       // caller supplied bad arguments
    Validation,  // input violates a domain invariant
    NotFound,
    Conflict,    // operation not allowed in current state
    Backend,     // model backend failed
    Storage,
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message,
          nlohmann::json detail = nlohmann::json::object())
        : std::runtime_error(message), kind_(kind), code_(std::move(code)),
          detail_(std::move(detail)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }
    const nlohmann::json& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string code_;
    nlohmann::json detail_;
};

// ---- core model ----

inline Error length_mismatch(std::size_t expected, std::size_t got) {
    return Error(ErrorKind::Validation, "LengthMismatch",
                 "length mismatch: expected " + std::to_string(expected) + ", got " +
                     std::to_string(got),
                 {{"expected", expected}, {"got", got}});
}

inline Error duplicate_column(const std::string& name) {
    return Error(ErrorKind::Validation, "DuplicateColumn", "duplicate column '" + name + "'",
                 {{"column", name}});
}

inline Error validation_error(const std::string& message,
                              nlohmann::json detail = nlohmann::json::object()) {
    return Error(ErrorKind::Validation, "ValidationError", message, std::move(detail));
}

inline Error parse_error(const std::string& message, std::size_t line = 0, std::size_t column = 0) {
    nlohmann::json detail = nlohmann::json::object();
    if (line > 0) {
        detail["line"] = line;
        detail["column"] = column;
    }
    std::string where = line > 0 ? " (line " + std::to_string(line) + ", column " +
                                       std::to_string(column) + ")"
                                 : "";
    return Error(ErrorKind::Validation, "ParseError", message + where, std::move(detail));
}

// ---- backend ----

inline Error transport_error(const std::string& message) {
    return Error(ErrorKind::Backend, "TransportError", message, {{"retryable", true}});
}

inline Error capability_error(const std::string& message) {
    return Error(ErrorKind::Backend, "CapabilityError", message);
}

inline Error budget_exceeded(std::size_t estimated, std::size_t limit) {
    return Error(ErrorKind::Backend, "BudgetExceeded",
                 "request of ~" + std::to_string(estimated) + " tokens exceeds context of " +
                     std::to_string(limit),
                 {{"estimated_tokens", estimated}, {"max_context_tokens", limit}});
}

inline Error structured_output_failure(int attempts, const std::string& reason,
                                       const std::string& last_raw) {
    return Error(ErrorKind::Backend, "StructuredOutputFailure",
                 "no valid structured output after " + std::to_string(attempts) +
                     " attempts: " + reason,
                 {{"attempts", attempts}, {"reason", reason}, {"last_raw_text", last_raw}});
}

// ---- pipeline ----

inline Error precondition_failed(const std::string& message) {
    return Error(ErrorKind::Conflict, "PreconditionFailed", message);
}

inline Error dangling_judgment(const std::vector<int>& ids) {
    std::string list;
    for (int id : ids) {
        list += (list.empty() ? "" : ", ") + std::to_string(id);
    }
    return Error(ErrorKind::Validation, "DanglingJudgment",
                 "judgment references unknown scenario(s): " + list, {{"ids", ids}});
}

inline Error not_found(const std::string& what) {
    return Error(ErrorKind::NotFound, "NotFound", what + " not found");
}

inline Error storage_error(const std::string& message) {
    return Error(ErrorKind::Storage, "StorageError", message);
}

// Re-throws `e` with the failing phase/step prefixed to the message and
// recorded in the detail payload. Non-tmc exceptions become Internal errors.
[[noreturn]] void rethrow_tagged(const std::string& phase);

}  // namespace tmc
