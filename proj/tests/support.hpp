#pragma once

// Shared helpers for the unit and acceptance suites.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "tmc/backend.hpp"
#include "tmc/error.hpp"
#include "tmc/prompt.hpp"

namespace tmc::testing {

inline std::filesystem::path fixtures() { return TMC_FIXTURES_DIR; }
inline std::filesystem::path source_dir() { return TMC_SOURCE_DIR; }
inline std::filesystem::path cli_path() { return TMC_CLI_PATH; }

inline const PromptLibrary& default_library() {
    static const PromptLibrary lib = load_prompt_library(source_dir() / "prompts/default_library.toml");
    return lib;
}

inline std::shared_ptr<const PromptLibrary> shared_library() {
    static const auto lib = std::make_shared<const PromptLibrary>(default_library());
    return lib;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("tmc-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Error code of whatever `fn` throws, or "" when it returns normally.
template <class Fn>
std::string error_code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    } catch (const std::exception& e) {
        return std::string("std::exception: ") + e.what();
    }
    return "";
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

// Runs a shell command and captures stdout.
inline CommandResult run_command(const std::string& command) {
    CommandResult r;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace tmc::testing

#include "tmc/model.hpp"

namespace tmc::testing {

// Random valid matrix: awkward characters in descriptions, 1..k labels per cell.
inline ThreatMatrix random_matrix(std::mt19937& rng, std::size_t max_rows = 40) {
    static const char* words[] = {"token", "bucket", "\"quoted\"", "comma,split", "pipe|bar",
                                  "naïve", "élan", "<tag>", "50%", "a\\b", "x*y", "`code`"};
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto subset = [&](const std::vector<std::string>& universe) {
        std::vector<std::string> out;
        while (out.empty()) {
            for (const auto& u : universe) {
                if (pick(3) == 0) out.push_back(u);
            }
        }
        return out;
    };
    ThreatMatrix m;
    m.system_label = "system-" + std::to_string(pick(1000));
    const std::size_t rows = 1 + pick(max_rows);
    MappingColumn cia{"CIA", cia_universe(), {}};
    MappingColumn stride{"STRIDE", stride_universe(), {}};
    for (std::size_t i = 0; i < rows; ++i) {
        ThreatScenario s;
        s.id = static_cast<int>(i + 1);
        const std::size_t len = 1 + pick(8);
        for (std::size_t w = 0; w < len; ++w) {
            if (w) s.description += ' ';
            s.description += words[pick(std::size(words))];
        }
        if (pick(4) == 0) s.related_components.push_back("component " + std::to_string(pick(9)));
        m.scenarios.push_back(std::move(s));
        cia.values.push_back(subset(cia_universe()));
        stride.values.push_back(subset(stride_universe()));
    }
    m.columns = {cia, stride};
    return m;
}

// Splits CSV text into records (RFC 4180 quoting, CRLF or LF separators).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(cell));
            cell.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else {
            cell += c;
        }
    }
    if (!cell.empty() || !row.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::unique_ptr<ScriptedBackend> fixture_script(const std::string& name, bool multimodal = true) {
    return ScriptedBackend::from_file(fixtures() / name, {multimodal, 128000});
}

}  // namespace tmc::testing
