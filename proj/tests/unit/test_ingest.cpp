#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "tmc/ingest.hpp"
#include "tmc/text.hpp"

using namespace tmc;
using namespace tmc::testing;
using nlohmann::json;

namespace {

RawInput file_input(const std::filesystem::path& p, std::optional<RepresentationKind> hint = {}) {
    return {FilePath{p}, hint};
}

json sor_doc() {
    return {{"system_name", "Payments"},
            {"components", {{{"name", "api"}, {"kind", "service"}}, {{"name", "db"}, {"kind", "datastore"}}}},
            {"connections", {{{"from", "api"}, {"to", "db"}, {"protocol", "TLS"}}}},
            {"data_classifications", {"PII"}}};
}

}  // namespace

TEST_CASE("the AWS diagram fixture is sniffed as a PNG diagram") {
    auto rep = ingest(file_input(fixtures() / "aws_cloud.png"));
    REQUIRE(rep.kind() == RepresentationKind::Diagram);
    CHECK(rep.diagram().media_type == "image/png");
    CHECK(rep.source_label() == "aws_cloud.png");
    CHECK(rep == ingest(file_input(fixtures() / "aws_cloud.png")));
}

TEST_CASE("image magic wins over the file extension") {
    TempDir dir;
    auto bytes = text::read_file_bytes(fixtures() / "aws_cloud.png");
    text::write_file_atomic(dir / "notes.txt", std::string(bytes.begin(), bytes.end()));
    CHECK(ingest(file_input(dir / "notes.txt")).kind() == RepresentationKind::Diagram);

    std::vector<std::uint8_t> jpeg = {0xFF, 0xD8, 0xFF, 0xE0, 0, 0x10, 'J', 'F', 'I', 'F'};
    auto rep = ingest({InlineBytes{jpeg, "photo"}, {}});
    CHECK(rep.diagram().media_type == "image/jpeg");
}

TEST_CASE("empty, oversize, binary, and missing inputs are rejected") {
    CHECK(error_code_of([] { ingest({InlineText{""}, {}}); }) == "EmptyInput");
    CHECK(error_code_of([] { ingest({InlineText{"  \n "}, {}}); }) == "EmptyInput");
    IngestLimits tiny{16, 5};
    CHECK(error_code_of([&] { ingest({InlineText{"more than five"}, {}}, tiny); }) == "OversizeInput");
    CHECK(error_code_of([&] { ingest(file_input(fixtures() / "aws_cloud.png"), tiny); }) ==
          "OversizeInput");
    std::vector<std::uint8_t> gif = {'G', 'I', 'F', '8', '9', 'a', 0x01, 0x00, 0x01, 0x00};
    CHECK(error_code_of([&] { ingest({InlineBytes{gif, "x.gif"}, {}}); }) == "UnsupportedMediaType");
    CHECK(error_code_of([] { ingest(file_input("/nonexistent/file.png")); }) == "NotFound");
    CHECK(error_code_of([] { ingest({InlineText{"words"}, RepresentationKind::Diagram}); }) ==
          "UnsupportedMediaType");
}

TEST_CASE("JSON with the record shape becomes a system of record") {
    auto rep = ingest({InlineText{sor_doc().dump()}, {}});
    REQUIRE(rep.kind() == RepresentationKind::SystemOfRecord);
    CHECK(rep.record().components.size() == 2);
    CHECK(rep.source_label() == "Payments");

    auto forced_text = ingest({InlineText{sor_doc().dump()}, RepresentationKind::FreeText});
    CHECK(forced_text.kind() == RepresentationKind::FreeText);

    auto plain = ingest({InlineText{R"({"just": "json"})"}, {}});
    CHECK(plain.kind() == RepresentationKind::FreeText);
    CHECK(error_code_of([] { ingest({InlineText{R"({"just": "json"})"}, RepresentationKind::SystemOfRecord}); }) ==
          "SorValidationError");
}

TEST_CASE("record validation names the dangling component") {
    auto doc = sor_doc();
    doc["connections"].push_back({{"from", "api"}, {"to", "db9"}, {"protocol", "TLS"}});
    try {
        ingest({InlineRecord{doc}, {}});
        FAIL("expected SorValidationError");
    } catch (const Error& e) {
        CHECK(e.code() == "SorValidationError");
        CHECK(std::string(e.what()).find("db9") != std::string::npos);
        CHECK(e.detail().at("violations").dump().find("db9") != std::string::npos);
    }
}

TEST_CASE("a serialized record ingests back to an equal value") {
    auto rep = ingest({InlineRecord{sor_doc()}, {}});
    auto again = ingest({InlineText{json(rep.record()).dump()}, {}});
    CHECK(again.record() == rep.record());
    auto fixture = ingest(file_input(fixtures() / "payments_sor.json"));
    CHECK(fixture.kind() == RepresentationKind::SystemOfRecord);
}

TEST_CASE("free text from a file keeps its content") {
    auto rep = ingest(file_input(fixtures() / "three_tier.txt"));
    REQUIRE(rep.kind() == RepresentationKind::FreeText);
    CHECK(rep.text() == text::read_file_text(fixtures() / "three_tier.txt"));
    CHECK(rep.source_label() == "three_tier.txt");
}

TEST_CASE("representation JSON round-trips every kind") {
    for (auto rep : {ingest(file_input(fixtures() / "aws_cloud.png")),
                     ingest(file_input(fixtures() / "three_tier.txt")),
                     ingest({InlineRecord{sor_doc()}, {}})}) {
        CHECK(representation_from_json(representation_to_json(rep)) == rep);
    }
}

TEST_CASE("multi-byte text is measured in characters") {
    IngestLimits limits{1024, 3};
    CHECK_NOTHROW(ingest({InlineText{"éàü"}, {}}, limits));
    CHECK(error_code_of([&] { ingest({InlineText{"éàüö"}, {}}, limits); }) == "OversizeInput");
    std::vector<std::uint8_t> broken = {'a', 0xC3};
    CHECK(error_code_of([&] { ingest({InlineBytes{broken, "b"}, {}}); }) == "UnsupportedMediaType");
}
