#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "iconsim/store.hpp"
#include "support.hpp"

using namespace iconsim;
using testing_support::TempDir;

namespace {

EmbeddingStore sample_store(std::size_t rows) {
    std::mt19937_64 rng(30);
    auto s = make_store(PipelineConfig::stub_defaults(), 4, 3);
    for (std::size_t r = 0; r < rows; ++r) {
        append(s, {"app." + std::to_string(r), testing_support::random_vector(rng, 4),
                   testing_support::random_vector(rng, 3)});
    }
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void overwrite(const std::filesystem::path& p, std::size_t offset, const std::string& bytes) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(offset));
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("config JSON round-trips and hashes stably", "[store]") {
    auto cfg = PipelineConfig::stub_defaults();
    cfg.projection_seed = 99;
    cfg.metric = MetricConfig::style(Norm::l2);
    const auto back = PipelineConfig::from_json(cfg.to_json());
    CHECK(back.canonical_json() == cfg.canonical_json());
    CHECK(back.hash() == cfg.hash());
    CHECK(cfg.hash_hex().size() == 16);
    CHECK(PipelineConfig::stub_defaults().hash() != cfg.hash());
    CHECK(PipelineConfig::format_hash(0xabc) == "0000000000000abc");

    const auto onnx = PipelineConfig::from_json(nlohmann::json::parse(R"({"backbone":{"kind":"onnx","model":"m"}})"));
    CHECK(onnx.input_size == 224);
    CHECK(onnx.projection_dim == 4096);
    CHECK(onnx.model == "m");

    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"bogus":1})")), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"projection":{"generator":"mt19937"}})")),
                    Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"metric":{"kind":"combined","norm":"cos"}})")),
                    Error);
}

TEST_CASE("threshold grid", "[store]") {
    const auto v = ThresholdGrid{}.values();
    REQUIRE(v.size() == 101);
    CHECK(v.front() == 0.0);
    CHECK(v[25] == Catch::Approx(0.25));
    CHECK(v.back() == 1.0);
    CHECK_THROWS_AS((ThresholdGrid{0, 1, 0}.values()), Error);
}

TEST_CASE("store round-trips with its sidecar", "[store]") {
    TempDir dir;
    const auto s = sample_store(5);
    write_store(dir / "s.bin", s);
    const auto back = read_store(dir / "s.bin");
    CHECK(back.header == s.header);
    CHECK(back.app_ids == s.app_ids);
    CHECK(back.content == s.content);
    CHECK(back.style == s.style);
    CHECK(back.embedding(2) == s.embedding(2));
    CHECK(back.config().hash() == s.header.config_hash);
    CHECK(s.header.flags == kStoreFlagStubBackbone);
    CHECK(s.header.input_size == 64);

    const auto sidecar = slurp(sidecar_path(dir / "s.bin"));
    CHECK(sidecar.find(R"({"app_id":"app.0","row":0})") == 0);
    // Header (60 bytes + config JSON) then 5 rows of 7 floats.
    CHECK(std::filesystem::file_size(dir / "s.bin") == 4 + 4 * 4 + 8 * 3 + 4 + 12 + 4 + s.header.config_json.size() + 5 * 7 * 4);
}

TEST_CASE("empty stores round-trip", "[store]") {
    TempDir dir;
    const auto s = sample_store(0);
    write_store(dir / "e.bin", s);
    const auto back = read_store(dir / "e.bin");
    CHECK(back.size() == 0);
    CHECK(back.header == s.header);
}

TEST_CASE("corrupt stores are rejected", "[store]") {
    TempDir dir;
    write_store(dir / "s.bin", sample_store(3));

    SECTION("bad magic") {
        overwrite(dir / "s.bin", 0, "XXXX");
        CHECK_THROWS_AS(read_store(dir / "s.bin"), Error);
    }
    SECTION("unknown version") {
        overwrite(dir / "s.bin", 4, std::string("\x02\0\0\0", 4));
        try {
            read_store(dir / "s.bin");
            FAIL("expected config_mismatch");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::config_mismatch);
        }
    }
    SECTION("hash does not match the embedded config") {
        overwrite(dir / "s.bin", 4 + 4 * 4 + 8 * 2, std::string(8, '\x11'));
        CHECK_THROWS_AS(read_store(dir / "s.bin"), Error);
    }
    SECTION("truncated") {
        std::filesystem::resize_file(dir / "s.bin", std::filesystem::file_size(dir / "s.bin") - 3);
        CHECK_THROWS_AS(read_store(dir / "s.bin"), Error);
    }
    SECTION("sidecar row count") {
        std::ofstream(sidecar_path(dir / "s.bin")) << R"({"row":0,"app_id":"app.0"})" << '\n';
        CHECK_THROWS_AS(read_store(dir / "s.bin"), Error);
    }
    SECTION("sidecar order") {
        std::ofstream(sidecar_path(dir / "s.bin"))
            << R"({"row":1,"app_id":"a"})" << '\n' << R"({"row":0,"app_id":"b"})" << '\n' << R"({"row":2,"app_id":"c"})" << '\n';
        CHECK_THROWS_AS(read_store(dir / "s.bin"), Error);
    }
}

TEST_CASE("append checks dimensions", "[store]") {
    auto s = sample_store(1);
    CHECK_THROWS_AS(append(s, {"z", {1, 2}, {1, 2, 3}}), Error);
    CHECK(s.size() == 1);
}
