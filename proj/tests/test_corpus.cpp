#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <map>

#include "iconsim/corpus.hpp"
#include "support.hpp"

using namespace iconsim;
using testing_support::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

// Independent oracle: count characters in a std::map, lowercase ASCII only.
double oracle_char_cosine(const std::u32string& a, const std::u32string& b) {
    auto lower = [](char32_t c) { return c < 128 ? static_cast<char32_t>(std::tolower(static_cast<int>(c))) : c; };
    std::map<char32_t, double> ca, cb;
    for (auto c : a) ca[lower(c)] += 1;
    for (auto c : b) cb[lower(c)] += 1;
    double dot = 0, na = 0, nb = 0;
    for (auto& [c, n] : ca) {
        na += n * n;
        if (cb.count(c)) dot += n * cb[c];
    }
    for (auto& [c, n] : cb) nb += n * n;
    return dot / std::sqrt(na * nb);
}

IconRecord rec(std::string id, std::string name, std::string dev, std::string cat, std::uint64_t dl) {
    return {id, id + ".png", std::move(name), std::move(dev), std::move(cat), dl};
}

}  // namespace

TEST_CASE("manifest lines resolve icon paths against the manifest directory", "[corpus]") {
    TempDir dir;
    write_file(dir / "m.jsonl",
               R"({"app_id":"a","icon_path":"icons/a.png","app_name":"Alpha","developer":"d","category":"GAME","downloads":10})"
               "\n\n"
               R"({"app_id":"b","icon_path":"/abs/b.png","app_name":"Beta","developer":"d","category":"GAME","downloads":0})"
               "\n");
    const auto c = load_manifest(dir / "m.jsonl");
    REQUIRE(c.size() == 2);
    CHECK(c[0].icon_path == dir / "icons/a.png");
    CHECK(c[1].icon_path == "/abs/b.png");
    CHECK(c.at("a").downloads == 10);
    CHECK(c.row_of("b") == 1u);
    CHECK_FALSE(c.row_of("zzz"));
    CHECK_THROWS_AS(c.at("zzz"), Error);
}

TEST_CASE("manifest errors name the offending line", "[corpus]") {
    TempDir dir;
    const std::string good =
        R"({"app_id":"a","icon_path":"a.png","app_name":"A","developer":"d","category":"c","downloads":1})";

    write_file(dir / "dup.jsonl", good + "\n" + good + "\n");
    try {
        load_manifest(dir / "dup.jsonl");
        FAIL("expected duplicate_id");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_id);
        CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }

    write_file(dir / "bad.jsonl", good + "\n{not json\n");
    try {
        load_manifest(dir / "bad.jsonl");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    write_file(dir / "neg.jsonl",
               R"({"app_id":"a","icon_path":"a.png","app_name":"A","developer":"d","category":"c","downloads":-5})");
    CHECK_THROWS_AS(load_manifest(dir / "neg.jsonl"), Error);
    write_file(dir / "missing.jsonl", R"({"app_id":"a","icon_path":"a.png"})");
    CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), Error);
    CHECK_THROWS_AS(load_manifest(dir / "nope.jsonl"), Error);
}

TEST_CASE("character cosine similarity", "[corpus]") {
    CHECK(char_cosine_similarity("Angry Birds", "angry birds") == Catch::Approx(1.0));
    CHECK(char_cosine_similarity("angry birds", "angry birds rio") ==
          Catch::Approx(oracle_char_cosine(U"angry birds", U"angry birds rio")).epsilon(1e-12));
    CHECK(char_cosine_similarity("abc", "xyz") == 0.0);
    CHECK(char_cosine_similarity("", "") == 1.0);
    CHECK(char_cosine_similarity("", "a") == 0.0);
    // Multi-byte code points count as single characters.
    CHECK(char_cosine_similarity("日本語", "日本") ==
          Catch::Approx(oracle_char_cosine(U"日本語", U"日本")).epsilon(1e-12));

    std::mt19937_64 rng(5);
    const std::string alphabet = "abcdeABCDE xyz";
    for (int t = 0; t < 300; ++t) {
        std::string a, b;
        std::u32string ua, ub;
        const auto la = rng() % 12 + 1, lb = rng() % 12 + 1;
        for (std::size_t i = 0; i < la; ++i) a += alphabet[rng() % alphabet.size()];
        for (std::size_t i = 0; i < lb; ++i) b += alphabet[rng() % alphabet.size()];
        ua.assign(a.begin(), a.end());
        ub.assign(b.begin(), b.end());
        const double s = char_cosine_similarity(a, b);
        CHECK(s == Catch::Approx(oracle_char_cosine(ua, ub)).margin(1e-12));
        CHECK(s == char_cosine_similarity(b, a));
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("labelled groups follow the developer, category and name rules", "[corpus]") {
    Corpus c({
        rec("com.rovio.ab", "Angry Birds", "Rovio", "GAME", 1000000),
        rec("com.rovio.rio", "Angry Birds Rio", "Rovio", "GAME", 500000),
        rec("com.rovio.space", "Angry Birds Space", "Rovio", "GAME", 400000),
        rec("com.rovio.other", "Bad Piggies", "Rovio", "GAME", 900000),
        rec("com.rovio.tool", "Angry Birds", "Rovio", "TOOLS", 10),
        // Too few apps for this developer.
        rec("com.small.a", "Solitaire", "Small", "CARD", 2000000),
        rec("com.small.b", "Solitaire Pro", "Small", "CARD", 100),
        // Base below the download floor.
        rec("com.low.a", "Puzzle", "Low", "GAME", 499999),
        rec("com.low.b", "Puzzle 2", "Low", "GAME", 10),
        rec("com.low.c", "Puzzle 3", "Low", "GAME", 10),
    });
    const auto groups = propose_labelled_groups(c);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].base_app_id == "com.rovio.ab");
    // Same category, name similarity over the threshold.
    std::vector<std::string> members = groups[0].member_app_ids;
    std::sort(members.begin(), members.end());
    CHECK(members == std::vector<std::string>{"com.rovio.rio", "com.rovio.space"});
    CHECK(groups[0].all_app_ids().front() == "com.rovio.ab");

    GroupOptions strict;
    strict.name_threshold = 0.99;
    CHECK(propose_labelled_groups(c, strict).empty());
}

TEST_CASE("base ties go to the smallest app_id", "[corpus]") {
    Corpus c({
        rec("z.one", "Zap", "D", "GAME", 600000),
        rec("a.one", "Zap", "D", "GAME", 600000),
        rec("m.one", "Zap!", "D", "GAME", 600000),
    });
    const auto groups = propose_labelled_groups(c);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].base_app_id == "a.one");
}

TEST_CASE("groups round-trip through JSON lines", "[corpus]") {
    TempDir dir;
    std::vector<LabelledGroup> groups{{"b", {"x", "y"}}, {"a", {"z"}}};
    write_groups(dir / "g.jsonl", groups);
    const auto back = read_groups(dir / "g.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].base_app_id == "b");
    CHECK(back[0].member_app_ids == std::vector<std::string>{"x", "y"});
    CHECK(back[1].member_app_ids == std::vector<std::string>{"z"});
}
