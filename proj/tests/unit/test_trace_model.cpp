// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "oracles.hpp"
#include "xici/errors.hpp"
#include "xici/trace_model.hpp"

using namespace xici;
namespace fs = std::filesystem;

namespace {

std::string error_of(const fs::path& dir) {
    try {
        read_traceset(dir);
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

nlohmann::json load(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

void save(const fs::path& p, const nlohmann::json& j) {
    std::ofstream out(p);
    out << j.dump();
}

} // namespace

TEST_CASE("container round-trip preserves every value") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto set = oracle::random_traceset(seed, 1 + static_cast<int>(seed % 4), 4 + static_cast<int>(seed % 5),
                                           2, 1 + seed % 3, 1 + seed % 4,
                                           seed % 2 ? GatingKind::SigmoidRenorm : GatingKind::SoftmaxRenorm);
        set.meta.has_shared_expert = seed % 3 == 0;
        oracle::TempDir dir("roundtrip");
        write_traceset(set, dir.path());
        CHECK(read_traceset(dir.path()) == set);
    }
}

TEST_CASE("single-token single-layer container is 32 bytes of little-endian binary32") {
    TraceSet set;
    set.meta = {"tiny", 1, {0}, 8, 2, GatingKind::SoftmaxRenorm, false};
    SequenceTrace s{"q", "v", true, 1, {1, 2, 3, 4, 5, 6, 7, -0.5f}};
    set.sequences.push_back(s);
    oracle::TempDir dir("tiny");
    write_traceset(set, dir.path());
    CHECK(fs::file_size(dir.path() / "logits.bin") == 32);
    std::ifstream in(dir.path() / "logits.bin", std::ios::binary);
    unsigned char b[4];
    in.seekg(28);
    in.read(reinterpret_cast<char*>(b), 4);
    // -0.5f = 0xBF000000
    CHECK(b[0] == 0x00);
    CHECK(b[1] == 0x00);
    CHECK(b[2] == 0x00);
    CHECK(b[3] == 0xBF);
    CHECK(read_traceset(dir.path()) == set);
}

TEST_CASE("truncated logits file names the offending sequence") {
    auto set = oracle::random_traceset(3, 2, 4, 2, 2, 2);
    oracle::TempDir dir("trunc");
    write_traceset(set, dir.path());
    const auto bin = dir.path() / "logits.bin";
    fs::resize_file(bin, fs::file_size(bin) - 4);
    const auto& last = set.sequences.back();
    const auto msg = error_of(dir.path());
    CHECK(msg.find("sequence (" + last.question_id + ", " + last.variant_id + ")") != std::string::npos);
    CHECK(msg.find("truncated") != std::string::npos);
}

TEST_CASE("manifest corruption is rejected") {
    auto set = oracle::random_traceset(4, 2, 4, 2, 2, 2);
    oracle::TempDir dir("corrupt");
    write_traceset(set, dir.path());
    const auto manifest = dir.path() / "manifest.json";
    const auto original = load(manifest);

    SUBCASE("duplicate (question, variant)") {
        auto j = original;
        j["sequences"][1]["question_id"] = j["sequences"][0]["question_id"];
        j["sequences"][1]["variant_id"] = j["sequences"][0]["variant_id"];
        save(manifest, j);
        CHECK(error_of(dir.path()).find("duplicate") != std::string::npos);
    }
    SUBCASE("offset mismatch") {
        auto j = original;
        j["sequences"][1]["offset"] = j["sequences"][1]["offset"].get<std::uint64_t>() + 4;
        save(manifest, j);
        CHECK(error_of(dir.path()).find("offset") != std::string::npos);
    }
    SUBCASE("length inconsistent with topology") {
        auto j = original;
        j["sequences"][0]["token_count"] = j["sequences"][0]["token_count"].get<int>() + 1;
        save(manifest, j);
        CHECK(error_of(dir.path()).find("inconsistent") != std::string::npos);
    }
    SUBCASE("malformed json") {
        std::ofstream(manifest) << "{ not json";
        CHECK_FALSE(error_of(dir.path()).empty());
    }
    SUBCASE("missing field") {
        auto j = original;
        j["sequences"][0].erase("correct");
        save(manifest, j);
        CHECK_FALSE(error_of(dir.path()).empty());
    }
    SUBCASE("trailing bytes") {
        std::ofstream(dir.path() / "logits.bin", std::ios::app | std::ios::binary) << "abcd";
        CHECK(error_of(dir.path()).find("trailing") != std::string::npos);
    }
}

TEST_CASE("non-finite logits are rejected on read and write") {
    auto set = oracle::random_traceset(5, 1, 4, 2, 1, 1);
    oracle::TempDir dir("nan");
    write_traceset(set, dir.path());
    {
        std::fstream f(dir.path() / "logits.bin", std::ios::in | std::ios::out | std::ios::binary);
        const float nan = std::numeric_limits<float>::quiet_NaN();
        f.write(reinterpret_cast<const char*>(&nan), 4);
    }
    CHECK(error_of(dir.path()).find("non-finite") != std::string::npos);

    set.sequences[0].logits[0] = std::numeric_limits<float>::infinity();
    oracle::TempDir dir2("inf");
    CHECK_THROWS_AS(write_traceset(set, dir2.path()), DataError);
}

TEST_CASE("classify_questions examples") {
    OutcomeMatrix m;
    m.set("a", "en", true);
    m.set("a", "fr", true);
    m.set("b", "en", false);
    m.set("b", "fr", false);
    m.set("b", "de", false);
    m.set("c", "en", true);
    m.set("c", "fr", false);
    const auto c = classify_questions(m);
    CHECK(c.all_correct == std::set<std::string>{"a"});
    CHECK(c.all_incorrect == std::set<std::string>{"b"});
    CHECK(c.mixed == std::set<std::string>{"c"});
}

TEST_CASE("classify_questions is a partition of the question set") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 200; ++trial) {
        OutcomeMatrix m;
        const int nq = 1 + static_cast<int>(gen() % 10);
        for (int q = 0; q < nq; ++q)
            for (int v = 0; v < 1 + static_cast<int>(gen() % 5); ++v)
                m.set("q" + std::to_string(q), "v" + std::to_string(v), gen() % 2);
        const auto c = classify_questions(m);
        std::set<std::string> all;
        for (const auto* part : {&c.all_correct, &c.all_incorrect, &c.mixed}) {
            for (const auto& q : *part) CHECK(all.insert(q).second);
        }
        CHECK(all == m.questions());
    }
}

TEST_CASE("missing cells are allowed and duplicates are not") {
    auto set = oracle::random_traceset(6, 1, 4, 2, 2, 3);
    set.sequences.erase(set.sequences.begin() + 1);
    CHECK_NOTHROW(set.validate());
    CHECK_FALSE(set.outcomes().contains("q0", "v1"));
    set.sequences.push_back(set.sequences.front());
    CHECK_THROWS_AS(set.validate(), DataError);
}
