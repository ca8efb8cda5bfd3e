#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gmil/errors.hpp"
#include "gmil/slide.hpp"
#include "test_util.hpp"

using namespace gmil;
namespace fs = std::filesystem;

namespace {

SlideRecord sample_slide(std::uint64_t seed, std::size_t n = 6, std::size_t f = 3) {
    Rng rng(seed);
    SlideRecord s;
    s.slide_id = "s" + std::to_string(seed);
    s.label = static_cast<int>(seed % 2);
    s.center_id = "centerA";
    s.features = Matrix(n, f);
    for (std::size_t i = 0; i < n; ++i) {
        s.coords.emplace_back(static_cast<std::int32_t>(i % 3),
                              static_cast<std::int32_t>(i / 3));
        for (std::size_t j = 0; j < f; ++j)
            // f32 payload: keep values exactly representable
            s.features(i, j) = static_cast<float>(rng.normal());
    }
    return s;
}

fs::path tmpdir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("gmil_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("slide round trip is lossless") {
    fs::path dir = tmpdir("slide_rt");
    SlideRecord s = sample_slide(3);
    std::string path = (dir / "a.gmil").string();
    save_slide(s, path);
    SlideRecord r = load_slide(path);
    CHECK(r.label == s.label);
    CHECK(r.center_id == s.center_id);
    CHECK(r.coords == s.coords);
    CHECK(r.features == s.features);
}

TEST_CASE("slide file byte accounting") {
    fs::path dir = tmpdir("slide_bytes");
    SlideRecord s;
    s.slide_id = "one";
    s.label = 1;
    s.center_id = "c0";
    s.coords = {{0, 0}};
    s.features = Matrix::from_rows({{1.0, 2.0}});
    std::string path = (dir / "one.gmil").string();
    save_slide(s, path);
    // magic + version + label + center len + center + N_p + F + coords + f32s
    CHECK(fs::file_size(path) == 4 + 2 + 1 + 2 + 2 + 4 + 4 + 8 + 8);
}

TEST_CASE("slide format errors are distinguished") {
    fs::path dir = tmpdir("slide_err");
    SlideRecord s = sample_slide(1);
    std::string path = (dir / "a.gmil").string();
    save_slide(s, path);

    std::string bytes = testutil::read_file(path);
    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream(dir / "magic.gmil", std::ios::binary) << bad;
        try {
            load_slide((dir / "magic.gmil").string());
            FAIL("expected bad magic");
        } catch (const FileFormatError& e) {
            CHECK(e.issue() == FileFormatIssue::BadMagic);
        }
    }
    {
        std::ofstream(dir / "trunc.gmil", std::ios::binary)
            << bytes.substr(0, bytes.size() / 2);
        try {
            load_slide((dir / "trunc.gmil").string());
            FAIL("expected truncation");
        } catch (const FileFormatError& e) {
            CHECK(e.issue() == FileFormatIssue::Truncated);
        }
    }
    {
        std::string bad = bytes;
        bad[4] = 99;  // version low byte
        std::ofstream(dir / "ver.gmil", std::ios::binary) << bad;
        try {
            load_slide((dir / "ver.gmil").string());
            FAIL("expected version mismatch");
        } catch (const FileFormatError& e) {
            CHECK(e.issue() == FileFormatIssue::VersionMismatch);
        }
    }
}

TEST_CASE("slide validation rejects duplicate coords") {
    SlideRecord s = sample_slide(2);
    s.coords[1] = s.coords[0];
    CHECK_THROWS_AS(s.validate(), DataError);
}

TEST_CASE("manifest round trip and errors") {
    fs::path dir = tmpdir("manifest");
    Manifest m;
    for (int i = 0; i < 4; ++i) {
        SlideRecord s = sample_slide(static_cast<std::uint64_t>(i));
        std::string name = "slide" + std::to_string(i) + ".gmil";
        save_slide(s, (dir / name).string());
        m.entries.push_back({"slide" + std::to_string(i), (dir / name).string(),
                             i % 2, i < 2 ? "c0" : "c1"});
    }
    std::string path = (dir / "manifest.csv").string();
    save_manifest(m, path);
    Manifest r = load_manifest(path);
    REQUIRE(r.entries.size() == 4);
    CHECK(r.entries[0].slide_id == "slide0");
    CHECK(r.entries[3].label == 1);
    CHECK(r.center_ids() == std::vector<std::string>{"c0", "c1"});
    SlideRecord s0 = load_manifest_slide(r.entries[0]);
    CHECK(s0.slide_id == "slide0");  // filled from the manifest
    CHECK(s0.center_id == "centerA");

    std::ofstream bad(dir / "bad.csv");
    bad << "id,path,label,center\n";
    bad.close();
    CHECK_THROWS_AS(load_manifest((dir / "bad.csv").string()), DataError);

    std::ofstream dup(dir / "dup.csv");
    dup << "slide_id,path,label,center_id\n";
    dup << "a,slide0.gmil,0,c0\na,slide1.gmil,1,c0\n";
    dup.close();
    CHECK_THROWS_AS(load_manifest((dir / "dup.csv").string()), DataError);
}

namespace {

Manifest fake_manifest(std::size_t n, std::size_t centers, double pos_rate,
                       std::uint64_t seed) {
    Rng rng(seed);
    Manifest m;
    for (std::size_t i = 0; i < n; ++i)
        m.entries.push_back({"s" + std::to_string(i), "/dev/null",
                             rng.uniform() < pos_rate ? 1 : 0,
                             "c" + std::to_string(i % centers)});
    return m;
}

}  // namespace

TEST_CASE("shuffled folds partition and stratify") {
    Manifest m = fake_manifest(10, 2, 0.5, 3);
    FoldPlan plan = build_folds(m, FoldMode::Shuffled, 5, 42);
    REQUIRE(plan.folds.size() == 5);
    std::set<std::size_t> seen;
    for (const auto& fold : plan.folds) {
        CHECK(fold.test.size() == 2);
        CHECK(fold.train.size() == 8);
        for (std::size_t idx : fold.test) CHECK(seen.insert(idx).second);
        std::set<std::size_t> train(fold.train.begin(), fold.train.end());
        for (std::size_t idx : fold.test) CHECK(train.count(idx) == 0);
    }
    CHECK(seen.size() == 10);

    // stratification: per-fold positive count within +/- 1 of the even share
    std::size_t total_pos = 0;
    for (const auto& e : m.entries) total_pos += e.label;
    for (const auto& fold : plan.folds) {
        std::size_t pos = 0;
        for (std::size_t idx : fold.test) pos += m.entries[idx].label;
        double share = static_cast<double>(total_pos) / 5.0;
        CHECK(std::fabs(static_cast<double>(pos) - share) <= 1.0);
    }
}

TEST_CASE("fold plans are deterministic per seed") {
    Manifest m = fake_manifest(23, 3, 0.4, 5);
    FoldPlan a = build_folds(m, FoldMode::Shuffled, 4, 7);
    FoldPlan b = build_folds(m, FoldMode::Shuffled, 4, 7);
    for (std::size_t i = 0; i < a.folds.size(); ++i) {
        CHECK(a.folds[i].test == b.folds[i].test);
        CHECK(a.folds[i].train == b.folds[i].train);
    }
}

TEST_CASE("by-center folds hold out one center each") {
    Manifest m = fake_manifest(12, 3, 0.5, 8);
    FoldPlan plan = build_folds(m, FoldMode::ByCenter, 3, 0);
    REQUIRE(plan.folds.size() == 3);
    for (const auto& fold : plan.folds) {
        for (std::size_t idx : fold.test)
            CHECK(m.entries[idx].center_id == fold.test_center);
        for (std::size_t idx : fold.train)
            CHECK(m.entries[idx].center_id != fold.test_center);
    }
    CHECK_THROWS_AS(build_folds(m, FoldMode::ByCenter, 5, 0), DataError);
}
