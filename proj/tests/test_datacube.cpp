#include "support.hpp"

#include "sitsgraph/datacube.hpp"
#include "sitsgraph/error.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

using namespace sitsgraph;
using testsupport::code_of;
using testsupport::TempDir;

namespace {

void write_meta(const fs::path& dir, const nlohmann::json& meta) {
    std::ofstream(dir / "meta.json") << meta.dump();
}

nlohmann::json small_meta() {
    return {{"T", 2},
            {"C", 1},
            {"H", 4},
            {"W", 4},
            {"dtype", "f32"},
            {"bands", {"B03"}},
            {"timestamps", {"2020-01-01", "2020-03-01"}},
            {"geo", {{"lat0", 0}, {"lat1", 1}, {"lon0", 0}, {"lon1", 1}}},
            {"nodata", nullptr}};
}

void write_bytes(const fs::path& file, std::size_t n) {
    std::ofstream out(file, std::ios::binary);
    std::vector<char> zeros(n, 0);
    out.write(zeros.data(), std::streamsize(n));
}

std::vector<char> slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("load_cube reads the declared shape") {
    TempDir d("cube");
    write_meta(d.path(), small_meta());
    write_bytes(d / "cube.bin", 128);
    const auto cube = load_cube(d.path());
    CHECK(cube.values().size() == 32);
    CHECK(cube.T() == 2);
    CHECK(cube.timestamps()[1] == Date{2020, 3, 1});
}

TEST_CASE("load_cube rejects a short blob") {
    TempDir d("cube");
    write_meta(d.path(), small_meta());
    write_bytes(d / "cube.bin", 120);
    CHECK(code_of([&] { load_cube(d.path()); }) == Errc::ShapeMismatch);
}

TEST_CASE("load_cube rejects decreasing timestamps") {
    TempDir d("cube");
    auto meta = small_meta();
    meta["timestamps"] = {"2020-03-01", "2020-01-01"};
    write_meta(d.path(), meta);
    write_bytes(d / "cube.bin", 128);
    CHECK(code_of([&] { load_cube(d.path()); }) == Errc::NonMonotonicTimestamps);
}

TEST_CASE("load_cube reports missing files") {
    TempDir d("cube");
    CHECK(code_of([&] { load_cube(d.path()); }) == Errc::MissingFile);
    write_meta(d.path(), small_meta());
    CHECK(code_of([&] { load_cube(d.path()); }) == Errc::MissingFile);
}

TEST_CASE("save/load round trip keeps the blob byte-identical") {
    std::mt19937_64 rng(3);
    const auto cube = testsupport::random_cube(rng, 3, 2, 5, 7);
    TempDir a("rt"), b("rt");
    save_cube(cube, a.path());
    const auto back = load_cube(a.path());
    save_cube(back, b.path());
    CHECK(slurp(a / "cube.bin") == slurp(b / "cube.bin"));
    CHECK(slurp(a / "cube.bin").size() == 4u * 3 * 2 * 5 * 7);
    CHECK(back.bands() == cube.bands());
    CHECK(back.timestamps() == cube.timestamps());
}

TEST_CASE("labels round trip") {
    LabelStack l(2, 3, 3, -1);
    l.at(1, 2, 2) = 5;
    TempDir d("lab");
    save_labels(l, d.path());
    CHECK(has_labels(d.path()));
    CHECK(load_labels(d.path(), 2, 3, 3).data == l.data);
}

TEST_CASE("ndwi examples") {
    auto c = testsupport::make_cube(1, 2, 1, 3, {0.2f, 0.f, 0.f, 0.1f, 0.f, 0.5f});
    const auto n = ndwi(c, "B0", "B1");
    REQUIRE(n.bands() == std::vector<std::string>{"NDWI"});
    CHECK(n.at(0, 0, 0, 0) == doctest::Approx(0.1 / 0.3).epsilon(1e-6));
    CHECK(n.at(0, 0, 0, 1) == 0.f);
    CHECK(n.at(0, 0, 0, 2) == -1.f);
    CHECK(code_of([&] { ndwi(c, "B0", "B7"); }) == Errc::UnknownBand);
}

TEST_CASE("ndwi is antisymmetric and bounded") {
    std::mt19937_64 rng(11);
    const auto c = testsupport::random_cube(rng, 2, 2, 6, 6);
    const auto a = ndwi(c, "B0", "B1");
    const auto b = ndwi(c, "B1", "B0");
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        CHECK(a.values()[i] == -b.values()[i]);
        CHECK(std::abs(a.values()[i]) <= 1.f);
    }
}

TEST_CASE("ndwi propagates nodata as NaN") {
    SitsCube c({1, 2, 1, 2}, {0.2f, -9.f, 0.1f, 0.1f}, testsupport::monthly(1), {"G", "N"}, {}, -9.f);
    const auto n = ndwi(c, "G", "N");
    CHECK(std::isnan(n.at(0, 0, 0, 1)));
    CHECK_FALSE(std::isnan(n.at(0, 0, 0, 0)));
}

TEST_CASE("synth_seasonal is deterministic per seed") {
    const SeasonalSpec spec;
    const auto a = synth_seasonal(5, spec);
    const auto b = synth_seasonal(5, spec);
    const auto c = synth_seasonal(6, spec);
    CHECK(std::equal(a.cube.values().begin(), a.cube.values().end(), b.cube.values().begin()));
    CHECK(a.labels.data == b.labels.data);
    CHECK_FALSE(std::equal(a.cube.values().begin(), a.cube.values().end(), c.cube.values().begin()));
}

TEST_CASE("synth_seasonal with two noiseless blobs has two values per date") {
    SeasonalSpec spec;
    spec.n_blobs = 2;
    spec.noise_sigma = 0.0;
    const auto s = synth_seasonal(9, spec);
    for (int t = 0; t < s.cube.T(); ++t) {
        for (int c = 0; c < s.cube.C(); ++c) {
            const auto p = s.cube.plane(t, c);
            CHECK(std::set<float>(p.begin(), p.end()).size() == 2);
        }
    }
}

TEST_CASE("synth_seasonal series repeat with the declared period") {
    // The noise of x[t] - x[t+6] has sigma * sqrt(2); compare against three of those.
    SeasonalSpec spec;
    const double tol = 3.0 * spec.noise_sigma * std::sqrt(2.0);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto s = synth_seasonal(seed, spec);
        long ok = 0, total = 0;
        for (int t = 0; t + spec.period_dates < spec.T; ++t) {
            for (int c = 0; c < 2; ++c) {
                for (int h = 0; h < spec.H; ++h) {
                    for (int w = 0; w < spec.W; ++w) {
                        ++total;
                        ok += std::abs(s.cube.at(t, c, h, w) - s.cube.at(t + spec.period_dates, c, h, w)) <= tol;
                    }
                }
            }
        }
        CHECK(double(ok) / double(total) >= 0.99);
    }
}

TEST_CASE("synth_seasonal labels partition the frame") {
    const auto s = synth_seasonal(4, SeasonalSpec{});
    for (auto v : s.labels.data) {
        CHECK(v >= 0);
        CHECK(v < kSynthClasses);
    }
}

TEST_CASE("synth_seasonal rejects tiny specs") {
    SeasonalSpec spec;
    spec.H = 3;
    CHECK(code_of([&] { synth_seasonal(0, spec); }) == Errc::InvalidSpec);
    spec = {};
    spec.n_blobs = 1;
    CHECK(code_of([&] { synth_seasonal(0, spec); }) == Errc::InvalidSpec);
}

TEST_CASE("pixel geo and day of year") {
    const GeoBounds g{10, 20, 30, 50};
    const auto first = pixel_geo(g, 10, 10, 0, 0, Date{2021, 1, 1});
    const auto last = pixel_geo(g, 10, 10, 9, 9, Date{2021, 12, 31});
    CHECK(first.lat >= 10);
    CHECK(last.lat <= 20);
    CHECK(first.doy == 0.0);
    CHECK(last.doy == doctest::Approx(364.0 / 365.0));
    CHECK(doy_fraction(Date{2020, 12, 31}) < 1.0);
    CHECK(doy_fraction(Date{2020, 12, 31}) == doy_fraction(Date{2021, 12, 31}));
}

TEST_CASE("dates round trip through day counts") {
    for (const char* s : {"1970-01-01", "2000-02-29", "2020-12-31", "2024-03-01"}) {
        const auto d = Date::parse(s);
        CHECK(d.to_string() == s);
        CHECK(Date::from_days(d.days_since_epoch()) == d);
    }
    CHECK(Date::parse("2020-03-01").day_of_year() == 61);
}
