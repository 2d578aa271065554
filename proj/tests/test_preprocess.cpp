#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "spectlv/common.hpp"
#include "spectlv/preprocess.hpp"

using namespace spectlv;

namespace {

// bright ring centered at `c` in the (x,y) plane, stacked along z
Volume3D ring_volume(Dims d, double cx, double cy, double cz, double radius) {
    Volume3D v(d, 6.4);
    for (int x = 0; x < d.l; ++x)
        for (int y = 0; y < d.w; ++y)
            for (int z = 0; z < d.h; ++z) {
                const double dr = std::hypot(x - cx, y - cy);
                if (std::abs(dr - radius) < 1.5 && std::abs(z - cz) < 6)
                    v.at(x, y, z) = 100.0f;
            }
    return v;
}

DatasetManifest patients(const std::vector<std::pair<int, Severity>>& classes) {
    DatasetManifest m;
    int id = 0;
    for (const auto& [count, sev] : classes)
        for (int i = 0; i < count; ++i) {
            StudyEntry e;
            e.patient_id = "p" + std::to_string(id++);
            e.severity = sev;
            e.gate_files.assign(kGateCount, "");
            m.entries.push_back(e);
        }
    return m;
}

}  // namespace

TEST_CASE("to_long_axis is the identity crop on a centered 32^3 volume") {
    Volume3D v = ring_volume({32, 32, 32}, 15.5, 15.5, 15.5, 6.0);
    Volume3D out = to_long_axis(v);
    CHECK(out.data == v.data);
}

TEST_CASE("64^3 phantom centered at (40,40,40) crops the window around it") {
    Volume3D v = ring_volume({64, 64, 64}, 40.0, 40.0, 40.0, 6.0);
    // oracle: exhaustive centroid of the upper-half-max region
    double cx = 0, cy = 0, cz = 0, n = 0;
    const float vmax = v.max_value();
    for (int x = 0; x < 64; ++x)
        for (int y = 0; y < 64; ++y)
            for (int z = 0; z < 64; ++z)
                if (v.at(x, y, z) >= 0.5f * vmax) {
                    cx += x;
                    cy += y;
                    cz += z;
                    n += 1;
                }
    const int lx = static_cast<int>(std::lround(cx / n)) - 16;
    const int ly = static_cast<int>(std::lround(cy / n)) - 16;
    const int lz = static_cast<int>(std::lround(cz / n)) - 16;
    CHECK(lx == 24);
    CHECK(ly == 24);
    CHECK(lz == 24);

    Volume3D out = to_long_axis(v);
    REQUIRE(out.dims == Dims{32, 32, 32});
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 32; ++y)
            for (int z = 0; z < 32; ++z)
                CHECK(out.at(x, y, z) == v.at(lx + x, ly + y, lz + z));
}

TEST_CASE("to_long_axis errors") {
    Volume3D zero({32, 32, 32}, 6.4);
    CHECK_THROWS_AS(to_long_axis(zero), std::runtime_error);
    Volume3D small({16, 32, 32}, 6.4, 1.0f);
    CHECK_THROWS_AS(to_long_axis(small), std::runtime_error);
}

TEST_CASE("augment with identity parameters is the identity") {
    Volume3D v = ring_volume({32, 32, 32}, 15.5, 15.5, 15.5, 5.0);
    Mask3D m(v.dims, 6.4, Structure::myocardium);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = v.data[i] > 0 ? 1 : 0;
    Volume3D v2 = v;
    Mask3D m2 = m;
    std::vector<Mask3D*> masks{&m2};
    augment_with_params(v2, masks, AugmentParams{});
    CHECK(v2.data == v.data);
    CHECK(m2.data == m.data);
}

TEST_CASE("flip applied twice restores the original") {
    Rng rng(6);
    Volume3D v({16, 16, 16}, 6.4);
    for (auto& x : v.data) x = static_cast<float>(rng.uniform(0.0, 10.0));
    Volume3D v2 = v;
    std::vector<Mask3D*> none;
    AugmentParams p;
    p.flip[0] = true;
    augment_with_params(v2, none, p);
    augment_with_params(v2, none, p);
    CHECK(v2.data == v.data);
}

TEST_CASE("rotation by 90 degrees matches the index permutation oracle") {
    Dims d{16, 16, 16};
    Mask3D bar(d, 6.4, Structure::myocardium);
    for (int x = 8; x < 14; ++x) bar.at(x, 7, 8) = 1;  // axis-aligned bar, off center
    Volume3D vol(d, 6.4);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        vol.data[i] = static_cast<float>(bar.data[i]);

    Volume3D v2 = vol;
    Mask3D m2 = bar;
    std::vector<Mask3D*> masks{&m2};
    AugmentParams p;
    p.rot_deg = 90.0;
    augment_with_params(v2, masks, p);

    // forward rotation by +90 about the center c maps (x,y) -> (c - (y-c), c + (x-c));
    // the resampler inverts it, so compare against the explicit remap
    const double c = 7.5;
    Mask3D expect(d, 6.4, Structure::myocardium);
    for (int x = 0; x < d.l; ++x)
        for (int y = 0; y < d.w; ++y)
            for (int z = 0; z < d.h; ++z)
                if (bar.at(x, y, z)) {
                    const int nx = static_cast<int>(std::lround(c - (y - c)));
                    const int ny = static_cast<int>(std::lround(c + (x - c)));
                    expect.at(nx, ny, z) = 1;
                }
    CHECK(m2.data == expect.data);
}

TEST_CASE("mask augmentation keeps values binary") {
    Rng rng(9);
    Volume3D v({16, 16, 16}, 6.4);
    Mask3D m(v.dims, 6.4, Structure::epicardium);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        v.data[i] = static_cast<float>(rng.uniform(0.0, 5.0));
        m.data[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Volume3D v2 = v;
        Mask3D m2 = m;
        std::vector<Mask3D*> masks{&m2};
        augment(v2, masks, seed);
        CHECK_NOTHROW(m2.validate());
    }
}

TEST_CASE("augment is deterministic per seed") {
    Volume3D v = ring_volume({16, 16, 16}, 7.5, 7.5, 7.5, 4.0);
    Volume3D a = v, b = v;
    std::vector<Mask3D*> none;
    augment(a, none, 1234);
    augment(b, none, 1234);
    CHECK(a.data == b.data);
}

TEST_CASE("stratified 5-fold split of 31/32/12 patients gives 15 per fold") {
    auto m = patients({{31, Severity::normal_or_mild},
                       {32, Severity::moderate},
                       {12, Severity::severe}});
    auto folds = stratified_folds(m, 5, 42);
    REQUIRE(folds.size() == 5);
    std::set<std::string> seen;
    for (const auto& f : folds) {
        CHECK(f.test_ids.size() == 15);
        CHECK(f.train_ids.size() == 60);
        int counts[3] = {0, 0, 0};
        for (const auto& id : f.test_ids) {
            CHECK(!seen.count(id));
            seen.insert(id);
            for (const auto& e : m.entries)
                if (e.patient_id == id) counts[static_cast<int>(e.severity)]++;
        }
        CHECK((counts[0] == 6 || counts[0] == 7));
        CHECK((counts[1] == 6 || counts[1] == 7));
        CHECK((counts[2] == 2 || counts[2] == 3));
    }
    CHECK(seen.size() == 75);  // disjoint test sets cover everything

    // determinism
    auto again = stratified_folds(m, 5, 42);
    for (int f = 0; f < 5; ++f) CHECK(again[f].test_ids == folds[f].test_ids);
}

TEST_CASE("stratified_folds errors and the uniform single-class case") {
    auto m = patients({{10, Severity::moderate}});
    CHECK_THROWS_AS(stratified_folds(m, 1, 0), std::runtime_error);
    auto folds = stratified_folds(m, 5, 0);
    for (const auto& f : folds) CHECK(f.test_ids.size() == 2);

    auto tiny = patients({{10, Severity::moderate}, {3, Severity::severe}});
    CHECK_THROWS_AS(stratified_folds(tiny, 5, 0), std::runtime_error);
}
