#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "spectlv/clinical.hpp"
#include "spectlv/phantom.hpp"
#include "test_support.hpp"

using namespace spectlv;

TEST_CASE("programmed 100/40 cc cavity volumes give analytic LVEF 0.60") {
    PhantomSpec spec = PhantomSpec::beating(100.0, 40.0);
    spec.counts_scale = 0.0;  // noise free
    PhantomResult ph = generate_phantom(spec);
    CHECK(ph.truth.edv_cc == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(ph.truth.esv_cc == doctest::Approx(40.0).epsilon(1e-9));
    CHECK(ph.truth.lvef == doctest::Approx(0.60).epsilon(1e-9));
    CHECK(ph.truth.ed_gate == 0);
    CHECK(ph.truth.es_gate == 4);
}

TEST_CASE("zero noise, no scar: measured scar burden is exactly 0%") {
    PhantomSpec spec = PhantomSpec::beating(100.0, 40.0);
    spec.counts_scale = 0.0;
    PhantomResult ph = generate_phantom(spec);
    CHECK(scar_burden(ph.study.gates[0], ph.masks[0][1]) == 0.0);
}

TEST_CASE("rasterized cavity volume within 10% of the analytic value") {
    PhantomSpec spec = PhantomSpec::beating(120.0, 50.0);
    spec.counts_scale = 0.0;
    PhantomResult ph = generate_phantom(spec);
    for (int g = 0; g < kGateCount; ++g) {
        const double raster = mask_volume_cc(ph.masks[g][0]);
        CHECK(std::abs(raster - ph.truth.cavity_cc[g]) / ph.truth.cavity_cc[g] < 0.10);
    }
}

TEST_CASE("masks satisfy endo inside epi and myo = epi minus endo") {
    PhantomSpec spec = PhantomSpec::beating(90.0, 35.0);
    spec.seed = 3;
    PhantomResult ph = generate_phantom(spec);
    for (int g = 0; g < kGateCount; ++g)
        for (std::size_t i = 0; i < ph.masks[g][0].data.size(); ++i) {
            if (ph.masks[g][0].data[i]) CHECK(ph.masks[g][2].data[i] == 1);
            CHECK(ph.masks[g][1].data[i] ==
                  (ph.masks[g][2].data[i] & ~ph.masks[g][0].data[i] & 1));
        }
}

TEST_CASE("generation is deterministic per seed") {
    PhantomSpec spec = PhantomSpec::beating(100.0, 45.0);
    spec.seed = 11;
    spec.scar = {0.10, 0.3, 45.0};
    PhantomResult a = generate_phantom(spec);
    PhantomResult b = generate_phantom(spec);
    for (int g = 0; g < kGateCount; ++g) {
        CHECK(a.study.gates[g].data == b.study.gates[g].data);
        CHECK(a.masks[g][1].data == b.masks[g][1].data);
    }
}

TEST_CASE("programmed scar fraction lands within 2 points of measured burden") {
    for (double frac : {0.05, 0.10, 0.15}) {
        PhantomSpec spec = PhantomSpec::beating(110.0, 44.0);
        spec.counts_scale = 0.0;
        spec.scar = {frac, 0.3, 60.0};
        PhantomResult ph = generate_phantom(spec);
        const double measured = scar_burden(ph.study.gates[0], ph.masks[0][1]);
        CHECK(std::abs(measured - 100.0 * frac) <= 2.0);
    }
}

TEST_CASE("shell thinner than one voxel is rejected") {
    PhantomSpec spec = PhantomSpec::beating(100.0, 40.0);
    spec.wall_mm = 3.0;  // < 6.4 mm voxel
    CHECK_THROWS_AS(generate_phantom(spec), std::runtime_error);
}

TEST_CASE("truncated ellipsoid volume closed form") {
    // full ellipsoid when h = c
    CHECK(truncated_ellipsoid_volume(2, 3, 4, 4) ==
          doctest::Approx(4.0 / 3.0 * M_PI * 24.0).epsilon(1e-12));
    // half when h = 0
    CHECK(truncated_ellipsoid_volume(2, 3, 4, 0) ==
          doctest::Approx(2.0 / 3.0 * M_PI * 24.0).epsilon(1e-12));
}

TEST_CASE("phantom dataset writes a loadable stratified manifest") {
    auto dir = testing::fresh_dir("spectlv_phantom_ds");
    DatasetManifest m = generate_phantom_dataset(dir, 6, 99);
    CHECK(m.entries.size() == 6);
    DatasetManifest back = load_manifest(dir / "manifest.json");
    CHECK(back.entries.size() == 6);
    GatedStudy s = load_study(back, back.entries[0]);
    CHECK(s.gates[0].dims == Dims{32, 32, 32});
    CHECK(!back.entries[0].truth_file.empty());
    PhantomTruth t = load_truth(back.resolve(back.entries[0].truth_file));
    CHECK(t.edv_cc > 0.0);
}
