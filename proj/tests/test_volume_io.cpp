#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "spectlv/common.hpp"
#include "spectlv/volume.hpp"
#include "test_support.hpp"

using namespace spectlv;

TEST_CASE("2x2x2 raw of eight zeros loads as all-zero volume") {
    auto dir = testing::fresh_dir("spectlv_volio_zero");
    Volume3D v({2, 2, 2}, 6.4);
    save_volume(v, dir / "z.vol");
    Volume3D back = load_volume(dir / "z.vol");
    CHECK(back.dims == Dims{2, 2, 2});
    CHECK(back.voxel_mm == doctest::Approx(6.4));
    for (float x : back.data) CHECK(x == 0.0f);
}

TEST_CASE("payload of 7 values declared 2x2x2 is a length-mismatch error") {
    auto dir = testing::fresh_dir("spectlv_volio_short");
    {
        std::ofstream raw(dir / "bad.vol", std::ios::binary);
        float seven[7] = {};
        raw.write(reinterpret_cast<char*>(seven), sizeof(seven));
        std::ofstream side(dir / "bad.vol.json");
        side << R"({"dims":[2,2,2],"voxel_mm":6.4,"dtype":"f32"})";
    }
    CHECK_THROWS_WITH_AS(load_volume(dir / "bad.vol"),
                         doctest::Contains("length mismatch"), std::runtime_error);
}

TEST_CASE("missing sidecar is an error") {
    auto dir = testing::fresh_dir("spectlv_volio_noside");
    {
        std::ofstream raw(dir / "x.vol", std::ios::binary);
        float one = 1.0f;
        raw.write(reinterpret_cast<char*>(&one), 4);
    }
    CHECK_THROWS_WITH_AS(load_volume(dir / "x.vol"), doctest::Contains("missing sidecar"),
                         std::runtime_error);
}

TEST_CASE("non-finite payload is rejected") {
    auto dir = testing::fresh_dir("spectlv_volio_nan");
    Volume3D v({2, 2, 2}, 6.4);
    save_volume(v, dir / "n.vol");
    {
        std::ofstream raw(dir / "n.vol", std::ios::binary);
        float vals[8] = {0, 0, 0, std::numeric_limits<float>::quiet_NaN(), 0, 0, 0, 0};
        raw.write(reinterpret_cast<char*>(vals), sizeof(vals));
    }
    CHECK_THROWS_AS(load_volume(dir / "n.vol"), std::runtime_error);
}

TEST_CASE("volume save/load round trip is bit-exact on a random 32^3 volume") {
    auto dir = testing::fresh_dir("spectlv_volio_rt");
    Rng rng(42);
    Volume3D v({32, 32, 32}, 6.4);
    for (auto& x : v.data) x = static_cast<float>(rng.uniform(0.0, 100.0));
    save_volume(v, dir / "r.vol");
    Volume3D back = load_volume(dir / "r.vol");
    REQUIRE(back.data.size() == v.data.size());
    CHECK(std::memcmp(back.data.data(), v.data.data(), v.data.size() * sizeof(float)) == 0);
}

TEST_CASE("mask save/load round trip preserves structure tag and payload") {
    auto dir = testing::fresh_dir("spectlv_volio_mask");
    Rng rng(7);
    Mask3D m({8, 8, 8}, 6.4, Structure::endocardium);
    for (auto& x : m.data) x = rng.bernoulli(0.3) ? 1 : 0;
    save_mask(m, dir / "m.msk");
    Mask3D back = load_mask(dir / "m.msk");
    CHECK(back.structure == Structure::endocardium);
    CHECK(back.data == m.data);
}

TEST_CASE("mask with values outside {0,1} fails validation") {
    Mask3D m({2, 2, 2}, 6.4, Structure::myocardium);
    m.data[3] = 2;
    CHECK_THROWS_AS(m.validate(), std::runtime_error);
}

TEST_CASE("manifest round trip and file checking") {
    auto dir = testing::fresh_dir("spectlv_volio_manifest");
    Volume3D v({4, 4, 4}, 6.4);
    Mask3D m({4, 4, 4}, 6.4, Structure::myocardium);
    DatasetManifest manifest;
    manifest.root = dir;
    StudyEntry e;
    e.patient_id = "p000";
    e.state = State::rest;
    e.severity = Severity::moderate;
    for (int g = 0; g < kGateCount; ++g) {
        std::string vol = "p000/gate" + std::to_string(g) + ".vol";
        std::string msk = "p000/gate" + std::to_string(g) + "_myo.msk";
        std::filesystem::create_directories(dir / "p000");
        save_volume(v, dir / vol);
        save_mask(m, dir / msk);
        e.gate_files.push_back(vol);
        e.mask_files[static_cast<int>(Structure::myocardium)].push_back(msk);
    }
    manifest.entries.push_back(e);
    save_manifest(manifest, dir / "manifest.json");

    DatasetManifest back = load_manifest(dir / "manifest.json");
    REQUIRE(back.entries.size() == 1);
    CHECK(back.entries[0].patient_id == "p000");
    CHECK(back.entries[0].state == State::rest);
    CHECK(back.entries[0].severity == Severity::moderate);
    CHECK(back.entries[0].gate_files.size() == 8);

    GatedStudy study = load_study(back, back.entries[0]);
    CHECK(study.gates[0].dims == Dims{4, 4, 4});

    // deleting a referenced file must fail validation
    std::filesystem::remove(dir / "p000/gate3.vol");
    CHECK_THROWS_AS(load_manifest(dir / "manifest.json"), std::runtime_error);
}
