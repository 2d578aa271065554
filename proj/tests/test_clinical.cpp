#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "spectlv/clinical.hpp"
#include "spectlv/common.hpp"

using namespace spectlv;

namespace {

// flat mask with exactly n foreground voxels
Mask3D flat_mask(Dims d, std::int64_t n, double vmm) {
    Mask3D m(d, vmm, Structure::endocardium);
    for (std::int64_t i = 0; i < n; ++i) m.data[static_cast<std::size_t>(i)] = 1;
    return m;
}

}  // namespace

TEST_CASE("mask volume in cc") {
    Dims d{16, 16, 16};
    CHECK(mask_volume_cc(flat_mask(d, 1, 6.4)) == doctest::Approx(0.262144).epsilon(1e-12));
    CHECK(mask_volume_cc(flat_mask(d, 1000, 6.4)) == doctest::Approx(262.144).epsilon(1e-12));
}

TEST_CASE("mask volume is additive over disjoint masks") {
    Dims d{8, 8, 8};
    Mask3D a(d, 6.4, Structure::endocardium), b(d, 6.4, Structure::endocardium);
    Rng rng(4);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const int r = static_cast<int>(rng.below(4));
        if (r == 0) a.data[i] = 1;
        if (r == 1) b.data[i] = 1;
    }
    Mask3D u = a;
    for (std::size_t i = 0; i < u.data.size(); ++i) u.data[i] |= b.data[i];
    CHECK(mask_volume_cc(u) ==
          doctest::Approx(mask_volume_cc(a) + mask_volume_cc(b)).epsilon(1e-12));
}

TEST_CASE("voxelized ellipsoid within 10% of (4/3) pi abc") {
    Dims d{16, 16, 16};
    Mask3D m(d, 1.0, Structure::endocardium);
    const double a = 5, b = 4, c = 3, cc = 7.5;
    for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 16; ++y)
            for (int z = 0; z < 16; ++z) {
                const double dx = (x - cc) / a, dy = (y - cc) / b, dz = (z - cc) / c;
                if (dx * dx + dy * dy + dz * dz <= 1.0) m.at(x, y, z) = 1;
            }
    const double analytic = 4.0 / 3.0 * M_PI * a * b * c / 1000.0;
    CHECK(std::abs(mask_volume_cc(m) - analytic) / analytic < 0.10);
}

TEST_CASE("ef_from_gates on the stated volume series") {
    // voxel 10 mm => 1 cc per voxel
    Dims d{12, 12, 12};
    const int volumes[8] = {100, 95, 80, 60, 40, 50, 70, 90};
    std::array<Mask3D, 8> gates{flat_mask(d, 100, 10.0), flat_mask(d, 95, 10.0),
                                flat_mask(d, 80, 10.0),  flat_mask(d, 60, 10.0),
                                flat_mask(d, 40, 10.0),  flat_mask(d, 50, 10.0),
                                flat_mask(d, 70, 10.0),  flat_mask(d, 90, 10.0)};
    (void)volumes;
    EfResult r = ef_from_gates(gates);
    CHECK(r.edv_cc == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(r.esv_cc == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(r.lvef == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(r.ed_gate == 0);
    CHECK(r.es_gate == 4);
}

TEST_CASE("all-equal gates give LVEF 0; empty endo mask is an error") {
    Dims d{8, 8, 8};
    std::array<Mask3D, 8> gates;
    for (auto& g : gates) g = flat_mask(d, 20, 6.4);
    EfResult r = ef_from_gates(gates);
    CHECK(r.lvef == 0.0);
    CHECK(r.ed_gate == r.es_gate);

    gates[3] = Mask3D(d, 6.4, Structure::endocardium);
    CHECK_THROWS_AS(ef_from_gates(gates), std::runtime_error);
}

TEST_CASE("EF is invariant under gate relabeling") {
    Dims d{12, 12, 12};
    std::array<Mask3D, 8> gates{flat_mask(d, 100, 10.0), flat_mask(d, 95, 10.0),
                                flat_mask(d, 80, 10.0),  flat_mask(d, 60, 10.0),
                                flat_mask(d, 40, 10.0),  flat_mask(d, 50, 10.0),
                                flat_mask(d, 70, 10.0),  flat_mask(d, 90, 10.0)};
    EfResult base = ef_from_gates(gates);
    std::array<Mask3D, 8> shuffled{gates[4], gates[2], gates[0], gates[6],
                                   gates[1], gates[7], gates[3], gates[5]};
    EfResult perm = ef_from_gates(shuffled);
    CHECK(base.edv_cc == perm.edv_cc);
    CHECK(base.esv_cc == perm.esv_cc);
    CHECK(base.lvef == perm.lvef);
}

TEST_CASE("cavity_fill fills a hollow shell and keeps a solid mask unchanged") {
    Dims d{10, 10, 10};
    Mask3D shell(d, 6.4, Structure::endocardium);
    for (int x = 2; x <= 7; ++x)
        for (int y = 2; y <= 7; ++y)
            for (int z = 2; z <= 7; ++z)
                if (x == 2 || x == 7 || y == 2 || y == 7 || z == 2 || z == 7)
                    shell.at(x, y, z) = 1;
    Mask3D filled = cavity_fill(shell);
    CHECK(filled.foreground_count() == 6 * 6 * 6);
    CHECK(cavity_fill(filled).data == filled.data);
}

TEST_CASE("scar burden") {
    Dims d{8, 8, 8};
    Mask3D myo(d, 6.4, Structure::myocardium);
    Volume3D vol(d, 6.4);
    for (int i = 0; i < 200; ++i) {
        myo.data[static_cast<std::size_t>(i)] = 1;
        vol.data[static_cast<std::size_t>(i)] = 80.0f;
    }
    CHECK(scar_burden(vol, myo) == 0.0);  // uniform uptake

    for (int i = 0; i < 100; ++i) vol.data[static_cast<std::size_t>(i)] = 0.4f * 80.0f;
    CHECK(scar_burden(vol, myo) == doctest::Approx(50.0).epsilon(1e-12));

    // exact equality under positive rescaling of the uptake volume
    Volume3D scaled = vol;
    for (auto& v : scaled.data) v *= 4.0f;
    CHECK(scar_burden(scaled, myo) == scar_burden(vol, myo));

    // enumeration oracle on a random uptake map
    Rng rng(8);
    for (auto& v : vol.data) v = static_cast<float>(rng.uniform(0.0, 100.0));
    float peak = 0;
    int below = 0, total = 0;
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        if (myo.data[i]) peak = std::max(peak, vol.data[i]);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        if (myo.data[i]) {
            ++total;
            if (vol.data[i] < 0.5f * peak) ++below;
        }
    CHECK(scar_burden(vol, myo) == doctest::Approx(100.0 * below / total).epsilon(1e-12));

    Mask3D empty(d, 6.4, Structure::myocardium);
    CHECK_THROWS_AS(scar_burden(vol, empty), std::runtime_error);
}

TEST_CASE("volume curve: identical masks give a constant curve") {
    Dims d{8, 8, 8};
    std::array<Mask3D, 8> gates;
    for (auto& g : gates) g = flat_mask(d, 33, 6.4);
    auto curve = volume_curve(gates);
    for (double v : curve) CHECK(v == doctest::Approx(33 * 0.262144).epsilon(1e-12));
}
