#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "spectlv/common.hpp"
#include "spectlv/metrics.hpp"

using namespace spectlv;

namespace {

Mask3D mask_of(Dims d, std::initializer_list<std::array<int, 3>> voxels, double vmm = 6.4) {
    Mask3D m(d, vmm, Structure::myocardium);
    for (const auto& v : voxels) m.at(v[0], v[1], v[2]) = 1;
    return m;
}

Mask3D random_mask(Dims d, double p, Rng& rng) {
    Mask3D m(d, 6.4, Structure::myocardium);
    for (auto& v : m.data) v = rng.bernoulli(p) ? 1 : 0;
    return m;
}

// independent naive oracles
double dsc_oracle(const Mask3D& a, const Mask3D& b) {
    double inter = 0, na = 0, nb = 0;
    for (int x = 0; x < a.dims.l; ++x)
        for (int y = 0; y < a.dims.w; ++y)
            for (int z = 0; z < a.dims.h; ++z) {
                na += a.at(x, y, z);
                nb += b.at(x, y, z);
                if (a.at(x, y, z) && b.at(x, y, z)) inter += 1;
            }
    if (na + nb == 0) return 1.0;
    return 2.0 * inter / (na + nb);
}

double hd_oracle_mm(const Mask3D& a, const Mask3D& b) {
    auto pts = [](const Mask3D& m) {
        std::vector<std::array<double, 3>> v;
        for (int x = 0; x < m.dims.l; ++x)
            for (int y = 0; y < m.dims.w; ++y)
                for (int z = 0; z < m.dims.h; ++z)
                    if (m.at(x, y, z)) v.push_back({double(x), double(y), double(z)});
        return v;
    };
    auto pa = pts(a), pb = pts(b);
    auto directed = [](const auto& from, const auto& to) {
        double worst = 0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to)
                best = std::min(best, std::sqrt((p[0] - q[0]) * (p[0] - q[0]) +
                                                (p[1] - q[1]) * (p[1] - q[1]) +
                                                (p[2] - q[2]) * (p[2] - q[2])));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(pa, pb), directed(pb, pa)) * a.voxel_mm;
}

}  // namespace

TEST_CASE("dsc basics") {
    Dims d{4, 4, 4};
    auto a = mask_of(d, {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}});
    CHECK(dsc(a, a) == 1.0);
    auto b = mask_of(d, {{3, 3, 3}});
    CHECK(dsc(a, b) == 0.0);
    // 4-voxel block vs 2-voxel subset: 2*2/(4+2)
    auto sub = mask_of(d, {{0, 0, 0}, {0, 0, 1}});
    CHECK(dsc(a, sub) == doctest::Approx(2.0 * 2.0 / 6.0).epsilon(1e-12));
    // empty conventions
    Mask3D e1(d, 6.4, Structure::myocardium), e2(d, 6.4, Structure::myocardium);
    CHECK(dsc(e1, e2) == 1.0);
    CHECK(dsc(e1, a) == 0.0);
    // symmetry
    CHECK(dsc(a, sub) == dsc(sub, a));
}

TEST_CASE("hausdorff basics") {
    Dims d{8, 8, 8};
    auto a = mask_of(d, {{1, 2, 3}, {4, 4, 4}});
    CHECK(hausdorff_mm(a, a) == 0.0);
    auto p = mask_of(d, {{0, 0, 0}});
    auto g = mask_of(d, {{3, 4, 0}});
    CHECK(hausdorff_mm(p, g) == doctest::Approx(32.0).epsilon(1e-12));  // 5 voxels at 6.4
    Mask3D empty(d, 6.4, Structure::myocardium);
    CHECK_THROWS_AS(hausdorff_mm(a, empty), std::runtime_error);
}

TEST_CASE("200 random 8^3 pairs: dsc exact, hausdorff within 1e-9 mm of brute force") {
    Rng rng(555);
    for (int trial = 0; trial < 200; ++trial) {
        Dims d{8, 8, 8};
        auto a = random_mask(d, 0.2, rng);
        auto b = random_mask(d, 0.2, rng);
        if (!a.foreground_count()) a.at(0, 0, 0) = 1;
        if (!b.foreground_count()) b.at(7, 7, 7) = 1;
        CHECK(dsc(a, b) == dsc_oracle(a, b));
        CHECK(std::abs(hausdorff_mm(a, b) - hd_oracle_mm(a, b)) < 1e-9);
    }
}

TEST_CASE("hausdorff directed triangle spot check") {
    Rng rng(556);
    Dims d{6, 6, 6};
    for (int trial = 0; trial < 20; ++trial) {
        auto a = random_mask(d, 0.3, rng);
        auto b = random_mask(d, 0.3, rng);
        auto c = random_mask(d, 0.3, rng);
        if (!a.foreground_count() || !b.foreground_count() || !c.foreground_count()) continue;
        CHECK(hausdorff_mm(a, c) <= hausdorff_mm(a, b) + hausdorff_mm(b, c) + 1e-9);
    }
}

TEST_CASE("relative error") {
    CHECK(relative_error(169.58, 170.75) == doctest::Approx(-0.685).epsilon(1e-3));
    CHECK(relative_error(5.0, 5.0) == 0.0);
    CHECK(relative_error(110.0, 100.0) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK_THROWS_AS(relative_error(1.0, 0.0), std::runtime_error);
}

TEST_CASE("pearson exact lines and formula oracle") {
    std::vector<double> xs{1, 2, 3, 4, 5};
    std::vector<double> ys{2, 4, 6, 8, 10};
    CHECK(pearson(xs, ys).r == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> yneg{-1, -2, -3, -4, -5};
    CHECK(pearson(xs, yneg).r == doctest::Approx(-1.0).epsilon(1e-12));

    // 20 random pairs against the direct covariance formula
    Rng rng(31337);
    std::vector<double> a(20), b(20);
    for (int i = 0; i < 20; ++i) {
        a[i] = rng.normal(3.0, 2.0);
        b[i] = 0.7 * a[i] + rng.normal(0.0, 1.0);
    }
    double ma = 0, mb = 0;
    for (int i = 0; i < 20; ++i) {
        ma += a[i] / 20;
        mb += b[i] / 20;
    }
    double saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < 20; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    CHECK(pearson(a, b).r == doctest::Approx(sab / std::sqrt(saa * sbb)).epsilon(1e-12));

    // frozen two-sided P (scipy.stats.pearsonr oracle)
    std::vector<double> fx{1.0, 2.0, 3.0, 4.0, 5.0, 6.5, 7.2, 8.9};
    std::vector<double> fy{2.1, 2.9, 6.2, 7.4, 9.0, 12.8, 13.9, 18.1};
    auto res = pearson(fx, fy);
    CHECK(res.r == doctest::Approx(0.995508469320936).epsilon(1e-12));
    CHECK(res.p_value == doctest::Approx(2.257662314681420e-07).epsilon(1e-9));

    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), std::runtime_error);
}

TEST_CASE("pearson r invariant under positive affine rescaling") {
    Rng rng(99);
    std::vector<double> a(12), b(12), a2(12);
    for (int i = 0; i < 12; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal() + 0.5 * a[i];
        a2[i] = 3.25 * a[i] + 17.0;
    }
    CHECK(pearson(a, b).r == doctest::Approx(pearson(a2, b).r).epsilon(1e-12));
}

TEST_CASE("bland-altman") {
    std::vector<double> xs{1, 2, 3, 4};
    auto same = bland_altman(xs, xs);
    CHECK(same.bias == 0.0);
    CHECK(same.lower_limit == 0.0);
    CHECK(same.upper_limit == 0.0);

    std::vector<double> shifted{2.5, 3.5, 4.5, 5.5};
    auto off = bland_altman(shifted, xs);
    CHECK(off.bias == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(off.upper_limit == doctest::Approx(1.5).epsilon(1e-12));

    Rng rng(12);
    std::vector<double> a(10), b(10);
    for (int i = 0; i < 10; ++i) {
        a[i] = rng.normal(5, 2);
        b[i] = rng.normal(5, 2);
    }
    auto ba = bland_altman(a, b);
    double mean = 0;
    for (int i = 0; i < 10; ++i) mean += (a[i] - b[i]) / 10;
    double ss = 0;
    for (int i = 0; i < 10; ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
    const double sd = std::sqrt(ss / 9);
    CHECK(ba.bias == doctest::Approx(mean).epsilon(1e-12));
    CHECK(ba.upper_limit == doctest::Approx(mean + 1.96 * sd).epsilon(1e-12));
    CHECK_THROWS_AS(bland_altman({1, 2}, {1, 2, 3}), std::runtime_error);
}
