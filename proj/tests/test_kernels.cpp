#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "spectlv/common.hpp"
#include "spectlv/kernels.hpp"
#include "test_support.hpp"

using namespace spectlv;
using kernels::Backend;
using kernels::Conv3dDims;
using kernels::Deconv3dDims;

namespace {

std::vector<float> random_vec(std::int64_t n, Rng& rng) {
    std::vector<float> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.normal(0.0, 1.0));
    return v;
}

// 7-loop direct cross-correlation, independent of the kernel layer's padding
// and vectorization choices
template <typename T>
std::vector<T> conv3d_naive(const std::vector<T>& in, const std::vector<T>& w,
                            const std::vector<T>& b, const Conv3dDims& d) {
    std::vector<T> out(static_cast<std::size_t>(d.out_count()), T(0));
    auto iidx = [&](std::int64_t n, std::int64_t c, std::int64_t x, std::int64_t y,
                    std::int64_t z) {
        return (((n * d.ci + c) * d.l + x) * d.w + y) * d.h + z;
    };
    for (std::int64_t n = 0; n < d.n; ++n)
        for (std::int64_t co = 0; co < d.co; ++co)
            for (std::int64_t x = 0; x < d.lo(); ++x)
                for (std::int64_t y = 0; y < d.wo(); ++y)
                    for (std::int64_t z = 0; z < d.ho(); ++z) {
                        T acc = b[co];
                        for (std::int64_t ci = 0; ci < d.ci; ++ci)
                            for (std::int64_t dx = 0; dx < d.k; ++dx)
                                for (std::int64_t dy = 0; dy < d.k; ++dy)
                                    for (std::int64_t dz = 0; dz < d.k; ++dz) {
                                        std::int64_t xi = x * d.stride + dx - d.pad;
                                        std::int64_t yi = y * d.stride + dy - d.pad;
                                        std::int64_t zi = z * d.stride + dz - d.pad;
                                        if (xi < 0 || xi >= d.l || yi < 0 || yi >= d.w ||
                                            zi < 0 || zi >= d.h)
                                            continue;
                                        acc += in[iidx(n, ci, xi, yi, zi)] *
                                               w[(((co * d.ci + ci) * d.k + dx) * d.k + dy) *
                                                     d.k +
                                                 dz];
                                    }
                        out[(((n * d.co + co) * d.lo() + x) * d.wo() + y) * d.ho() + z] = acc;
                    }
    return out;
}

}  // namespace

TEST_CASE("conv3d matches the direct 7-loop reference (float and double)") {
    Rng rng(11);
    for (int trial = 0; trial < 8; ++trial) {
        Conv3dDims d;
        d.n = 1 + static_cast<std::int64_t>(rng.below(2));
        d.ci = 1 + static_cast<std::int64_t>(rng.below(3));
        d.co = 1 + static_cast<std::int64_t>(rng.below(3));
        d.l = 3 + static_cast<std::int64_t>(rng.below(4));
        d.w = 3 + static_cast<std::int64_t>(rng.below(4));
        d.h = 3 + static_cast<std::int64_t>(rng.below(12));
        d.k = trial % 2 ? 5 : 3;
        d.pad = (d.k - 1) / 2;
        d.stride = 1;
        auto in = random_vec(d.in_count(), rng);
        auto w = random_vec(d.weight_count(), rng);
        auto b = random_vec(d.co, rng);
        std::vector<float> out(static_cast<std::size_t>(d.out_count()));
        kernels::conv3d_forward(in.data(), w.data(), b.data(), out.data(), d);
        auto ref = conv3d_naive(in, w, b, d);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-4));
    }
    // double path, tight tolerance
    Conv3dDims d;
    d.ci = 1;
    d.co = 1;
    d.l = d.w = d.h = 3;
    d.k = 3;
    d.pad = 1;
    Rng rng2(5);
    std::vector<double> in(27), w(27), b(1, 0.25);
    for (auto& x : in) x = rng2.normal();
    for (auto& x : w) x = rng2.normal();
    std::vector<double> out(27);
    kernels::conv3d_forward(in.data(), w.data(), b.data(), out.data(), d);
    auto ref = conv3d_naive(in, w, b, d);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("stride-2 2^3 conv halves each dimension") {
    Conv3dDims d;
    d.ci = 1;
    d.co = 1;
    d.l = d.w = d.h = 4;
    d.k = 2;
    d.stride = 2;
    d.pad = 0;
    CHECK(d.lo() == 2);
    CHECK(d.wo() == 2);
    CHECK(d.ho() == 2);
    Rng rng(3);
    auto in = random_vec(d.in_count(), rng);
    auto w = random_vec(d.weight_count(), rng);
    std::vector<float> b{0.0f}, out(8);
    kernels::conv3d_forward(in.data(), w.data(), b.data(), out.data(), d);
    auto ref = conv3d_naive(in, w, b, d);
    for (int i = 0; i < 8; ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-5));
}

TEST_CASE("scalar and avx2 backends agree exactly" *
          doctest::skip(!kernels::cpu_has_avx2())) {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        Conv3dDims d;
        d.n = 1 + static_cast<std::int64_t>(rng.below(2));
        d.ci = 1 + static_cast<std::int64_t>(rng.below(4));
        d.co = 1 + static_cast<std::int64_t>(rng.below(4));
        d.l = 3 + static_cast<std::int64_t>(rng.below(5));
        d.w = 3 + static_cast<std::int64_t>(rng.below(5));
        d.h = 3 + static_cast<std::int64_t>(rng.below(19));  // exercises tail masks
        d.k = trial % 2 ? 5 : 3;
        d.pad = (d.k - 1) / 2;
        auto in = random_vec(d.in_count(), rng);
        auto w = random_vec(d.weight_count(), rng);
        auto b = random_vec(d.co, rng);
        auto gout = random_vec(d.out_count(), rng);

        std::vector<float> out_s(static_cast<std::size_t>(d.out_count()));
        std::vector<float> out_v(out_s.size());
        std::vector<float> din_s(static_cast<std::size_t>(d.in_count()), 0.0f);
        std::vector<float> din_v(din_s.size(), 0.0f);
        std::vector<float> gw_s(static_cast<std::size_t>(d.weight_count()), 0.0f);
        std::vector<float> gw_v(gw_s.size(), 0.0f);
        std::vector<float> gb_s(static_cast<std::size_t>(d.co), 0.0f);
        std::vector<float> gb_v(gb_s.size(), 0.0f);

        kernels::set_backend(Backend::scalar);
        kernels::conv3d_forward(in.data(), w.data(), b.data(), out_s.data(), d);
        kernels::conv3d_backward_input(gout.data(), w.data(), din_s.data(), d);
        kernels::conv3d_backward_weights(in.data(), gout.data(), gw_s.data(), gb_s.data(), d);

        kernels::set_backend(Backend::avx2);
        kernels::conv3d_forward(in.data(), w.data(), b.data(), out_v.data(), d);
        kernels::conv3d_backward_input(gout.data(), w.data(), din_v.data(), d);
        kernels::conv3d_backward_weights(in.data(), gout.data(), gw_v.data(), gb_v.data(), d);

        kernels::set_backend(Backend::auto_detect);

        for (std::size_t i = 0; i < out_s.size(); ++i) CHECK(out_s[i] == out_v[i]);
        for (std::size_t i = 0; i < din_s.size(); ++i) CHECK(din_s[i] == din_v[i]);
        for (std::size_t i = 0; i < gw_s.size(); ++i) CHECK(gw_s[i] == gw_v[i]);
        for (std::size_t i = 0; i < gb_s.size(); ++i) CHECK(gb_s[i] == gb_v[i]);
    }
}

TEST_CASE("results are independent of the worker count") {
    Conv3dDims d;
    d.n = 2;
    d.ci = 3;
    d.co = 4;
    d.l = d.w = 6;
    d.h = 12;
    d.k = 3;
    d.pad = 1;
    Rng rng(31);
    auto in = random_vec(d.in_count(), rng);
    auto w = random_vec(d.weight_count(), rng);
    auto b = random_vec(d.co, rng);
    std::vector<float> out1(static_cast<std::size_t>(d.out_count()));
    std::vector<float> out2(out1.size());
    setenv("SPECTLV_THREADS", "1", 1);
    kernels::conv3d_forward(in.data(), w.data(), b.data(), out1.data(), d);
    setenv("SPECTLV_THREADS", "8", 1);
    kernels::conv3d_forward(in.data(), w.data(), b.data(), out2.data(), d);
    unsetenv("SPECTLV_THREADS");
    CHECK(out1 == out2);
}

TEST_CASE("deconv3d doubles dims; zero input gives zero output") {
    Deconv3dDims d;
    d.ci = 2;
    d.co = 3;
    d.l = d.w = d.h = 2;
    std::vector<float> in(static_cast<std::size_t>(d.ci * 8), 0.0f);
    std::vector<float> w(static_cast<std::size_t>(d.ci * d.co * 8), 1.0f);
    std::vector<float> b(static_cast<std::size_t>(d.co), 0.0f);
    std::vector<float> out(static_cast<std::size_t>(d.co * 64), 1.0f);
    kernels::deconv3d_forward(in.data(), w.data(), b.data(), out.data(), d);
    for (float v : out) CHECK(v == 0.0f);
}

TEST_CASE("conv/deconv adjoint identity <conv(x),y> = <x, adj(y)> to 1e-10") {
    // deconv3d_backward_input is the adjoint of deconv3d_forward; verified in
    // double over random 2^3/4^3 pairs.
    Deconv3dDims d;
    d.ci = 2;
    d.co = 2;
    d.l = d.w = d.h = 2;
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(static_cast<std::size_t>(d.ci * 8));
        std::vector<double> y(static_cast<std::size_t>(d.co * 64));
        std::vector<double> w(static_cast<std::size_t>(d.ci * d.co * 8));
        std::vector<double> b(static_cast<std::size_t>(d.co), 0.0);
        for (auto& v : x) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        for (auto& v : w) v = rng.normal();

        std::vector<double> fx(y.size());
        kernels::deconv3d_forward(x.data(), w.data(), b.data(), fx.data(), d);
        std::vector<double> aty(x.size(), 0.0);
        kernels::deconv3d_backward_input(y.data(), w.data(), aty.data(), d);

        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) lhs += fx[i] * y[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("stride-1 conv backward_input is the adjoint of forward") {
    Conv3dDims d;
    d.ci = 2;
    d.co = 3;
    d.l = d.w = 4;
    d.h = 5;
    d.k = 3;
    d.pad = 1;
    Rng rng(19);
    std::vector<double> x(static_cast<std::size_t>(d.in_count()));
    std::vector<double> y(static_cast<std::size_t>(d.out_count()));
    std::vector<double> w(static_cast<std::size_t>(d.weight_count()));
    std::vector<double> b(static_cast<std::size_t>(d.co), 0.0);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    for (auto& v : w) v = rng.normal();
    std::vector<double> fx(y.size());
    kernels::conv3d_forward(x.data(), w.data(), b.data(), fx.data(), d);
    std::vector<double> aty(x.size(), 0.0);
    kernels::conv3d_backward_input(y.data(), w.data(), aty.data(), d);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += fx[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}
