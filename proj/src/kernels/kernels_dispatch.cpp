#include <cstdlib>
#include <mutex>
#include <type_traits>
#include <vector>

#include "spectlv/common.hpp"
#include "kernels_detail.hpp"

namespace spectlv::kernels {

namespace {

Backend g_backend = Backend::auto_detect;
std::once_flag g_env_once;

void apply_env_override() {
    if (const char* env = std::getenv("SPECTLV_KERNEL")) {
        std::string v(env);
        if (v == "scalar") g_backend = Backend::scalar;
        else if (v == "avx2") g_backend = Backend::avx2;
        else if (v == "auto") g_backend = Backend::auto_detect;
        else throw std::runtime_error("SPECTLV_KERNEL must be scalar, avx2, or auto");
    }
}

Backend resolved() {
    std::call_once(g_env_once, apply_env_override);
    if (g_backend == Backend::auto_detect)
        return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    return g_backend;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__AVX2__)
    return true;
#elif defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

void set_backend(Backend b) {
    std::call_once(g_env_once, apply_env_override);
    if (b == Backend::avx2 && !cpu_has_avx2())
        throw std::runtime_error("avx2 backend requested but CPU lacks AVX2");
    g_backend = b;
}

Backend active_backend() { return resolved(); }

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::auto_detect: return "auto";
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "?";
}

namespace {

using detail::PaddedDims;

template <typename T>
constexpr bool is_float = std::is_same_v<T, float>;

}  // namespace

template <typename T>
void conv3d_forward(const T* in, const T* wgt, const T* bias, T* out, const Conv3dDims& d) {
    if (d.stride != 1) {
        detail::conv3d_forward_strided(in, wgt, bias, out, d);
        return;
    }
    PaddedDims pd = PaddedDims::from(d);
    std::vector<T> padded(static_cast<std::size_t>(pd.pad_count()));
    for (std::int64_t n = 0; n < d.n; ++n)
        detail::pad_volume_impl(in + n * d.ci * d.l * d.w * d.h,
                                padded.data() + n * d.ci * pd.pl * pd.pw * pd.ph, d.ci, d.l,
                                d.w, d.h, d.pad);
    if constexpr (is_float<T>) {
        if (resolved() == Backend::avx2) {
            detail::conv3d_forward_padded_avx2(padded.data(), wgt, bias, out, pd);
            return;
        }
    }
    detail::conv3d_forward_padded_scalar(padded.data(), wgt, bias, out, pd);
}

template <typename T>
void conv3d_backward_input(const T* gout, const T* wgt, T* din, const Conv3dDims& d) {
    if (d.stride != 1) {
        detail::conv3d_backward_input_strided(gout, wgt, din, d);
        return;
    }
    // pad gout by k-1-p so the gather indices line up with a plain correlation
    const std::int64_t q = d.k - 1 - d.pad;
    const std::int64_t lo = d.lo(), wo = d.wo(), ho = d.ho();
    PaddedDims pd{d.n, d.ci, d.co, lo + 2 * q, wo + 2 * q, ho + 2 * q, d.l, d.w, d.h, d.k};
    std::vector<T> padded(static_cast<std::size_t>(d.n * d.co * pd.pl * pd.pw * pd.ph));
    for (std::int64_t n = 0; n < d.n; ++n)
        detail::pad_volume_impl(gout + n * d.co * lo * wo * ho,
                                padded.data() + n * d.co * pd.pl * pd.pw * pd.ph, d.co, lo, wo,
                                ho, q);
    if constexpr (is_float<T>) {
        if (resolved() == Backend::avx2) {
            detail::conv3d_backward_input_padded_avx2(padded.data(), wgt, din, pd, d.l, d.w,
                                                      d.h);
            return;
        }
    }
    detail::conv3d_backward_input_padded_scalar(padded.data(), wgt, din, pd, d.l, d.w, d.h);
}

template <typename T>
void conv3d_backward_weights(const T* in, const T* gout, T* gwgt, T* gbias, const Conv3dDims& d) {
    if (d.stride != 1) {
        detail::conv3d_backward_weights_strided(in, gout, gwgt, gbias, d);
        return;
    }
    PaddedDims pd = PaddedDims::from(d);
    std::vector<T> padded(static_cast<std::size_t>(pd.pad_count()));
    for (std::int64_t n = 0; n < d.n; ++n)
        detail::pad_volume_impl(in + n * d.ci * d.l * d.w * d.h,
                                padded.data() + n * d.ci * pd.pl * pd.pw * pd.ph, d.ci, d.l,
                                d.w, d.h, d.pad);
    if constexpr (is_float<T>) {
        if (resolved() == Backend::avx2) {
            detail::conv3d_backward_weights_padded_avx2(padded.data(), gout, gwgt, gbias, pd);
            return;
        }
    }
    detail::conv3d_backward_weights_padded_scalar(padded.data(), gout, gwgt, gbias, pd);
}

// Transposed convolution in gather form: every output voxel reads exactly one
// input voxel per channel since kernel size equals stride.
template <typename T>
void deconv3d_forward(const T* in, const T* wgt, const T* bias, T* out, const Deconv3dDims& d) {
    const std::int64_t lo = 2 * d.l, wo = 2 * d.w, ho = 2 * d.h;
    parallel_for(d.n * d.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / d.co, co = nc % d.co;
            T* orow = out + nc * lo * wo * ho;
            for (std::int64_t xo = 0; xo < lo; ++xo)
                for (std::int64_t yo = 0; yo < wo; ++yo)
                    for (std::int64_t zo = 0; zo < ho; ++zo) {
                        const std::int64_t widx =
                            ((xo & 1) * 2 + (yo & 1)) * 2 + (zo & 1);
                        T acc = bias[co];
                        for (std::int64_t ci = 0; ci < d.ci; ++ci)
                            acc += in[((n * d.ci + ci) * d.l + (xo >> 1)) * d.w * d.h +
                                      (yo >> 1) * d.h + (zo >> 1)] *
                                   wgt[(ci * d.co + co) * 8 + widx];
                        *orow++ = acc;
                    }
        }
    });
}

template <typename T>
void deconv3d_backward_input(const T* gout, const T* wgt, T* din, const Deconv3dDims& d) {
    const std::int64_t lo = 2 * d.l, wo = 2 * d.w, ho = 2 * d.h;
    parallel_for(d.n * d.ci, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / d.ci, ci = nc % d.ci;
            T* drow = din + nc * d.l * d.w * d.h;
            for (std::int64_t x = 0; x < d.l; ++x)
                for (std::int64_t y = 0; y < d.w; ++y)
                    for (std::int64_t z = 0; z < d.h; ++z) {
                        T acc = T(0);
                        for (std::int64_t co = 0; co < d.co; ++co) {
                            const T* cg = gout + (n * d.co + co) * lo * wo * ho;
                            const T* wk = wgt + (ci * d.co + co) * 8;
                            for (std::int64_t dx = 0; dx < 2; ++dx)
                                for (std::int64_t dy = 0; dy < 2; ++dy)
                                    for (std::int64_t dz = 0; dz < 2; ++dz)
                                        acc += cg[((2 * x + dx) * wo + 2 * y + dy) * ho + 2 * z +
                                                  dz] *
                                               wk[(dx * 2 + dy) * 2 + dz];
                        }
                        *drow++ += acc;
                    }
        }
    });
}

template <typename T>
void deconv3d_backward_weights(const T* in, const T* gout, T* gwgt, T* gbias,
                               const Deconv3dDims& d) {
    const std::int64_t lo = 2 * d.l, wo = 2 * d.w, ho = 2 * d.h;
    parallel_for(d.ci * d.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t cc = begin; cc < end; ++cc) {
            const std::int64_t ci = cc / d.co, co = cc % d.co;
            T* wk = gwgt + cc * 8;
            for (std::int64_t dx = 0; dx < 2; ++dx)
                for (std::int64_t dy = 0; dy < 2; ++dy)
                    for (std::int64_t dz = 0; dz < 2; ++dz) {
                        T acc = T(0);
                        for (std::int64_t n = 0; n < d.n; ++n) {
                            const T* cin = in + (n * d.ci + ci) * d.l * d.w * d.h;
                            const T* cg = gout + (n * d.co + co) * lo * wo * ho;
                            for (std::int64_t x = 0; x < d.l; ++x)
                                for (std::int64_t y = 0; y < d.w; ++y)
                                    for (std::int64_t z = 0; z < d.h; ++z)
                                        acc += cin[(x * d.w + y) * d.h + z] *
                                               cg[((2 * x + dx) * wo + 2 * y + dy) * ho +
                                                  2 * z + dz];
                        }
                        wk[(dx * 2 + dy) * 2 + dz] += acc;
                    }
        }
    });
    parallel_for(d.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t co = begin; co < end; ++co) {
            T acc = T(0);
            for (std::int64_t n = 0; n < d.n; ++n) {
                const T* cg = gout + (n * d.co + co) * lo * wo * ho;
                for (std::int64_t i = 0; i < lo * wo * ho; ++i) acc += cg[i];
            }
            gbias[co] += acc;
        }
    });
}

#define SPECTLV_INSTANTIATE(T)                                                                \
    template void conv3d_forward<T>(const T*, const T*, const T*, T*, const Conv3dDims&);     \
    template void conv3d_backward_input<T>(const T*, const T*, T*, const Conv3dDims&);        \
    template void conv3d_backward_weights<T>(const T*, const T*, T*, T*, const Conv3dDims&);  \
    template void deconv3d_forward<T>(const T*, const T*, const T*, T*, const Deconv3dDims&); \
    template void deconv3d_backward_input<T>(const T*, const T*, T*, const Deconv3dDims&);    \
    template void deconv3d_backward_weights<T>(const T*, const T*, T*, T*, const Deconv3dDims&);

SPECTLV_INSTANTIATE(float)
SPECTLV_INSTANTIATE(double)
#undef SPECTLV_INSTANTIATE

}  // namespace spectlv::kernels
