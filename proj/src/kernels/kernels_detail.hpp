#pragma once

#include "spectlv/kernels.hpp"

namespace spectlv::kernels::detail {

// Geometry after zero-padding; shared by the scalar reference and the AVX2
// kernels so both sides index identically.
struct PaddedDims {
    std::int64_t n, ci, co;
    std::int64_t pl, pw, ph;      // padded input spatial dims
    std::int64_t lo, wo, ho;      // output spatial dims
    std::int64_t k;

    static PaddedDims from(const Conv3dDims& d) {
        return {d.n,      d.ci,     d.co, d.l + 2 * d.pad, d.w + 2 * d.pad,
                d.h + 2 * d.pad, d.lo(), d.wo(), d.ho(), d.k};
    }
    std::int64_t pad_count() const { return n * ci * pl * pw * ph; }
};

// stride-1 kernels on pre-padded input
template <typename T>
void conv3d_forward_padded_scalar(const T* inpad, const T* wgt, const T* bias, T* out,
                                  const PaddedDims& pd);
template <typename T>
void conv3d_backward_input_padded_scalar(const T* goutpad, const T* wgt, T* din,
                                         const PaddedDims& pd, std::int64_t l, std::int64_t w,
                                         std::int64_t h);
template <typename T>
void conv3d_backward_weights_padded_scalar(const T* inpad, const T* gout, T* gwgt, T* gbias,
                                           const PaddedDims& pd);

void conv3d_forward_padded_avx2(const float* inpad, const float* wgt, const float* bias,
                                float* out, const PaddedDims& pd);
void conv3d_backward_input_padded_avx2(const float* goutpad, const float* wgt, float* din,
                                       const PaddedDims& pd, std::int64_t l, std::int64_t w,
                                       std::int64_t h);
void conv3d_backward_weights_padded_avx2(const float* inpad, const float* gout, float* gwgt,
                                         float* gbias, const PaddedDims& pd);

// Zero-padded copy: dst spatial dims are (l+2p, w+2p, h+2p) per channel with
// the payload offset by p along each axis.
template <typename T>
void pad_volume_impl(const T* src, T* dst, std::int64_t c, std::int64_t l, std::int64_t w,
                     std::int64_t h, std::int64_t p);

// generic strided path (bounds-checked, used for the 2^3/s2 down-convolutions)
template <typename T>
void conv3d_forward_strided(const T* in, const T* wgt, const T* bias, T* out, const Conv3dDims& d);
template <typename T>
void conv3d_backward_input_strided(const T* gout, const T* wgt, T* din, const Conv3dDims& d);
template <typename T>
void conv3d_backward_weights_strided(const T* in, const T* gout, T* gwgt, T* gbias,
                                     const Conv3dDims& d);

}  // namespace spectlv::kernels::detail
