#pragma once

#include <cstdint>
#include <string>

namespace spectlv::kernels {

// Runtime-selected backend for the data-parallel inner loops. The scalar
// reference kernels define the semantics; vector variants must produce
// bit-identical results (same per-element accumulation order, no FMA
// contraction). Equivalence is enforced by tests/test_kernels.cpp.
enum class Backend { auto_detect, scalar, avx2 };

void set_backend(Backend b);       // throws if the requested backend is unsupported
Backend active_backend();          // backend that float kernels will actually run
std::string backend_name(Backend b);
bool cpu_has_avx2();

// Geometry of a 3D cross-correlation. Spatial dims are (L, W, H) with H
// fastest in memory; weights are [co, ci, k, k, k].
struct Conv3dDims {
    std::int64_t n = 1;            // batch
    std::int64_t ci = 1, co = 1;   // channels
    std::int64_t l = 0, w = 0, h = 0;      // input spatial dims
    std::int64_t k = 5;
    std::int64_t stride = 1;
    std::int64_t pad = 2;

    std::int64_t lo() const { return (l + 2 * pad - k) / stride + 1; }
    std::int64_t wo() const { return (w + 2 * pad - k) / stride + 1; }
    std::int64_t ho() const { return (h + 2 * pad - k) / stride + 1; }
    std::int64_t in_count() const { return n * ci * l * w * h; }
    std::int64_t out_count() const { return n * co * lo() * wo() * ho(); }
    std::int64_t weight_count() const { return co * ci * k * k * k; }
};

// out[n,co,x,y,z] = b[co] + sum_{ci,dx,dy,dz} in[n,ci,sx+dx-p,...] * wgt[co,ci,dx,dy,dz]
template <typename T>
void conv3d_forward(const T* in, const T* wgt, const T* bias, T* out, const Conv3dDims& d);

// din += correlation of gout with the transposed/flipped kernel
template <typename T>
void conv3d_backward_input(const T* gout, const T* wgt, T* din, const Conv3dDims& d);

// gwgt[co,ci,dx,dy,dz] += sum gout * in; gbias[co] += sum gout
template <typename T>
void conv3d_backward_weights(const T* in, const T* gout, T* gwgt, T* gbias, const Conv3dDims& d);

// Transposed convolution, kernel 2^3, stride 2: doubles each spatial dim.
// wgt layout [ci, co, 2, 2, 2]; input (l,w,h), output (2l, 2w, 2h).
struct Deconv3dDims {
    std::int64_t n = 1, ci = 1, co = 1;
    std::int64_t l = 0, w = 0, h = 0;  // input spatial dims
};

template <typename T>
void deconv3d_forward(const T* in, const T* wgt, const T* bias, T* out, const Deconv3dDims& d);
template <typename T>
void deconv3d_backward_input(const T* gout, const T* wgt, T* din, const Deconv3dDims& d);
template <typename T>
void deconv3d_backward_weights(const T* in, const T* gout, T* gwgt, T* gbias,
                               const Deconv3dDims& d);

// Fixed-order horizontal sum of 8 partial lanes: the canonical reduction tree
// shared by the scalar reference and the AVX2 kernels.
template <typename T>
inline T hsum8_tree(const T lanes[8]) {
    T a0 = lanes[0] + lanes[4];
    T a1 = lanes[1] + lanes[5];
    T a2 = lanes[2] + lanes[6];
    T a3 = lanes[3] + lanes[7];
    T b0 = a0 + a2;
    T b1 = a1 + a3;
    return b0 + b1;
}

}  // namespace spectlv::kernels
