#include "spectlv/common.hpp"
#include "kernels_detail.hpp"

#if defined(__AVX2__)
#include <immintrin.h>

// AVX2 variants of the stride-1 conv kernels. Lanes run over the output z
// axis; each lane accumulates in the same (ci, dx, dy, dz) term order as the
// scalar reference, and reductions end with the same hsum8_tree, so results
// are bit-identical to the reference (the build disables FP contraction).

namespace spectlv::kernels::detail {

namespace {

inline float hsum8_tree_vec(__m256 v) {
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, v);
    return hsum8_tree(lanes);
}

}  // namespace

void conv3d_forward_padded_avx2(const float* inpad, const float* wgt, const float* bias,
                                float* out, const PaddedDims& pd) {
    const std::int64_t k = pd.k, k3 = k * k * k;
    const std::int64_t vend = pd.ho & ~7;
    parallel_for(pd.n * pd.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / pd.co, co = nc % pd.co;
            const float* inbase = inpad + n * pd.ci * pd.pl * pd.pw * pd.ph;
            float* outrow = out + nc * pd.lo * pd.wo * pd.ho;
            for (std::int64_t x = 0; x < pd.lo; ++x)
                for (std::int64_t y = 0; y < pd.wo; ++y, outrow += pd.ho) {
                    const __m256 bv = _mm256_set1_ps(bias[co]);
                    for (std::int64_t z = 0; z < vend; z += 8) _mm256_storeu_ps(outrow + z, bv);
                    for (std::int64_t z = vend; z < pd.ho; ++z) outrow[z] = bias[co];
                    for (std::int64_t ci = 0; ci < pd.ci; ++ci) {
                        const float* wk = wgt + (co * pd.ci + ci) * k3;
                        const float* cin = inbase + ci * pd.pl * pd.pw * pd.ph;
                        for (std::int64_t dx = 0; dx < k; ++dx)
                            for (std::int64_t dy = 0; dy < k; ++dy) {
                                const float* row = cin + ((x + dx) * pd.pw + (y + dy)) * pd.ph;
                                const float* wrow = wk + (dx * k + dy) * k;
                                for (std::int64_t dz = 0; dz < k; ++dz) {
                                    const __m256 wv = _mm256_set1_ps(wrow[dz]);
                                    for (std::int64_t z = 0; z < vend; z += 8) {
                                        __m256 acc = _mm256_loadu_ps(outrow + z);
                                        __m256 iv = _mm256_loadu_ps(row + z + dz);
                                        acc = _mm256_add_ps(acc, _mm256_mul_ps(iv, wv));
                                        _mm256_storeu_ps(outrow + z, acc);
                                    }
                                    const float ws = wrow[dz];
                                    for (std::int64_t z = vend; z < pd.ho; ++z)
                                        outrow[z] += row[z + dz] * ws;
                                }
                            }
                    }
                }
        }
    });
}

void conv3d_backward_input_padded_avx2(const float* goutpad, const float* wgt, float* din,
                                       const PaddedDims& pd, std::int64_t l, std::int64_t w,
                                       std::int64_t h) {
    const std::int64_t k = pd.k, k3 = k * k * k;
    const std::int64_t vend = h & ~7;
    parallel_for(pd.n * pd.ci, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / pd.ci, ci = nc % pd.ci;
            const float* gbase = goutpad + n * pd.co * pd.pl * pd.pw * pd.ph;
            float* drow = din + nc * l * w * h;
            for (std::int64_t x = 0; x < l; ++x)
                for (std::int64_t y = 0; y < w; ++y, drow += h) {
                    for (std::int64_t co = 0; co < pd.co; ++co) {
                        const float* wk = wgt + (co * pd.ci + ci) * k3;
                        const float* cg = gbase + co * pd.pl * pd.pw * pd.ph;
                        for (std::int64_t dx = 0; dx < k; ++dx)
                            for (std::int64_t dy = 0; dy < k; ++dy) {
                                const float* row = cg + ((x + dx) * pd.pw + (y + dy)) * pd.ph;
                                const float* wrow = wk + ((k - 1 - dx) * k + (k - 1 - dy)) * k;
                                for (std::int64_t dz = 0; dz < k; ++dz) {
                                    const float ws = wrow[k - 1 - dz];
                                    const __m256 wv = _mm256_set1_ps(ws);
                                    for (std::int64_t z = 0; z < vend; z += 8) {
                                        __m256 acc = _mm256_loadu_ps(drow + z);
                                        __m256 gv = _mm256_loadu_ps(row + z + dz);
                                        acc = _mm256_add_ps(acc, _mm256_mul_ps(gv, wv));
                                        _mm256_storeu_ps(drow + z, acc);
                                    }
                                    for (std::int64_t z = vend; z < h; ++z)
                                        drow[z] += row[z + dz] * ws;
                                }
                            }
                    }
                }
        }
    });
}

void conv3d_backward_weights_padded_avx2(const float* inpad, const float* gout, float* gwgt,
                                         float* gbias, const PaddedDims& pd) {
    const std::int64_t k = pd.k, k3 = k * k * k;
    const std::int64_t ovol = pd.lo * pd.wo * pd.ho;
    const std::int64_t vend = pd.ho & ~7;
    const std::int64_t rem = pd.ho - vend;
    // tail chunk handled by masked loads: inactive lanes contribute exact zeros
    const __m256i tmask = _mm256_setr_epi32(rem > 0 ? -1 : 0, rem > 1 ? -1 : 0, rem > 2 ? -1 : 0,
                                            rem > 3 ? -1 : 0, rem > 4 ? -1 : 0, rem > 5 ? -1 : 0,
                                            rem > 6 ? -1 : 0, 0);
    parallel_for(pd.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t co = begin; co < end; ++co) {
            for (std::int64_t ci = 0; ci < pd.ci; ++ci) {
                float* wk = gwgt + (co * pd.ci + ci) * k3;
                for (std::int64_t dx = 0; dx < k; ++dx)
                    for (std::int64_t dy = 0; dy < k; ++dy)
                        for (std::int64_t dz = 0; dz < k; ++dz) {
                            __m256 vacc = _mm256_setzero_ps();
                            for (std::int64_t n = 0; n < pd.n; ++n) {
                                const float* cin =
                                    inpad + (n * pd.ci + ci) * pd.pl * pd.pw * pd.ph;
                                const float* cg = gout + (n * pd.co + co) * ovol;
                                for (std::int64_t x = 0; x < pd.lo; ++x)
                                    for (std::int64_t y = 0; y < pd.wo; ++y) {
                                        const float* row =
                                            cin + ((x + dx) * pd.pw + (y + dy)) * pd.ph + dz;
                                        const float* grow = cg + (x * pd.wo + y) * pd.ho;
                                        for (std::int64_t z = 0; z < vend; z += 8) {
                                            __m256 gv = _mm256_loadu_ps(grow + z);
                                            __m256 iv = _mm256_loadu_ps(row + z);
                                            vacc = _mm256_add_ps(vacc,
                                                                 _mm256_mul_ps(gv, iv));
                                        }
                                        if (rem) {
                                            __m256 gv = _mm256_maskload_ps(grow + vend, tmask);
                                            __m256 iv = _mm256_maskload_ps(row + vend, tmask);
                                            vacc = _mm256_add_ps(vacc,
                                                                 _mm256_mul_ps(gv, iv));
                                        }
                                    }
                            }
                            wk[(dx * k + dy) * k + dz] += hsum8_tree_vec(vacc);
                        }
            }
            __m256 vacc = _mm256_setzero_ps();
            for (std::int64_t n = 0; n < pd.n; ++n) {
                const float* cg = gout + (n * pd.co + co) * ovol;
                for (std::int64_t xy = 0; xy < pd.lo * pd.wo; ++xy) {
                    const float* grow = cg + xy * pd.ho;
                    for (std::int64_t z = 0; z < vend; z += 8)
                        vacc = _mm256_add_ps(vacc, _mm256_loadu_ps(grow + z));
                    if (rem)
                        vacc = _mm256_add_ps(vacc, _mm256_maskload_ps(grow + vend, tmask));
                }
            }
            gbias[co] += hsum8_tree_vec(vacc);
        }
    });
}

}  // namespace spectlv::kernels::detail

#else  // !__AVX2__

namespace spectlv::kernels::detail {

void conv3d_forward_padded_avx2(const float* inpad, const float* wgt, const float* bias,
                                float* out, const PaddedDims& pd) {
    conv3d_forward_padded_scalar(inpad, wgt, bias, out, pd);
}
void conv3d_backward_input_padded_avx2(const float* goutpad, const float* wgt, float* din,
                                       const PaddedDims& pd, std::int64_t l, std::int64_t w,
                                       std::int64_t h) {
    conv3d_backward_input_padded_scalar(goutpad, wgt, din, pd, l, w, h);
}
void conv3d_backward_weights_padded_avx2(const float* inpad, const float* gout, float* gwgt,
                                         float* gbias, const PaddedDims& pd) {
    conv3d_backward_weights_padded_scalar(inpad, gout, gwgt, gbias, pd);
}

}  // namespace spectlv::kernels::detail

#endif
