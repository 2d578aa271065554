#include <cstring>

#include "spectlv/common.hpp"
#include "kernels_detail.hpp"

// Scalar reference kernels. These define the numeric contract: every output
// element accumulates its terms in (ci, dx, dy, dz) order, and reductions
// over z run through 8 interleaved lanes combined by hsum8_tree. The AVX2
// variants reproduce the same order lane-for-lane.

namespace spectlv::kernels::detail {

template <typename T>
void pad_volume_impl(const T* src, T* dst, std::int64_t c, std::int64_t l, std::int64_t w,
                     std::int64_t h, std::int64_t p) {
    const std::int64_t pl = l + 2 * p, pw = w + 2 * p, ph = h + 2 * p;
    std::memset(dst, 0, sizeof(T) * c * pl * pw * ph);
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t x = 0; x < l; ++x)
            for (std::int64_t y = 0; y < w; ++y) {
                const T* s = src + ((ci * l + x) * w + y) * h;
                T* t = dst + ((ci * pl + x + p) * pw + (y + p)) * ph + p;
                std::memcpy(t, s, sizeof(T) * h);
            }
}

template <typename T>
void conv3d_forward_padded_scalar(const T* inpad, const T* wgt, const T* bias, T* out,
                                  const PaddedDims& pd) {
    const std::int64_t k = pd.k, k3 = k * k * k;
    parallel_for(pd.n * pd.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / pd.co, co = nc % pd.co;
            const T* inbase = inpad + n * pd.ci * pd.pl * pd.pw * pd.ph;
            T* outrow = out + nc * pd.lo * pd.wo * pd.ho;
            for (std::int64_t x = 0; x < pd.lo; ++x)
                for (std::int64_t y = 0; y < pd.wo; ++y, outrow += pd.ho) {
                    for (std::int64_t z = 0; z < pd.ho; ++z) outrow[z] = bias[co];
                    for (std::int64_t ci = 0; ci < pd.ci; ++ci) {
                        const T* wk = wgt + (co * pd.ci + ci) * k3;
                        const T* cin = inbase + ci * pd.pl * pd.pw * pd.ph;
                        for (std::int64_t dx = 0; dx < k; ++dx)
                            for (std::int64_t dy = 0; dy < k; ++dy) {
                                const T* row = cin + ((x + dx) * pd.pw + (y + dy)) * pd.ph;
                                const T* wrow = wk + (dx * k + dy) * k;
                                for (std::int64_t dz = 0; dz < k; ++dz) {
                                    const T wv = wrow[dz];
                                    for (std::int64_t z = 0; z < pd.ho; ++z)
                                        outrow[z] += row[z + dz] * wv;
                                }
                            }
                    }
                }
        }
    });
}

template <typename T>
void conv3d_backward_input_padded_scalar(const T* goutpad, const T* wgt, T* din,
                                         const PaddedDims& pd, std::int64_t l, std::int64_t w,
                                         std::int64_t h) {
    // gather form: din[ci,xi,yi,zi] += sum_{co,dx,dy,dz} goutpad[co, xi+dx, yi+dy, zi+dz]
    //              * wgt[co, ci, k-1-dx, k-1-dy, k-1-dz]
    const std::int64_t k = pd.k, k3 = k * k * k;
    parallel_for(pd.n * pd.ci, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / pd.ci, ci = nc % pd.ci;
            const T* gbase = goutpad + n * pd.co * pd.pl * pd.pw * pd.ph;
            T* drow = din + nc * l * w * h;
            for (std::int64_t x = 0; x < l; ++x)
                for (std::int64_t y = 0; y < w; ++y, drow += h) {
                    for (std::int64_t co = 0; co < pd.co; ++co) {
                        const T* wk = wgt + (co * pd.ci + ci) * k3;
                        const T* cg = gbase + co * pd.pl * pd.pw * pd.ph;
                        for (std::int64_t dx = 0; dx < k; ++dx)
                            for (std::int64_t dy = 0; dy < k; ++dy) {
                                const T* row = cg + ((x + dx) * pd.pw + (y + dy)) * pd.ph;
                                const T* wrow = wk + ((k - 1 - dx) * k + (k - 1 - dy)) * k;
                                for (std::int64_t dz = 0; dz < k; ++dz) {
                                    const T wv = wrow[k - 1 - dz];
                                    for (std::int64_t z = 0; z < h; ++z)
                                        drow[z] += row[z + dz] * wv;
                                }
                            }
                    }
                }
        }
    });
}

template <typename T>
void conv3d_backward_weights_padded_scalar(const T* inpad, const T* gout, T* gwgt, T* gbias,
                                           const PaddedDims& pd) {
    const std::int64_t k = pd.k, k3 = k * k * k;
    const std::int64_t ovol = pd.lo * pd.wo * pd.ho;
    parallel_for(pd.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t co = begin; co < end; ++co) {
            for (std::int64_t ci = 0; ci < pd.ci; ++ci) {
                T* wk = gwgt + (co * pd.ci + ci) * k3;
                for (std::int64_t dx = 0; dx < k; ++dx)
                    for (std::int64_t dy = 0; dy < k; ++dy)
                        for (std::int64_t dz = 0; dz < k; ++dz) {
                            T lanes[8] = {};
                            for (std::int64_t n = 0; n < pd.n; ++n) {
                                const T* cin =
                                    inpad + (n * pd.ci + ci) * pd.pl * pd.pw * pd.ph;
                                const T* cg = gout + (n * pd.co + co) * ovol;
                                for (std::int64_t x = 0; x < pd.lo; ++x)
                                    for (std::int64_t y = 0; y < pd.wo; ++y) {
                                        const T* row =
                                            cin + ((x + dx) * pd.pw + (y + dy)) * pd.ph + dz;
                                        const T* grow = cg + (x * pd.wo + y) * pd.ho;
                                        for (std::int64_t z = 0; z < pd.ho; ++z)
                                            lanes[z & 7] += grow[z] * row[z];
                                    }
                            }
                            wk[(dx * k + dy) * k + dz] += hsum8_tree(lanes);
                        }
            }
            T lanes[8] = {};
            for (std::int64_t n = 0; n < pd.n; ++n) {
                const T* cg = gout + (n * pd.co + co) * ovol;
                for (std::int64_t xy = 0; xy < pd.lo * pd.wo; ++xy) {
                    const T* grow = cg + xy * pd.ho;
                    for (std::int64_t z = 0; z < pd.ho; ++z) lanes[z & 7] += grow[z];
                }
            }
            gbias[co] += hsum8_tree(lanes);
        }
    });
}

template <typename T>
void conv3d_forward_strided(const T* in, const T* wgt, const T* bias, T* out,
                            const Conv3dDims& d) {
    const std::int64_t lo = d.lo(), wo = d.wo(), ho = d.ho(), k3 = d.k * d.k * d.k;
    parallel_for(d.n * d.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / d.co, co = nc % d.co;
            T* outrow = out + nc * lo * wo * ho;
            for (std::int64_t x = 0; x < lo; ++x)
                for (std::int64_t y = 0; y < wo; ++y)
                    for (std::int64_t z = 0; z < ho; ++z) {
                        T acc = bias[co];
                        for (std::int64_t ci = 0; ci < d.ci; ++ci) {
                            const T* cin = in + (n * d.ci + ci) * d.l * d.w * d.h;
                            const T* wk = wgt + (co * d.ci + ci) * k3;
                            for (std::int64_t dx = 0; dx < d.k; ++dx) {
                                const std::int64_t xi = x * d.stride + dx - d.pad;
                                if (xi < 0 || xi >= d.l) continue;
                                for (std::int64_t dy = 0; dy < d.k; ++dy) {
                                    const std::int64_t yi = y * d.stride + dy - d.pad;
                                    if (yi < 0 || yi >= d.w) continue;
                                    for (std::int64_t dz = 0; dz < d.k; ++dz) {
                                        const std::int64_t zi = z * d.stride + dz - d.pad;
                                        if (zi < 0 || zi >= d.h) continue;
                                        acc += cin[(xi * d.w + yi) * d.h + zi] *
                                               wk[(dx * d.k + dy) * d.k + dz];
                                    }
                                }
                            }
                        }
                        *outrow++ = acc;
                    }
        }
    });
}

template <typename T>
void conv3d_backward_input_strided(const T* gout, const T* wgt, T* din, const Conv3dDims& d) {
    const std::int64_t lo = d.lo(), wo = d.wo(), ho = d.ho(), k3 = d.k * d.k * d.k;
    parallel_for(d.n * d.ci, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t nc = begin; nc < end; ++nc) {
            const std::int64_t n = nc / d.ci, ci = nc % d.ci;
            T* dbase = din + nc * d.l * d.w * d.h;
            for (std::int64_t co = 0; co < d.co; ++co) {
                const T* wk = wgt + (co * d.ci + ci) * k3;
                const T* cg = gout + (n * d.co + co) * lo * wo * ho;
                for (std::int64_t x = 0; x < lo; ++x)
                    for (std::int64_t y = 0; y < wo; ++y)
                        for (std::int64_t z = 0; z < ho; ++z) {
                            const T gv = cg[(x * wo + y) * ho + z];
                            for (std::int64_t dx = 0; dx < d.k; ++dx) {
                                const std::int64_t xi = x * d.stride + dx - d.pad;
                                if (xi < 0 || xi >= d.l) continue;
                                for (std::int64_t dy = 0; dy < d.k; ++dy) {
                                    const std::int64_t yi = y * d.stride + dy - d.pad;
                                    if (yi < 0 || yi >= d.w) continue;
                                    for (std::int64_t dz = 0; dz < d.k; ++dz) {
                                        const std::int64_t zi = z * d.stride + dz - d.pad;
                                        if (zi < 0 || zi >= d.h) continue;
                                        dbase[(xi * d.w + yi) * d.h + zi] +=
                                            gv * wk[(dx * d.k + dy) * d.k + dz];
                                    }
                                }
                            }
                        }
            }
        }
    });
}

template <typename T>
void conv3d_backward_weights_strided(const T* in, const T* gout, T* gwgt, T* gbias,
                                     const Conv3dDims& d) {
    const std::int64_t lo = d.lo(), wo = d.wo(), ho = d.ho(), k3 = d.k * d.k * d.k;
    parallel_for(d.co, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t co = begin; co < end; ++co) {
            T bias_acc = T(0);
            for (std::int64_t n = 0; n < d.n; ++n) {
                const T* cg = gout + (n * d.co + co) * lo * wo * ho;
                for (std::int64_t i = 0; i < lo * wo * ho; ++i) bias_acc += cg[i];
            }
            gbias[co] += bias_acc;
            for (std::int64_t ci = 0; ci < d.ci; ++ci) {
                T* wk = gwgt + (co * d.ci + ci) * k3;
                for (std::int64_t n = 0; n < d.n; ++n) {
                    const T* cin = in + (n * d.ci + ci) * d.l * d.w * d.h;
                    const T* cg = gout + (n * d.co + co) * lo * wo * ho;
                    for (std::int64_t x = 0; x < lo; ++x)
                        for (std::int64_t y = 0; y < wo; ++y)
                            for (std::int64_t z = 0; z < ho; ++z) {
                                const T gv = cg[(x * wo + y) * ho + z];
                                for (std::int64_t dx = 0; dx < d.k; ++dx) {
                                    const std::int64_t xi = x * d.stride + dx - d.pad;
                                    if (xi < 0 || xi >= d.l) continue;
                                    for (std::int64_t dy = 0; dy < d.k; ++dy) {
                                        const std::int64_t yi = y * d.stride + dy - d.pad;
                                        if (yi < 0 || yi >= d.w) continue;
                                        for (std::int64_t dz = 0; dz < d.k; ++dz) {
                                            const std::int64_t zi = z * d.stride + dz - d.pad;
                                            if (zi < 0 || zi >= d.h) continue;
                                            wk[(dx * d.k + dy) * d.k + dz] +=
                                                gv * cin[(xi * d.w + yi) * d.h + zi];
                                        }
                                    }
                                }
                            }
                }
            }
        }
    });
}

#define SPECTLV_INSTANTIATE(T)                                                                  \
    template void conv3d_forward_padded_scalar<T>(const T*, const T*, const T*, T*,            \
                                                  const PaddedDims&);                          \
    template void conv3d_backward_input_padded_scalar<T>(const T*, const T*, T*,               \
                                                         const PaddedDims&, std::int64_t,     \
                                                         std::int64_t, std::int64_t);         \
    template void conv3d_backward_weights_padded_scalar<T>(const T*, const T*, T*, T*,         \
                                                           const PaddedDims&);                \
    template void conv3d_forward_strided<T>(const T*, const T*, const T*, T*,                 \
                                            const Conv3dDims&);                               \
    template void conv3d_backward_input_strided<T>(const T*, const T*, T*, const Conv3dDims&); \
    template void conv3d_backward_weights_strided<T>(const T*, const T*, T*, T*,              \
                                                     const Conv3dDims&);                      \
    template void pad_volume_impl<T>(const T*, T*, std::int64_t, std::int64_t, std::int64_t,  \
                                     std::int64_t, std::int64_t);

SPECTLV_INSTANTIATE(float)
SPECTLV_INSTANTIATE(double)
#undef SPECTLV_INSTANTIATE

}  // namespace spectlv::kernels::detail
