#include "spectlv/tape.hpp"

#include <cmath>
#include <cstring>

#include "spectlv/common.hpp"
#include "spectlv/kernels.hpp"

namespace spectlv {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

// snap coordinates that are within a few float ulps of an integer so that
// exact-identity transforms reproduce their input bitwise
constexpr double kSnapEps = 1e-5;

template <typename T>
T snap_coord(T x) {
    T r = std::nearbyint(x);
    return std::abs(x - r) <= static_cast<T>(kSnapEps) ? r : x;
}

}  // namespace

template <typename T>
typename Tape<T>::Id Tape<T>::leaf(Tensor<T>* t) {
    t->check_shape();
    if (t->requires_grad) t->ensure_grad();
    Node n;
    n.ext = t;
    n.needs = t->requires_grad;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Id Tape<T>::constant(TensorShape shape, std::vector<T> values) {
    Node n;
    n.own.shape = std::move(shape);
    n.own.v = std::move(values);
    n.own.check_shape();
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Id Tape<T>::result_node(TensorShape shape, bool needs) {
    Node n;
    n.own.shape = std::move(shape);
    n.own.v.assign(static_cast<std::size_t>(shape_count(n.own.shape)), T(0));
    n.needs = needs;
    if (needs) n.own.ensure_grad();
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Id Tape<T>::conv3d(Id x, Id w, Id b, int stride, int pad) {
    const Tensor<T>&xv = tensor(x), &wv = tensor(w), &bv = tensor(b);
    require(xv.shape.size() == 5, "conv3d: input must be [N,C,L,W,H]");
    require(wv.shape.size() == 5 && wv.shape[1] == xv.shape[1],
            "conv3d: weight channels do not match input");
    require(bv.shape.size() == 1 && bv.shape[0] == wv.shape[0],
            "conv3d: bias does not match output channels");
    kernels::Conv3dDims d;
    d.n = xv.shape[0];
    d.ci = xv.shape[1];
    d.co = wv.shape[0];
    d.l = xv.shape[2];
    d.w = xv.shape[3];
    d.h = xv.shape[4];
    d.k = wv.shape[2];
    d.stride = stride;
    d.pad = pad;
    require(d.lo() > 0 && d.wo() > 0 && d.ho() > 0, "conv3d: output would be empty");

    bool needs = nodes_[x].needs || nodes_[w].needs || nodes_[b].needs;
    Id out = result_node({d.n, d.co, d.lo(), d.wo(), d.ho()}, needs);
    kernels::conv3d_forward(xv.v.data(), wv.v.data(), bv.v.data(), tensor(out).v.data(), d);
    if (needs) {
        bool xn = nodes_[x].needs, wn = nodes_[w].needs, bn = nodes_[b].needs;
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            if (xn)
                kernels::conv3d_backward_input(go.data(), tp.tensor(w).v.data(),
                                               tp.tensor(x).g.data(), d);
            if (wn || bn) {
                std::vector<T> gw(tp.tensor(w).v.size(), T(0));
                std::vector<T> gb(tp.tensor(b).v.size(), T(0));
                kernels::conv3d_backward_weights(tp.tensor(x).v.data(), go.data(), gw.data(),
                                                 gb.data(), d);
                if (wn) {
                    auto& dst = tp.tensor(w).g;
                    for (std::size_t i = 0; i < gw.size(); ++i) dst[i] += gw[i];
                }
                if (bn) {
                    auto& dst = tp.tensor(b).g;
                    for (std::size_t i = 0; i < gb.size(); ++i) dst[i] += gb[i];
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::deconv3d(Id x, Id w, Id b) {
    const Tensor<T>&xv = tensor(x), &wv = tensor(w), &bv = tensor(b);
    require(xv.shape.size() == 5, "deconv3d: input must be [N,C,L,W,H]");
    require(wv.shape.size() == 5 && wv.shape[0] == xv.shape[1] && wv.shape[2] == 2,
            "deconv3d: weight must be [Ci,Co,2,2,2] with Ci matching input");
    require(bv.shape.size() == 1 && bv.shape[0] == wv.shape[1], "deconv3d: bias mismatch");
    kernels::Deconv3dDims d;
    d.n = xv.shape[0];
    d.ci = xv.shape[1];
    d.co = wv.shape[1];
    d.l = xv.shape[2];
    d.w = xv.shape[3];
    d.h = xv.shape[4];

    bool needs = nodes_[x].needs || nodes_[w].needs || nodes_[b].needs;
    Id out = result_node({d.n, d.co, 2 * d.l, 2 * d.w, 2 * d.h}, needs);
    kernels::deconv3d_forward(xv.v.data(), wv.v.data(), bv.v.data(), tensor(out).v.data(), d);
    if (needs) {
        bool xn = nodes_[x].needs, wn = nodes_[w].needs, bn = nodes_[b].needs;
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            if (xn)
                kernels::deconv3d_backward_input(go.data(), tp.tensor(w).v.data(),
                                                 tp.tensor(x).g.data(), d);
            if (wn || bn) {
                std::vector<T> gw(tp.tensor(w).v.size(), T(0));
                std::vector<T> gb(tp.tensor(b).v.size(), T(0));
                kernels::deconv3d_backward_weights(tp.tensor(x).v.data(), go.data(), gw.data(),
                                                   gb.data(), d);
                if (wn) {
                    auto& dst = tp.tensor(w).g;
                    for (std::size_t i = 0; i < gw.size(); ++i) dst[i] += gw[i];
                }
                if (bn) {
                    auto& dst = tp.tensor(b).g;
                    for (std::size_t i = 0; i < gb.size(); ++i) dst[i] += gb[i];
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::dense(Id x, Id w, Id b) {
    const Tensor<T>&xv = tensor(x), &wv = tensor(w), &bv = tensor(b);
    require(xv.shape.size() == 2, "dense: input must be [N,F]");
    require(wv.shape.size() == 2 && wv.shape[0] == xv.shape[1], "dense: weight mismatch");
    require(bv.shape.size() == 1 && bv.shape[0] == wv.shape[1], "dense: bias mismatch");
    const std::int64_t n = xv.shape[0], f = xv.shape[1], m = wv.shape[1];

    bool needs = nodes_[x].needs || nodes_[w].needs || nodes_[b].needs;
    Id out = result_node({n, m}, needs);
    auto& ov = tensor(out).v;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < m; ++j) {
            T acc = bv.v[j];
            for (std::int64_t q = 0; q < f; ++q) acc += xv.v[i * f + q] * wv.v[q * m + j];
            ov[i * m + j] = acc;
        }
    if (needs) {
        bool xn = nodes_[x].needs, wn = nodes_[w].needs, bn = nodes_[b].needs;
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            const auto& xvv = tp.tensor(x).v;
            const auto& wvv = tp.tensor(w).v;
            if (xn) {
                auto& gx = tp.tensor(x).g;
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t q = 0; q < f; ++q) {
                        T acc = T(0);
                        for (std::int64_t j = 0; j < m; ++j)
                            acc += go[i * m + j] * wvv[q * m + j];
                        gx[i * f + q] += acc;
                    }
            }
            if (wn) {
                auto& gw = tp.tensor(w).g;
                for (std::int64_t q = 0; q < f; ++q)
                    for (std::int64_t j = 0; j < m; ++j) {
                        T acc = T(0);
                        for (std::int64_t i = 0; i < n; ++i)
                            acc += xvv[i * f + q] * go[i * m + j];
                        gw[q * m + j] += acc;
                    }
            }
            if (bn) {
                auto& gb = tp.tensor(b).g;
                for (std::int64_t j = 0; j < m; ++j) {
                    T acc = T(0);
                    for (std::int64_t i = 0; i < n; ++i) acc += go[i * m + j];
                    gb[j] += acc;
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::prelu(Id x, Id slope) {
    const Tensor<T>&xv = tensor(x), &sv = tensor(slope);
    require(xv.shape.size() >= 2, "prelu: input must have a channel dim");
    require(sv.shape.size() == 1 && sv.shape[0] == xv.shape[1],
            "prelu: slope count must match channels");
    const std::int64_t n = xv.shape[0], c = xv.shape[1];
    std::int64_t spatial = 1;
    for (std::size_t i = 2; i < xv.shape.size(); ++i) spatial *= xv.shape[i];

    bool needs = nodes_[x].needs || nodes_[slope].needs;
    Id out = result_node(xv.shape, needs);
    auto& ov = tensor(out).v;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T a = sv.v[ch];
            const T* src = xv.v.data() + (i * c + ch) * spatial;
            T* dst = ov.data() + (i * c + ch) * spatial;
            for (std::int64_t s = 0; s < spatial; ++s)
                dst[s] = src[s] > T(0) ? src[s] : a * src[s];
        }
    if (needs) {
        bool xn = nodes_[x].needs, sn = nodes_[slope].needs;
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            const auto& xvv = tp.tensor(x).v;
            const auto& svv = tp.tensor(slope).v;
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const std::int64_t base = (i * c + ch) * spatial;
                    if (xn) {
                        auto& gx = tp.tensor(x).g;
                        for (std::int64_t s = 0; s < spatial; ++s)
                            gx[base + s] +=
                                xvv[base + s] > T(0) ? go[base + s] : svv[ch] * go[base + s];
                    }
                    if (sn) {
                        T acc = T(0);
                        for (std::int64_t s = 0; s < spatial; ++s)
                            if (xvv[base + s] <= T(0)) acc += xvv[base + s] * go[base + s];
                        tp.tensor(slope).g[ch] += acc;
                    }
                }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::sigmoid(Id x) {
    const Tensor<T>& xv = tensor(x);
    bool needs = nodes_[x].needs;
    Id out = result_node(xv.shape, needs);
    auto& ov = tensor(out).v;
    for (std::size_t i = 0; i < xv.v.size(); ++i)
        ov[i] = T(1) / (T(1) + std::exp(-xv.v[i]));
    if (needs) {
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& o = tp.tensor(out).v;
            const auto& go = tp.tensor(out).g;
            auto& gx = tp.tensor(x).g;
            for (std::size_t i = 0; i < o.size(); ++i)
                gx[i] += o[i] * (T(1) - o[i]) * go[i];
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::dropout(Id x, double keep_prob, std::uint64_t seed,
                                      bool training) {
    require(keep_prob > 0.0 && keep_prob <= 1.0, "dropout: keep_prob must be in (0,1]");
    const Tensor<T>& xv = tensor(x);
    bool needs = nodes_[x].needs;
    Id out = result_node(xv.shape, needs);
    auto& ov = tensor(out).v;
    if (!training || keep_prob == 1.0) {
        ov = xv.v;
        if (needs) {
            nodes_[out].bwd = [=](Tape& tp) {
                const auto& go = tp.tensor(out).g;
                auto& gx = tp.tensor(x).g;
                for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
            };
        }
        return out;
    }
    auto mask = std::make_shared<std::vector<std::uint8_t>>(xv.v.size());
    Rng rng(seed);
    const T inv = T(1.0 / keep_prob);
    for (std::size_t i = 0; i < xv.v.size(); ++i) {
        (*mask)[i] = rng.bernoulli(keep_prob) ? 1 : 0;
        ov[i] = (*mask)[i] ? xv.v[i] * inv : T(0);
    }
    if (needs) {
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            auto& gx = tp.tensor(x).g;
            for (std::size_t i = 0; i < go.size(); ++i)
                if ((*mask)[i]) gx[i] += go[i] * inv;
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::flatten(Id x) {
    const Tensor<T>& xv = tensor(x);
    require(xv.shape.size() >= 2, "flatten: input must have a batch dim");
    const std::int64_t n = xv.shape[0];
    const std::int64_t rest = xv.count() / n;
    bool needs = nodes_[x].needs;
    Id out = result_node({n, rest}, needs);
    tensor(out).v = xv.v;
    if (needs) {
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            auto& gx = tp.tensor(x).g;
            for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::concat_channels(Id a, Id b) {
    const Tensor<T>&av = tensor(a), &bv = tensor(b);
    require(av.shape.size() == 5 && bv.shape.size() == 5, "concat: inputs must be 5-d");
    require(av.shape[0] == bv.shape[0] && av.shape[2] == bv.shape[2] &&
                av.shape[3] == bv.shape[3] && av.shape[4] == bv.shape[4],
            "concat: spatial/batch dims must match");
    const std::int64_t n = av.shape[0], ca = av.shape[1], cb = bv.shape[1];
    const std::int64_t vol = av.shape[2] * av.shape[3] * av.shape[4];
    bool needs = nodes_[a].needs || nodes_[b].needs;
    Id out = result_node({n, ca + cb, av.shape[2], av.shape[3], av.shape[4]}, needs);
    auto& ov = tensor(out).v;
    for (std::int64_t i = 0; i < n; ++i) {
        std::memcpy(ov.data() + i * (ca + cb) * vol, av.v.data() + i * ca * vol,
                    sizeof(T) * ca * vol);
        std::memcpy(ov.data() + (i * (ca + cb) + ca) * vol, bv.v.data() + i * cb * vol,
                    sizeof(T) * cb * vol);
    }
    if (needs) {
        bool an = nodes_[a].needs, bn = nodes_[b].needs;
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            for (std::int64_t i = 0; i < n; ++i) {
                if (an) {
                    auto& ga = tp.tensor(a).g;
                    const T* src = go.data() + i * (ca + cb) * vol;
                    for (std::int64_t j = 0; j < ca * vol; ++j) ga[i * ca * vol + j] += src[j];
                }
                if (bn) {
                    auto& gb = tp.tensor(b).g;
                    const T* src = go.data() + (i * (ca + cb) + ca) * vol;
                    for (std::int64_t j = 0; j < cb * vol; ++j) gb[i * cb * vol + j] += src[j];
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::add(Id a, Id b) {
    const Tensor<T>&av = tensor(a), &bv = tensor(b);
    require(av.shape == bv.shape, "add: shapes must match");
    bool needs = nodes_[a].needs || nodes_[b].needs;
    Id out = result_node(av.shape, needs);
    auto& ov = tensor(out).v;
    for (std::size_t i = 0; i < av.v.size(); ++i) ov[i] = av.v[i] + bv.v[i];
    if (needs) {
        bool an = nodes_[a].needs, bn = nodes_[b].needs;
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            if (an) {
                auto& ga = tp.tensor(a).g;
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (bn) {
                auto& gb = tp.tensor(b).g;
                for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::scale(Id a, T k) {
    const Tensor<T>& av = tensor(a);
    bool needs = nodes_[a].needs;
    Id out = result_node(av.shape, needs);
    auto& ov = tensor(out).v;
    for (std::size_t i = 0; i < av.v.size(); ++i) ov[i] = k * av.v[i];
    if (needs) {
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            auto& ga = tp.tensor(a).g;
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += k * go[i];
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::bce_with_logits_sum(Id logits, const std::vector<T>& target) {
    const Tensor<T>& zv = tensor(logits);
    require(zv.v.size() == target.size(), "bce: logits and target sizes differ");
    for (std::size_t i = 0; i < zv.v.size(); ++i)
        require(std::isfinite(static_cast<double>(zv.v[i])),
                "bce: non-finite logit at index " + std::to_string(i));
    bool needs = nodes_[logits].needs;
    Id out = result_node({1}, needs);
    T acc = T(0);
    for (std::size_t i = 0; i < zv.v.size(); ++i) {
        const T z = zv.v[i], y = target[i];
        if (z >= T(0))
            acc += z - z * y + std::log1p(std::exp(-z));
        else
            acc += -z * y + std::log1p(std::exp(z));
    }
    tensor(out).v[0] = acc;
    if (needs) {
        auto tgt = std::make_shared<std::vector<T>>(target);
        nodes_[out].bwd = [=](Tape& tp) {
            const T go = tp.tensor(out).g[0];
            const auto& z = tp.tensor(logits).v;
            auto& gz = tp.tensor(logits).g;
            for (std::size_t i = 0; i < z.size(); ++i) {
                const T s = T(1) / (T(1) + std::exp(-z[i]));
                gz[i] += (s - (*tgt)[i]) * go;
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::l2_sum(const std::vector<Id>& params) {
    bool needs = false;
    for (Id p : params) needs = needs || nodes_[p].needs;
    Id out = result_node({1}, needs);
    T acc = T(0);
    for (Id p : params)
        for (const T w : tensor(p).v) acc += w * w;
    tensor(out).v[0] = acc;
    if (needs) {
        auto ids = std::make_shared<std::vector<Id>>(params);
        nodes_[out].bwd = [=](Tape& tp) {
            const T go = tp.tensor(out).g[0];
            for (Id p : *ids) {
                if (!tp.nodes_[p].needs) continue;
                const auto& w = tp.tensor(p).v;
                auto& gw = tp.tensor(p).g;
                for (std::size_t i = 0; i < w.size(); ++i) gw[i] += T(2) * w[i] * go;
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::weighted_sum(Id x, const std::vector<T>& weights) {
    const Tensor<T>& xv = tensor(x);
    require(xv.v.size() == weights.size(), "weighted_sum: size mismatch");
    bool needs = nodes_[x].needs;
    Id out = result_node({1}, needs);
    T acc = T(0);
    for (std::size_t i = 0; i < weights.size(); ++i) acc += xv.v[i] * weights[i];
    tensor(out).v[0] = acc;
    if (needs) {
        auto w = std::make_shared<std::vector<T>>(weights);
        nodes_[out].bwd = [=](Tape& tp) {
            const T go = tp.tensor(out).g[0];
            auto& gx = tp.tensor(x).g;
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += (*w)[i] * go;
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::affine_grid(Id params, std::int64_t l, std::int64_t w,
                                          std::int64_t h) {
    const Tensor<T>& pv = tensor(params);
    require(pv.shape.size() == 2 && pv.shape[1] == 12, "affine_grid: params must be [N,12]");
    const std::int64_t n = pv.shape[0], vol = l * w * h;
    bool needs = nodes_[params].needs;
    Id out = result_node({n, 3, l, w, h}, needs);
    auto& ov = tensor(out).v;

    auto norm = [](std::int64_t i, std::int64_t dim) {
        return dim > 1 ? T(2) * T(i) / T(dim - 1) - T(1) : T(0);
    };
    for (std::int64_t bi = 0; bi < n; ++bi) {
        const T* p = pv.v.data() + bi * 12;
        T* g = ov.data() + bi * 3 * vol;
        std::int64_t i = 0;
        for (std::int64_t ix = 0; ix < l; ++ix)
            for (std::int64_t iy = 0; iy < w; ++iy)
                for (std::int64_t iz = 0; iz < h; ++iz, ++i) {
                    const T tx = norm(ix, l), ty = norm(iy, w), tz = norm(iz, h);
                    for (int r = 0; r < 3; ++r)
                        g[r * vol + i] =
                            p[r * 4 + 0] * tx + p[r * 4 + 1] * ty + p[r * 4 + 2] * tz +
                            p[r * 4 + 3];
                }
    }
    if (needs) {
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            auto& gp = tp.tensor(params).g;
            auto normT = [](std::int64_t i, std::int64_t dim) {
                return dim > 1 ? T(2) * T(i) / T(dim - 1) - T(1) : T(0);
            };
            for (std::int64_t bi = 0; bi < n; ++bi) {
                const T* g = go.data() + bi * 3 * vol;
                T* dp = gp.data() + bi * 12;
                std::int64_t i = 0;
                for (std::int64_t ix = 0; ix < l; ++ix)
                    for (std::int64_t iy = 0; iy < w; ++iy)
                        for (std::int64_t iz = 0; iz < h; ++iz, ++i) {
                            const T t[4] = {normT(ix, l), normT(iy, w), normT(iz, h), T(1)};
                            for (int r = 0; r < 3; ++r) {
                                const T gv = g[r * vol + i];
                                for (int j = 0; j < 4; ++j) dp[r * 4 + j] += gv * t[j];
                            }
                        }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::grid_sample(Id x, Id grid) {
    const Tensor<T>&xv = tensor(x), &gv = tensor(grid);
    require(xv.shape.size() == 5, "grid_sample: input must be [N,C,L,W,H]");
    require(gv.shape.size() == 5 && gv.shape[1] == 3, "grid_sample: grid must be [N,3,L,W,H]");
    require(gv.shape[0] == xv.shape[0], "grid_sample: batch mismatch");
    const std::int64_t n = xv.shape[0], c = xv.shape[1];
    const std::int64_t ls = xv.shape[2], ws = xv.shape[3], hs = xv.shape[4];
    const std::int64_t lo = gv.shape[2], wo = gv.shape[3], ho = gv.shape[4];
    const std::int64_t vol = lo * wo * ho, svol = ls * ws * hs;

    // normalized [-1,1] -> voxel coordinates of the source volume
    const T cx = T(ls - 1) / T(2), cy = T(ws - 1) / T(2), cz = T(hs - 1) / T(2);
    auto to_voxel = [](T s, T half) {
        T v = (s + T(1)) * half;
        return snap_coord(v);
    };

    bool needs = nodes_[x].needs || nodes_[grid].needs;
    Id out = result_node({n, c, lo, wo, ho}, needs);
    auto& ov = tensor(out).v;

    for (std::int64_t bi = 0; bi < n; ++bi) {
        const T* gsrc = gv.v.data() + bi * 3 * vol;
        for (std::int64_t i = 0; i < vol; ++i) {
            const T xs = to_voxel(gsrc[i], cx);
            const T ys = to_voxel(gsrc[vol + i], cy);
            const T zs = to_voxel(gsrc[2 * vol + i], cz);
            if (xs <= T(-1) || xs >= T(ls) || ys <= T(-1) || ys >= T(ws) || zs <= T(-1) ||
                zs >= T(hs))
                continue;  // all kernel weights vanish
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(xs));
            const std::int64_t y0 = static_cast<std::int64_t>(std::floor(ys));
            const std::int64_t z0 = static_cast<std::int64_t>(std::floor(zs));
            const T fx = xs - T(x0), fy = ys - T(y0), fz = zs - T(z0);
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T* src = xv.v.data() + (bi * c + ch) * svol;
                T acc = T(0);
                for (int dx = 0; dx < 2; ++dx) {
                    const std::int64_t xi = x0 + dx;
                    if (xi < 0 || xi >= ls) continue;
                    const T wx = dx ? fx : T(1) - fx;
                    for (int dy = 0; dy < 2; ++dy) {
                        const std::int64_t yi = y0 + dy;
                        if (yi < 0 || yi >= ws) continue;
                        const T wy = dy ? fy : T(1) - fy;
                        for (int dz = 0; dz < 2; ++dz) {
                            const std::int64_t zi = z0 + dz;
                            if (zi < 0 || zi >= hs) continue;
                            const T wz = dz ? fz : T(1) - fz;
                            acc += src[(xi * ws + yi) * hs + zi] * wx * wy * wz;
                        }
                    }
                }
                ov[(bi * c + ch) * vol + i] = acc;
            }
        }
    }

    if (needs) {
        bool xn = nodes_[x].needs, gn = nodes_[grid].needs;
        nodes_[out].bwd = [=](Tape& tp) {
            const auto& go = tp.tensor(out).g;
            const auto& xvv = tp.tensor(x).v;
            const auto& gvv = tp.tensor(grid).v;
            for (std::int64_t bi = 0; bi < n; ++bi) {
                const T* gsrc = gvv.data() + bi * 3 * vol;
                for (std::int64_t i = 0; i < vol; ++i) {
                    const T xs = to_voxel(gsrc[i], cx);
                    const T ys = to_voxel(gsrc[vol + i], cy);
                    const T zs = to_voxel(gsrc[2 * vol + i], cz);
                    if (xs <= T(-1) || xs >= T(ls) || ys <= T(-1) || ys >= T(ws) ||
                        zs <= T(-1) || zs >= T(hs))
                        continue;
                    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(xs));
                    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(ys));
                    const std::int64_t z0 = static_cast<std::int64_t>(std::floor(zs));
                    const T fx = xs - T(x0), fy = ys - T(y0), fz = zs - T(z0);
                    T dxs = T(0), dys = T(0), dzs = T(0);
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const T gout = go[(bi * c + ch) * vol + i];
                        if (gout == T(0) && !gn) continue;
                        const T* src = xvv.data() + (bi * c + ch) * svol;
                        T* gx = xn ? tp.tensor(x).g.data() + (bi * c + ch) * svol : nullptr;
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::int64_t xi = x0 + dx;
                            if (xi < 0 || xi >= ls) continue;
                            const T wx = dx ? fx : T(1) - fx;
                            const T dwx = dx ? T(1) : T(-1);
                            for (int dy = 0; dy < 2; ++dy) {
                                const std::int64_t yi = y0 + dy;
                                if (yi < 0 || yi >= ws) continue;
                                const T wy = dy ? fy : T(1) - fy;
                                const T dwy = dy ? T(1) : T(-1);
                                for (int dz = 0; dz < 2; ++dz) {
                                    const std::int64_t zi = z0 + dz;
                                    if (zi < 0 || zi >= hs) continue;
                                    const T wz = dz ? fz : T(1) - fz;
                                    const T dwz = dz ? T(1) : T(-1);
                                    const std::int64_t si = (xi * ws + yi) * hs + zi;
                                    if (xn) gx[si] += wx * wy * wz * gout;
                                    if (gn) {
                                        const T v = src[si];
                                        dxs += v * dwx * wy * wz * gout;
                                        dys += v * wx * dwy * wz * gout;
                                        dzs += v * wx * wy * dwz * gout;
                                    }
                                }
                            }
                        }
                    }
                    if (gn) {
                        auto& ggrid = tp.tensor(grid).g;
                        ggrid[bi * 3 * vol + i] += dxs * cx;
                        ggrid[bi * 3 * vol + vol + i] += dys * cy;
                        ggrid[bi * 3 * vol + 2 * vol + i] += dzs * cz;
                    }
                }
            }
        };
    }
    return out;
}

template <typename T>
void Tape<T>::backward(Id loss) {
    require(tensor(loss).count() == 1, "backward: loss must be scalar");
    require(nodes_[loss].needs, "backward: loss does not depend on any trainable input");
    tensor(loss).ensure_grad();
    tensor(loss).g[0] = T(1);
    for (std::int64_t i = static_cast<std::int64_t>(nodes_.size()) - 1; i >= 0; --i)
        if (nodes_[i].needs && nodes_[i].bwd) nodes_[i].bwd(*this);
}

template class Tape<float>;
template class Tape<double>;

}  // namespace spectlv
