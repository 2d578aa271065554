#include "spectlv/stn.hpp"

#include <cmath>
#include <stdexcept>

#include "spectlv/common.hpp"

namespace spectlv {

AffineParams AffineParams::translation(double tx, double ty, double tz) {
    AffineParams p;
    p.lambda[3] = tx;
    p.lambda[7] = ty;
    p.lambda[11] = tz;
    return p;
}

AffineParams AffineParams::rigid_z(double deg, double tx, double ty, double tz, double scale) {
    const double c = std::cos(deg * M_PI / 180.0), s = std::sin(deg * M_PI / 180.0);
    AffineParams p;
    // rotation acts in the (x, y) plane of the normalized frame
    p.lambda = {scale * c, -scale * s, 0, tx, scale * s, scale * c, 0, ty, 0, 0, scale, tz};
    return p;
}

AffineParams AffineParams::inverse() const {
    const auto& m = lambda;
    const double det = m[0] * (m[5] * m[10] - m[6] * m[9]) -
                       m[1] * (m[4] * m[10] - m[6] * m[8]) +
                       m[2] * (m[4] * m[9] - m[5] * m[8]);
    if (std::abs(det) < 1e-12) throw std::runtime_error("AffineParams: singular matrix");
    const double inv[9] = {
        (m[5] * m[10] - m[6] * m[9]) / det,  (m[2] * m[9] - m[1] * m[10]) / det,
        (m[1] * m[6] - m[2] * m[5]) / det,   (m[6] * m[8] - m[4] * m[10]) / det,
        (m[0] * m[10] - m[2] * m[8]) / det,  (m[2] * m[4] - m[0] * m[6]) / det,
        (m[4] * m[9] - m[5] * m[8]) / det,   (m[1] * m[8] - m[0] * m[9]) / det,
        (m[0] * m[5] - m[1] * m[4]) / det};
    AffineParams out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out.lambda[r * 4 + c] = inv[r * 3 + c];
        out.lambda[r * 4 + 3] =
            -(inv[r * 3] * m[3] + inv[r * 3 + 1] * m[7] + inv[r * 3 + 2] * m[11]);
    }
    return out;
}

SamplingGrid grid_generate(const AffineParams& params, Dims dims) {
    SamplingGrid grid;
    grid.dims = dims;
    grid.source.resize(static_cast<std::size_t>(dims.count()));
    grid.target.resize(static_cast<std::size_t>(dims.count()));
    auto norm = [](int i, int dim) {
        return dim > 1 ? 2.0 * i / (dim - 1) - 1.0 : 0.0;
    };
    const auto& m = params.lambda;
    std::size_t i = 0;
    for (int x = 0; x < dims.l; ++x)
        for (int y = 0; y < dims.w; ++y)
            for (int z = 0; z < dims.h; ++z, ++i) {
                const double t[3] = {norm(x, dims.l), norm(y, dims.w), norm(z, dims.h)};
                grid.target[i] = {t[0], t[1], t[2]};
                for (int r = 0; r < 3; ++r)
                    grid.source[i][r] =
                        m[r * 4] * t[0] + m[r * 4 + 1] * t[1] + m[r * 4 + 2] * t[2] +
                        m[r * 4 + 3];
            }
    return grid;
}

Volume3D sample(const Volume3D& input, const SamplingGrid& grid) {
    // Route through the tape sampler so the free function and the training
    // path share one definition.
    Tape<double> tape;
    std::vector<double> xs(input.data.begin(), input.data.end());
    Tape<double>::Id x =
        tape.constant({1, 1, input.dims.l, input.dims.w, input.dims.h}, std::move(xs));
    std::vector<double> coords(static_cast<std::size_t>(3 * grid.count()));
    const std::int64_t vol = grid.count();
    for (std::int64_t i = 0; i < vol; ++i)
        for (int r = 0; r < 3; ++r) coords[r * vol + i] = grid.source[i][r];
    Tape<double>::Id g =
        tape.constant({1, 3, grid.dims.l, grid.dims.w, grid.dims.h}, std::move(coords));
    Tape<double>::Id out = tape.grid_sample(x, g);
    Volume3D result(grid.dims, input.voxel_mm);
    const auto& ov = tape.val(out).v;
    for (std::size_t i = 0; i < ov.size(); ++i) result.data[i] = static_cast<float>(ov[i]);
    return result;
}

Volume3D warp(const Volume3D& input, const AffineParams& params) {
    return sample(input, grid_generate(params, input.dims));
}

StnConfig StnConfig::desk() {
    StnConfig cfg;
    cfg.widths = {4, 8, 8, 16, 16, 16, 16};
    return cfg;
}

Tensor<float>* LocalizationNet::add_param(const std::string& name, TensorShape shape) {
    auto t = std::make_unique<Tensor<float>>(std::move(shape));
    t->name = name;
    t->requires_grad = true;
    params_.push_back(std::move(t));
    return params_.back().get();
}

LocalizationNet::LocalizationNet(StnConfig cfg, Dims input_dims, std::uint64_t seed)
    : cfg_(std::move(cfg)), input_dims_(input_dims) {
    if (cfg_.widths.size() != 7)
        throw std::runtime_error("LocalizationNet: exactly 7 convolutional layers");
    Rng rng(seed);
    const int k = cfg_.kernel;
    int ci = cfg_.in_channels;
    Dims d = input_dims_;
    for (int i = 0; i < 7; ++i) {
        const int co = cfg_.widths[i];
        Tensor<float>* w = add_param("loc" + std::to_string(i) + ".w", {co, ci, k, k, k});
        for (auto& v : w->v)
            v = static_cast<float>(rng.normal(0.0, std::sqrt(2.0 / (ci * k * k * k))));
        add_param("loc" + std::to_string(i) + ".b", {co});
        Tensor<float>* a = add_param("loc" + std::to_string(i) + ".a", {co});
        for (auto& v : a->v) v = 0.25f;
        if (i % 2 == 1) d = {(d.l + 1) / 2, (d.w + 1) / 2, (d.h + 1) / 2};  // layers 2/4/6
        ci = co;
    }
    flat_dim_ = static_cast<std::int64_t>(cfg_.widths.back()) * d.count();
    // zero weights + identity bias: the untrained net emits the identity map
    add_param("fc.w", {flat_dim_, 12});
    Tensor<float>* b = add_param("fc.b", {12});
    const AffineParams ident;
    for (int i = 0; i < 12; ++i) b->v[i] = static_cast<float>(ident.lambda[i]);
}

Tape<float>::Id LocalizationNet::forward(Tape<float>& tape, Tape<float>::Id input) {
    using Id = Tape<float>::Id;
    const auto& shape = tape.val(input).shape;
    if (shape.size() != 5 || shape[1] != cfg_.in_channels || shape[2] != input_dims_.l ||
        shape[3] != input_dims_.w || shape[4] != input_dims_.h)
        throw std::runtime_error("LocalizationNet: input shape mismatch");
    const int k = cfg_.kernel;
    const int pad = (k - 1) / 2;
    std::size_t pi = 0;
    Id x = input;
    for (int i = 0; i < 7; ++i) {
        Id w = tape.leaf(params_[pi].get());
        Id b = tape.leaf(params_[pi + 1].get());
        Id a = tape.leaf(params_[pi + 2].get());
        pi += 3;
        const int stride = i % 2 == 1 ? 2 : 1;  // stride 2 at layers 2/4/6
        x = tape.prelu(tape.conv3d(x, w, b, stride, pad), a);
    }
    x = tape.flatten(x);
    Id w = tape.leaf(params_[pi].get());
    Id b = tape.leaf(params_[pi + 1].get());
    return tape.dense(x, w, b);
}

AffineParams LocalizationNet::predict(const Volume3D& prob_map, const Mask3D& prior) {
    Tensor<float> batch({1, 2, input_dims_.l, input_dims_.w, input_dims_.h});
    if (!(prob_map.dims == input_dims_) || !(prior.dims == input_dims_))
        throw std::runtime_error("LocalizationNet: input dims mismatch");
    const std::int64_t vol = input_dims_.count();
    std::copy(prob_map.data.begin(), prob_map.data.end(), batch.v.begin());
    for (std::int64_t i = 0; i < vol; ++i)
        batch.v[vol + i] = static_cast<float>(prior.data[i]);

    bool was = params_.front()->requires_grad;
    set_trainable(false);
    Tape<float> tape;
    Tape<float>::Id out = forward(tape, tape.leaf(&batch));
    AffineParams p;
    for (int i = 0; i < 12; ++i) p.lambda[i] = tape.val(out).v[i];
    set_trainable(was);
    return p;
}

std::vector<Tensor<float>*> LocalizationNet::parameters() {
    std::vector<Tensor<float>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::int64_t LocalizationNet::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p->count();
    return n;
}

void LocalizationNet::set_trainable(bool trainable) {
    for (auto& p : params_) p->requires_grad = trainable;
}

}  // namespace spectlv
