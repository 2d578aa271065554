#include "spectlv/vnet.hpp"

#include <cmath>
#include <stdexcept>

#include "spectlv/common.hpp"

namespace spectlv {

namespace {

void init_normal(Tensor<float>& t, double stddev, Rng& rng) {
    for (auto& v : t.v) v = static_cast<float>(rng.normal(0.0, stddev));
}

}  // namespace

VNetConfig VNetConfig::desk(int in_channels) {
    VNetConfig cfg;
    cfg.in_channels = in_channels;
    cfg.widths = {4, 8, 16};
    cfg.convs_per_stage = 1;
    cfg.kernel = 3;
    cfg.dropout_keep = 1.0;
    return cfg;
}

Tensor<float>* VNet::add_param(const std::string& name, TensorShape shape) {
    auto t = std::make_unique<Tensor<float>>(std::move(shape));
    t->name = name;
    t->requires_grad = true;
    params_.push_back(std::move(t));
    return params_.back().get();
}

VNet::VNet(VNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    if (cfg_.widths.empty()) throw std::runtime_error("VNet: widths must be non-empty");
    Rng rng(seed);
    const int k = cfg_.kernel;
    const int stages = static_cast<int>(cfg_.widths.size());

    auto add_conv = [&](const std::string& name, int ci, int co, int kk, bool act = true) {
        Tensor<float>* w = add_param(name + ".w", {co, ci, kk, kk, kk});
        init_normal(*w, std::sqrt(2.0 / (static_cast<double>(ci) * kk * kk * kk)), rng);
        add_param(name + ".b", {co});
        if (act) {
            Tensor<float>* a = add_param(name + ".a", {co});
            for (auto& v : a->v) v = 0.25f;
        }
    };
    auto add_deconv = [&](const std::string& name, int ci, int co) {
        Tensor<float>* w = add_param(name + ".w", {ci, co, 2, 2, 2});
        init_normal(*w, std::sqrt(2.0 / (static_cast<double>(ci) * 8)), rng);
        add_param(name + ".b", {co});
        Tensor<float>* a = add_param(name + ".a", {co});
        for (auto& v : a->v) v = 0.25f;
    };

    for (int s = 0; s < stages; ++s) {
        int ci = s == 0 ? cfg_.in_channels : cfg_.widths[s];
        for (int c = 0; c < cfg_.convs_per_stage; ++c) {
            add_conv("enc" + std::to_string(s) + ".conv" + std::to_string(c), ci,
                     cfg_.widths[s], k);
            ci = cfg_.widths[s];
        }
        if (s + 1 < stages)
            add_conv("down" + std::to_string(s), cfg_.widths[s], cfg_.widths[s + 1], 2);
    }
    for (int s = stages - 2; s >= 0; --s) {
        add_deconv("up" + std::to_string(s), cfg_.widths[s + 1], cfg_.widths[s]);
        int ci = 2 * cfg_.widths[s];  // skip concatenation
        for (int c = 0; c < cfg_.convs_per_stage; ++c) {
            add_conv("dec" + std::to_string(s) + ".conv" + std::to_string(c), ci,
                     cfg_.widths[s], k);
            ci = cfg_.widths[s];
        }
    }
    add_conv("head", cfg_.widths[0], 1, k, /*act=*/false);
}

Tape<float>::Id VNet::forward(Tape<float>& tape, Tape<float>::Id input, bool training,
                              std::uint64_t dropout_seed) {
    using Id = Tape<float>::Id;
    const int stages = static_cast<int>(cfg_.widths.size());
    const int pad = (cfg_.kernel - 1) / 2;
    std::size_t pi = 0;
    auto next3 = [&]() {
        Id w = tape.leaf(params_[pi].get());
        Id b = tape.leaf(params_[pi + 1].get());
        Id a = tape.leaf(params_[pi + 2].get());
        pi += 3;
        return std::array<Id, 3>{w, b, a};
    };

    std::vector<Id> skips;
    Id x = input;
    for (int s = 0; s < stages; ++s) {
        for (int c = 0; c < cfg_.convs_per_stage; ++c) {
            auto [w, b, a] = next3();
            x = tape.prelu(tape.conv3d(x, w, b, 1, pad), a);
        }
        if (s + 1 < stages) {
            skips.push_back(x);
            auto [w, b, a] = next3();
            x = tape.prelu(tape.conv3d(x, w, b, 2, 0), a);
        }
    }
    for (int s = stages - 2; s >= 0; --s) {
        auto [uw, ub, ua] = next3();
        x = tape.prelu(tape.deconv3d(x, uw, ub), ua);
        x = tape.concat_channels(x, skips[s]);
        for (int c = 0; c < cfg_.convs_per_stage; ++c) {
            auto [w, b, a] = next3();
            x = tape.prelu(tape.conv3d(x, w, b, 1, pad), a);
        }
    }
    x = tape.dropout(x, cfg_.dropout_keep, dropout_seed, training);
    // linear head: logits go to the loss or a sigmoid
    Id hw = tape.leaf(params_[pi].get());
    Id hb = tape.leaf(params_[pi + 1].get());
    pi += 2;
    x = tape.conv3d(x, hw, hb, 1, pad);
    if (pi != params_.size()) throw std::runtime_error("VNet: parameter walk out of sync");
    return x;
}

Volume3D VNet::predict(const Volume3D& image, const Mask3D* prior) {
    if (cfg_.in_channels == 2 && prior == nullptr)
        throw std::runtime_error("VNet: dual-channel config requires a shape prior");
    std::vector<const Volume3D*> imgs{&image};
    std::vector<const Mask3D*> priors;
    if (cfg_.in_channels == 2) priors.push_back(prior);
    Tensor<float> batch = make_input_batch(imgs, priors);

    bool was = params_.front()->requires_grad;
    set_trainable(false);
    Tape<float> tape;
    Tape<float>::Id in = tape.leaf(&batch);
    Tape<float>::Id prob = tape.sigmoid(forward(tape, in, false, 0));
    Volume3D out(image.dims, image.voxel_mm);
    const auto& v = tape.val(prob).v;
    std::copy(v.begin(), v.end(), out.data.begin());
    set_trainable(was);
    return out;
}

std::vector<Tensor<float>*> VNet::parameters() {
    std::vector<Tensor<float>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::int64_t VNet::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p->count();
    return n;
}

void VNet::set_trainable(bool trainable) {
    for (auto& p : params_) p->requires_grad = trainable;
}

Tensor<float>& VNet::parameter(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return *p;
    throw std::runtime_error("VNet: no parameter named " + name);
}

Tensor<float> make_input_batch(const std::vector<const Volume3D*>& images,
                               const std::vector<const Mask3D*>& priors) {
    if (images.empty()) throw std::runtime_error("make_input_batch: empty batch");
    const bool dual = !priors.empty();
    if (dual && priors.size() != images.size())
        throw std::runtime_error("make_input_batch: image/prior count mismatch");
    const Dims d = images[0]->dims;
    const std::int64_t n = static_cast<std::int64_t>(images.size());
    const std::int64_t c = dual ? 2 : 1;
    const std::int64_t vol = d.count();
    Tensor<float> t({n, c, d.l, d.w, d.h});
    for (std::int64_t i = 0; i < n; ++i) {
        if (!(images[i]->dims == d))
            throw std::runtime_error("make_input_batch: images must share dims");
        std::copy(images[i]->data.begin(), images[i]->data.end(),
                  t.v.begin() + i * c * vol);
        if (dual) {
            if (!(priors[i]->dims == d))
                throw std::runtime_error("make_input_batch: prior dims mismatch image dims");
            float* dst = t.v.data() + (i * c + 1) * vol;
            for (std::int64_t j = 0; j < vol; ++j)
                dst[j] = static_cast<float>(priors[i]->data[j]);
        }
    }
    return t;
}

}  // namespace spectlv
