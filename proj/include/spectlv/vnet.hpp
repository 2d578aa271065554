#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "spectlv/tape.hpp"
#include "spectlv/tensor.hpp"
#include "spectlv/volume.hpp"

namespace spectlv {

// Encoder/decoder segmentation net: per stage, convs of `kernel`^3 stride 1
// keep the resolution while 2^3 stride-2 convs halve it; the decoder mirrors
// with transposed convs and skip concatenations; dropout sits before the
// final conv. Defaults land within 10% of 7.4M parameters.
struct VNetConfig {
    int in_channels = 2;  // image + shape prior; 1 for the single-channel variant
    std::vector<int> widths = {16, 32, 64, 128};
    int convs_per_stage = 2;
    int kernel = 5;
    double dropout_keep = 0.8;

    // reduced preset used by tests and the desk-scale pipeline runs
    static VNetConfig desk(int in_channels);
};

class VNet {
public:
    VNet(VNetConfig cfg, std::uint64_t seed);

    // input [N, in_channels, L, W, H] -> logits of the same spatial shape
    Tape<float>::Id forward(Tape<float>& tape, Tape<float>::Id input, bool training,
                            std::uint64_t dropout_seed);

    // convenience single-volume path: channels = {image} or {image, prior}
    Volume3D predict(const Volume3D& image, const Mask3D* prior);

    std::vector<Tensor<float>*> parameters();
    std::int64_t parameter_count() const;
    void set_trainable(bool trainable);
    const VNetConfig& config() const { return cfg_; }
    Tensor<float>& parameter(const std::string& name);  // for tests

private:
    VNetConfig cfg_;
    std::vector<std::unique_ptr<Tensor<float>>> params_;
    Tensor<float>* add_param(const std::string& name, TensorShape shape);
};

// Builds a [N, C, 32, 32, 32] batch tensor from per-sample channel lists.
Tensor<float> make_input_batch(const std::vector<const Volume3D*>& images,
                               const std::vector<const Mask3D*>& priors);

}  // namespace spectlv
