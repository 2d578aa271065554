#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "spectlv/tape.hpp"
#include "spectlv/tensor.hpp"
#include "spectlv/volume.hpp"

namespace spectlv {

// The 12 affine parameters: rows of the 3x4 matrix mapping target to source
// coordinates in the normalized [-1,1]^3 frame, row-major.
struct AffineParams {
    std::array<double, 12> lambda{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

    static AffineParams identity() { return {}; }
    static AffineParams translation(double tx, double ty, double tz);
    // rotation about the long axis (z) by `deg`, then translation; optional
    // uniform scale about the volume center
    static AffineParams rigid_z(double deg, double tx, double ty, double tz,
                                double scale = 1.0);
    AffineParams inverse() const;  // of the affine map (throws if singular)
};

// One source-coordinate triple (normalized frame) per target voxel, plus the
// matching target coordinates.
struct SamplingGrid {
    Dims dims;
    std::vector<std::array<double, 3>> source;  // per target voxel, x-major
    std::vector<std::array<double, 3>> target;

    std::int64_t count() const { return dims.count(); }
};

SamplingGrid grid_generate(const AffineParams& params, Dims dims);

// Trilinear sampling of `input` at grid.source (zero outside the volume).
Volume3D sample(const Volume3D& input, const SamplingGrid& grid);

// grid_generate followed by sample
Volume3D warp(const Volume3D& input, const AffineParams& params);

// Seven 3^3 convolutions (stride 2 at layers 2/4/6), flatten, one dense layer
// to 12 outputs. Final dense weights start at zero with the identity
// transform as bias, so an untrained net maps everything to itself.
struct StnConfig {
    int in_channels = 2;  // V-Net probability map + shape prior
    std::vector<int> widths = {16, 32, 48, 64, 96, 128, 128};
    int kernel = 3;

    static StnConfig desk();
};

class LocalizationNet {
public:
    LocalizationNet(StnConfig cfg, Dims input_dims, std::uint64_t seed);

    // input [N, in_channels, L, W, H] -> params [N, 12]
    Tape<float>::Id forward(Tape<float>& tape, Tape<float>::Id input);

    AffineParams predict(const Volume3D& prob_map, const Mask3D& prior);

    std::vector<Tensor<float>*> parameters();
    std::int64_t parameter_count() const;
    void set_trainable(bool trainable);
    const StnConfig& config() const { return cfg_; }

private:
    StnConfig cfg_;
    Dims input_dims_;
    std::int64_t flat_dim_ = 0;
    std::vector<std::unique_ptr<Tensor<float>>> params_;
    Tensor<float>* add_param(const std::string& name, TensorShape shape);
};

}  // namespace spectlv
