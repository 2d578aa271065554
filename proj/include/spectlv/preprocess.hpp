#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectlv/volume.hpp"

namespace spectlv {

// Crops a 32^3 window centered on the LV (intensity centroid of the
// upper-half-max region), with the long axis along `long_axis` moved to
// axis 2. Throws if the input is smaller than 32 in any dimension or has no
// centroid (all zero).
Volume3D to_long_axis(const Volume3D& vol, int long_axis = 2);

struct AugmentParams {
    double scale = 1.0;       // about the volume center
    bool flip[3] = {false, false, false};
    double rot_deg = 0.0;     // about the long axis (axis 2)
};

AugmentParams draw_augment_params(std::uint64_t seed);

// One spatial transform applied to the volume (trilinear) and all masks
// (nearest neighbor, stays binary). Output keeps the input dims, zero padded.
void augment_with_params(Volume3D& vol, std::vector<Mask3D*>& masks, const AugmentParams& p);

void augment(Volume3D& vol, std::vector<Mask3D*>& masks, std::uint64_t seed);

struct FoldSplit {
    std::vector<std::string> train_ids, test_ids;  // patient ids
};

// k disjoint test partitions over patients, stratified by severity; per-fold
// class counts stay within one patient of the exact proportion and fold sizes
// are balanced. Requires k >= 2 and every present class to have >= k members.
std::vector<FoldSplit> stratified_folds(const DatasetManifest& manifest, int k,
                                        std::uint64_t seed);

}  // namespace spectlv
