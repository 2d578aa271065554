#pragma once

#include <vector>

#include "spectlv/volume.hpp"

namespace spectlv {

// Dice coefficient 2|P and G| / (|P| + |G|). Probability inputs are binarized
// at `threshold`. Two empty masks agree perfectly (1.0); empty vs non-empty
// is 0.0.
double dsc(const Mask3D& pred, const Mask3D& gt);
double dsc(const Volume3D& prob, const Mask3D& gt, double threshold = 0.5);

Mask3D binarize(const Volume3D& prob, double threshold, Structure structure);

// Symmetric Hausdorff distance over foreground voxel centers, scaled to mm.
// Throws if either mask is empty.
double hausdorff_mm(const Mask3D& pred, const Mask3D& gt);

// signed percent deviation (measured - gt) / gt * 100; gt must be nonzero
double relative_error(double measured, double gt_value);

struct PearsonResult {
    double r = 0.0;
    double p_value = 1.0;
};

// Sample correlation with a two-sided P against Student-t(n-2). Requires
// n >= 3 and nonzero variance in both series.
PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct BlandAltman {
    double bias = 0.0;
    double lower_limit = 0.0;
    double upper_limit = 0.0;
    std::vector<double> means, diffs;  // per point
};

// diffs = xs - ys; limits at bias +/- 1.96 * sample std of the diffs
BlandAltman bland_altman(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace spectlv
