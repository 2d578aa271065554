#pragma once

#include <array>
#include <vector>

#include "spectlv/volume.hpp"

namespace spectlv {

// One long-axis slice (plane of constant x): rows run along y, cols along z.
struct Slice2D {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Slice2D() = default;
    Slice2D(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    double max_value() const;
};

Slice2D extract_slice(const Volume3D& vol, int x);
Slice2D gaussian_smooth(const Slice2D& s, double sigma);
double bilinear(const Slice2D& s, double r, double c);  // zero outside

struct PolarSlice {
    double center_row = 0.0, center_col = 0.0;
    int n_angles = 64;
    int n_radii = 16;
    std::vector<double> samples;  // [angle][radius], radius step = 1 voxel

    double at(int a, int r) const { return samples[static_cast<std::size_t>(a) * n_radii + r]; }
};

// samples[t][r] = bilinear(slice, center + r*(cos t, sin t)); reads outside
// the slice are zero. Throws if the center lies outside the slice.
PolarSlice cartesian_to_polar(const Slice2D& slice, double center_row, double center_col,
                              int n_angles, int n_radii);

// Minimum-cost closed path over the cyclic angle axis subject to
// |r(t+1) - r(t)| <= smooth_bound (wrap included). Exact: fixes r(0) to each
// candidate radius and runs a linear DP. Throws on non-finite costs.
std::vector<int> dp_boundary(const PolarSlice& polar, const std::vector<double>& cost,
                             int smooth_bound);

struct ContourPolar {
    std::vector<double> radii_endo;  // per angle, voxels (sub-voxel refined)
    std::vector<double> radii_epi;
    std::vector<bool> valve;  // angles inside the basal opening
    double center_row = 0.0, center_col = 0.0;
    bool empty = true;
};

struct DpPriorConfig {
    int n_angles = 64;
    int n_radii = 16;
    double sigma = 1.0;            // slice smoothing before gradients
    int smooth_bound = 1;          // radius bins per angle step
    double valve_count_frac = 0.4; // of slice max, mean count along the wall
    double valve_arc_deg = 60.0;   // minimum contiguous arc to count as valve
    double slice_activity_frac = 0.05;  // of volume max; below: slice skipped
};

// Endo/epi boundaries of one slice: DP on radial-gradient costs, epi
// constrained outside endo, valve arc detected from wall counts.
ContourPolar trace_slice(const Slice2D& slice, const DpPriorConfig& cfg, double volume_max);

// Binary priors for a 32^3 volume; slices along x. Throws on an all-zero
// volume. Output order: endo, myo, epi. Containment holds by construction.
std::array<ShapePrior, 3> generate_prior(const Volume3D& vol, const DpPriorConfig& cfg = {});

}  // namespace spectlv
