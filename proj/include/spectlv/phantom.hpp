#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "spectlv/volume.hpp"

namespace spectlv {

// Truncated-ellipsoid LV: endo/epi ellipsoid shells cut by the valve plane
// (z <= cut height), with closed-form cavity and shell volumes.
struct ScarSpec {
    double fraction = 0.0;        // of the myocardial wedge angle, in [0,1)
    double intensity = 0.3;       // uptake inside the scar (vs 1.0 wall)
    double start_angle_deg = 30.0;
};

struct PhantomSpec {
    std::array<std::array<double, 3>, kGateCount> endo_axes_mm{};  // per gate (a,b,c)
    double wall_mm = 16.0;
    double cut_frac = 0.65;       // valve plane at z = cut_frac * c_endo
    double uptake_myo = 1.0;
    double uptake_cavity = 0.05;
    double uptake_background = 0.02;
    ScarSpec scar;
    double counts_scale = 150.0;  // Poisson mean at uptake 1.0; 0 disables noise
    std::array<double, 3> center_offset_mm{0, 0, 0};
    std::uint64_t seed = 0;
    Dims dims{32, 32, 32};
    double voxel_mm = 6.4;

    // Gate series whose analytic cavity volumes run from edv (gate 0) to esv
    // (gate 4) and back, with a = b = aspect * c.
    static PhantomSpec beating(double edv_cc, double esv_cc, double aspect = 0.6);
};

struct PhantomTruth {
    double edv_cc = 0.0, esv_cc = 0.0, lvef = 0.0;
    int ed_gate = 0, es_gate = 0;
    double scar_burden_pct = 0.0;
    std::array<double, kGateCount> cavity_cc{};
    std::array<double, kGateCount> myo_cc{};
};

struct PhantomResult {
    GatedStudy study;
    // [gate][structure]: endo = cavity region, epi = cavity + wall, myo = wall
    std::array<std::array<Mask3D, 3>, kGateCount> masks;
    PhantomTruth truth;
};

// closed-form volume of an (a,b,c) ellipsoid truncated to z <= h, in the
// ellipsoid's own units
double truncated_ellipsoid_volume(double a, double b, double c, double h);

PhantomResult generate_phantom(const PhantomSpec& spec);

// Writes n seeded phantoms with varied size, EF, scar, and offset in the
// native dataset layout; returns the manifest (also saved as manifest.json).
DatasetManifest generate_phantom_dataset(const std::filesystem::path& out_dir, int n,
                                         std::uint64_t seed);

Severity phantom_severity(const ScarSpec& scar);

void save_truth(const PhantomTruth& truth, const std::filesystem::path& path);
PhantomTruth load_truth(const std::filesystem::path& path);

}  // namespace spectlv
