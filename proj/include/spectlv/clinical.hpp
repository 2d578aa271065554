#pragma once

#include <array>
#include <string>

#include "spectlv/volume.hpp"

namespace spectlv {

// foreground count * voxel_mm^3 / 1000, in cc
double mask_volume_cc(const Mask3D& mask);

// The endocardial mask plus any enclosed holes (6-connected components of
// background not reachable from the volume border). A solid cavity mask is
// returned unchanged; a boundary-only mask gets its interior filled.
Mask3D cavity_fill(const Mask3D& endo);

struct EfResult {
    double edv_cc = 0.0, esv_cc = 0.0, lvef = 0.0;
    int ed_gate = 0, es_gate = 0;
    std::array<double, kGateCount> cavity_cc{};
};

// EDV = max, ESV = min cavity volume over the 8 gates; EF = (EDV-ESV)/EDV.
// Throws on an empty endocardial mask.
EfResult ef_from_gates(const std::array<Mask3D, kGateCount>& endo_masks);

// percentage of myocardial voxels with uptake below half the in-myocardium
// maximum; throws on an empty myocardium
double scar_burden(const Volume3D& vol, const Mask3D& myo);

std::array<double, kGateCount> volume_curve(const std::array<Mask3D, kGateCount>& myo_masks);

struct ClinicalReport {
    std::string patient_id;
    State state = State::stress;
    double edv_cc = 0.0, esv_cc = 0.0, lvef = 0.0;
    int ed_gate = 0, es_gate = 0;
    std::array<double, kGateCount> myo_volume_cc{};
    std::array<double, kGateCount> cavity_cc{};
    double scar_burden_pct = 0.0;
};

// full per-study readout from endo + myo masks per gate; scar burden uses the
// ED-gate uptake volume and myocardium
ClinicalReport clinical_report(const std::string& patient_id, State state,
                               const std::array<Volume3D, kGateCount>& gates,
                               const std::array<Mask3D, kGateCount>& endo_masks,
                               const std::array<Mask3D, kGateCount>& myo_masks);

}  // namespace spectlv
