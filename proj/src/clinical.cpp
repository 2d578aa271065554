#include "spectlv/clinical.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace spectlv {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

}  // namespace

double mask_volume_cc(const Mask3D& mask) {
    return static_cast<double>(mask.foreground_count()) * mask.voxel_mm * mask.voxel_mm *
           mask.voxel_mm / 1000.0;
}

Mask3D cavity_fill(const Mask3D& endo) {
    const Dims d = endo.dims;
    // flood the background from the border; anything unreached is enclosed
    std::vector<std::uint8_t> outside(endo.data.size(), 0);
    std::vector<std::int64_t> stack;
    auto idx = [&](int x, int y, int z) {
        return (static_cast<std::int64_t>(x) * d.w + y) * d.h + z;
    };
    auto push_if_bg = [&](int x, int y, int z) {
        const std::int64_t i = idx(x, y, z);
        if (!endo.data[i] && !outside[i]) {
            outside[i] = 1;
            stack.push_back(i);
        }
    };
    for (int x = 0; x < d.l; ++x)
        for (int y = 0; y < d.w; ++y) {
            push_if_bg(x, y, 0);
            push_if_bg(x, y, d.h - 1);
        }
    for (int x = 0; x < d.l; ++x)
        for (int z = 0; z < d.h; ++z) {
            push_if_bg(x, 0, z);
            push_if_bg(x, d.w - 1, z);
        }
    for (int y = 0; y < d.w; ++y)
        for (int z = 0; z < d.h; ++z) {
            push_if_bg(0, y, z);
            push_if_bg(d.l - 1, y, z);
        }
    while (!stack.empty()) {
        const std::int64_t i = stack.back();
        stack.pop_back();
        const int z = static_cast<int>(i % d.h);
        const int y = static_cast<int>((i / d.h) % d.w);
        const int x = static_cast<int>(i / (static_cast<std::int64_t>(d.h) * d.w));
        if (x > 0) push_if_bg(x - 1, y, z);
        if (x + 1 < d.l) push_if_bg(x + 1, y, z);
        if (y > 0) push_if_bg(x, y - 1, z);
        if (y + 1 < d.w) push_if_bg(x, y + 1, z);
        if (z > 0) push_if_bg(x, y, z - 1);
        if (z + 1 < d.h) push_if_bg(x, y, z + 1);
    }
    Mask3D filled = endo;
    for (std::size_t i = 0; i < filled.data.size(); ++i)
        if (!outside[i]) filled.data[i] = 1;
    return filled;
}

EfResult ef_from_gates(const std::array<Mask3D, kGateCount>& endo_masks) {
    EfResult res;
    for (int g = 0; g < kGateCount; ++g) {
        require(endo_masks[g].foreground_count() > 0,
                "ef_from_gates: empty endocardial mask at gate " + std::to_string(g));
        require(endo_masks[g].dims == endo_masks[0].dims, "ef_from_gates: dims mismatch");
        res.cavity_cc[g] = mask_volume_cc(cavity_fill(endo_masks[g]));
    }
    const auto& c = res.cavity_cc;
    res.ed_gate = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
    res.es_gate = static_cast<int>(std::min_element(c.begin(), c.end()) - c.begin());
    res.edv_cc = c[res.ed_gate];
    res.esv_cc = c[res.es_gate];
    res.lvef = (res.edv_cc - res.esv_cc) / res.edv_cc;
    return res;
}

double scar_burden(const Volume3D& vol, const Mask3D& myo) {
    require(vol.dims == myo.dims, "scar_burden: dims mismatch");
    require(myo.foreground_count() > 0, "scar_burden: empty myocardium");
    float peak = 0.0f;
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        if (myo.data[i]) peak = std::max(peak, vol.data[i]);
    std::int64_t scar = 0, total = 0;
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        if (myo.data[i]) {
            ++total;
            if (vol.data[i] < 0.5f * peak) ++scar;
        }
    return 100.0 * static_cast<double>(scar) / static_cast<double>(total);
}

std::array<double, kGateCount> volume_curve(const std::array<Mask3D, kGateCount>& myo_masks) {
    std::array<double, kGateCount> curve{};
    for (int g = 0; g < kGateCount; ++g) curve[g] = mask_volume_cc(myo_masks[g]);
    return curve;
}

ClinicalReport clinical_report(const std::string& patient_id, State state,
                               const std::array<Volume3D, kGateCount>& gates,
                               const std::array<Mask3D, kGateCount>& endo_masks,
                               const std::array<Mask3D, kGateCount>& myo_masks) {
    ClinicalReport rep;
    rep.patient_id = patient_id;
    rep.state = state;
    EfResult ef = ef_from_gates(endo_masks);
    rep.edv_cc = ef.edv_cc;
    rep.esv_cc = ef.esv_cc;
    rep.lvef = ef.lvef;
    rep.ed_gate = ef.ed_gate;
    rep.es_gate = ef.es_gate;
    rep.cavity_cc = ef.cavity_cc;
    rep.myo_volume_cc = volume_curve(myo_masks);
    rep.scar_burden_pct = scar_burden(gates[ef.ed_gate], myo_masks[ef.ed_gate]);
    return rep;
}

}  // namespace spectlv
