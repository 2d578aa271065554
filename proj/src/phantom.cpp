#include "spectlv/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "spectlv/common.hpp"

namespace spectlv {

using nlohmann::json;

double truncated_ellipsoid_volume(double a, double b, double c, double h) {
    const double hc = std::clamp(h / c, -1.0, 1.0);
    return M_PI * a * b * c * (hc - hc * hc * hc / 3.0 + 2.0 / 3.0);
}

PhantomSpec PhantomSpec::beating(double edv_cc, double esv_cc, double aspect) {
    if (edv_cc <= 0 || esv_cc <= 0 || esv_cc > edv_cc)
        throw std::runtime_error("PhantomSpec: need 0 < esv <= edv");
    PhantomSpec spec;
    static const double phase[kGateCount] = {1.0, 0.85, 0.5, 0.15, 0.0, 0.15, 0.5, 0.85};
    const double hf = spec.cut_frac;
    const double shape_factor = M_PI * aspect * aspect * (hf - hf * hf * hf / 3.0 + 2.0 / 3.0);
    for (int g = 0; g < kGateCount; ++g) {
        const double v_mm3 = (esv_cc + (edv_cc - esv_cc) * phase[g]) * 1000.0;
        const double c = std::cbrt(v_mm3 / shape_factor);
        spec.endo_axes_mm[g] = {aspect * c, aspect * c, c};
    }
    return spec;
}

Severity phantom_severity(const ScarSpec& scar) {
    if (scar.fraction <= 0.0) return Severity::normal_or_mild;
    if (scar.fraction < 0.12) return Severity::moderate;
    return Severity::severe;
}

PhantomResult generate_phantom(const PhantomSpec& spec) {
    if (spec.wall_mm < spec.voxel_mm)
        throw std::runtime_error("generate_phantom: shell thinner than one voxel");
    if (spec.scar.fraction < 0.0 || spec.scar.fraction >= 1.0)
        throw std::runtime_error("generate_phantom: scar fraction must be in [0,1)");

    PhantomResult out;
    out.study.patient_id = "phantom";
    Rng rng(spec.seed);

    const double half_l = (spec.dims.l - 1) / 2.0;
    const double half_w = (spec.dims.w - 1) / 2.0;
    const double half_h = (spec.dims.h - 1) / 2.0;
    const double scar_lo = spec.scar.start_angle_deg * M_PI / 180.0;
    const double scar_len = spec.scar.fraction * 2.0 * M_PI;

    for (int g = 0; g < kGateCount; ++g) {
        const auto [ea, eb, ec] = spec.endo_axes_mm[g];
        const double pa = ea + spec.wall_mm, pb = eb + spec.wall_mm, pc = ec + spec.wall_mm;
        const double h = spec.cut_frac * ec;  // valve plane, mm above center

        Volume3D vol(spec.dims, spec.voxel_mm);
        std::array<Mask3D, 3> masks{Mask3D(spec.dims, spec.voxel_mm, Structure::endocardium),
                                    Mask3D(spec.dims, spec.voxel_mm, Structure::myocardium),
                                    Mask3D(spec.dims, spec.voxel_mm, Structure::epicardium)};
        for (int x = 0; x < spec.dims.l; ++x)
            for (int y = 0; y < spec.dims.w; ++y)
                for (int z = 0; z < spec.dims.h; ++z) {
                    const double px = (x - half_l) * spec.voxel_mm - spec.center_offset_mm[0];
                    const double py = (y - half_w) * spec.voxel_mm - spec.center_offset_mm[1];
                    const double pz = (z - half_h) * spec.voxel_mm - spec.center_offset_mm[2];
                    const bool below_valve = pz <= h;
                    const bool in_endo =
                        below_valve && (px * px) / (ea * ea) + (py * py) / (eb * eb) +
                                               (pz * pz) / (ec * ec) <=
                                           1.0;
                    const bool in_epi =
                        below_valve && (px * px) / (pa * pa) + (py * py) / (pb * pb) +
                                               (pz * pz) / (pc * pc) <=
                                           1.0;
                    const bool in_wall = in_epi && !in_endo;

                    double uptake = spec.uptake_background;
                    if (in_endo) {
                        uptake = spec.uptake_cavity;
                    } else if (in_wall) {
                        uptake = spec.uptake_myo;
                        if (scar_len > 0.0) {
                            double ang = std::atan2(py, px) - scar_lo;
                            ang -= 2.0 * M_PI * std::floor(ang / (2.0 * M_PI));
                            if (ang < scar_len) uptake = spec.scar.intensity;
                        }
                    }
                    float counts = static_cast<float>(uptake * std::max(spec.counts_scale, 1.0));
                    if (spec.counts_scale > 0.0)
                        counts = static_cast<float>(rng.poisson(uptake * spec.counts_scale));
                    vol.at(x, y, z) = counts;
                    masks[0].at(x, y, z) = in_endo ? 1 : 0;
                    masks[1].at(x, y, z) = in_wall ? 1 : 0;
                    masks[2].at(x, y, z) = in_epi ? 1 : 0;
                }
        out.study.gates[g] = std::move(vol);
        out.masks[g] = std::move(masks);

        const double cavity = truncated_ellipsoid_volume(ea, eb, ec, h) / 1000.0;
        const double epi_v = truncated_ellipsoid_volume(pa, pb, pc, h) / 1000.0;
        out.truth.cavity_cc[g] = cavity;
        out.truth.myo_cc[g] = epi_v - cavity;
    }

    const auto& cav = out.truth.cavity_cc;
    out.truth.ed_gate = static_cast<int>(std::max_element(cav.begin(), cav.end()) - cav.begin());
    out.truth.es_gate = static_cast<int>(std::min_element(cav.begin(), cav.end()) - cav.begin());
    out.truth.edv_cc = cav[out.truth.ed_gate];
    out.truth.esv_cc = cav[out.truth.es_gate];
    out.truth.lvef = (out.truth.edv_cc - out.truth.esv_cc) / out.truth.edv_cc;
    out.truth.scar_burden_pct = spec.scar.fraction * 100.0;
    out.study.severity = phantom_severity(spec.scar);
    return out;
}

void save_truth(const PhantomTruth& truth, const std::filesystem::path& path) {
    json j{{"edv_cc", truth.edv_cc},
           {"esv_cc", truth.esv_cc},
           {"lvef", truth.lvef},
           {"ed_gate", truth.ed_gate},
           {"es_gate", truth.es_gate},
           {"scar_burden_pct", truth.scar_burden_pct},
           {"cavity_cc", truth.cavity_cc},
           {"myo_cc", truth.myo_cc}};
    std::ofstream out(path);
    if (!out.good()) throw std::runtime_error("cannot write truth file: " + path.string());
    out << j.dump(2) << "\n";
}

PhantomTruth load_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot open truth file: " + path.string());
    json j;
    in >> j;
    PhantomTruth t;
    t.edv_cc = j.at("edv_cc");
    t.esv_cc = j.at("esv_cc");
    t.lvef = j.at("lvef");
    t.ed_gate = j.at("ed_gate");
    t.es_gate = j.at("es_gate");
    t.scar_burden_pct = j.at("scar_burden_pct");
    for (int g = 0; g < kGateCount; ++g) {
        t.cavity_cc[g] = j.at("cavity_cc")[g];
        t.myo_cc[g] = j.at("myo_cc")[g];
    }
    return t;
}

DatasetManifest generate_phantom_dataset(const std::filesystem::path& out_dir, int n,
                                         std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    DatasetManifest manifest;
    manifest.root = out_dir;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const double edv = rng.uniform(80.0, 130.0);
        const double ef = rng.uniform(0.45, 0.70);
        PhantomSpec spec = PhantomSpec::beating(edv, edv * (1.0 - ef),
                                                rng.uniform(0.55, 0.65));
        spec.cut_frac = rng.uniform(0.60, 0.70);
        // roughly half the phantoms carry a perfusion defect
        const double scar_draw = rng.uniform();
        if (scar_draw > 0.50 && scar_draw <= 0.85)
            spec.scar = {rng.uniform(0.05, 0.12), rng.uniform(0.2, 0.35),
                         rng.uniform(0.0, 360.0)};
        else if (scar_draw > 0.85)
            spec.scar = {rng.uniform(0.12, 0.16), rng.uniform(0.2, 0.35),
                         rng.uniform(0.0, 360.0)};
        for (auto& o : spec.center_offset_mm) o = rng.uniform(-6.4, 6.4);
        spec.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);

        PhantomResult res = generate_phantom(spec);
        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "phantom_%03d", i % 1000);
        const std::string id = idbuf;
        std::filesystem::create_directories(out_dir / id);

        StudyEntry e;
        e.patient_id = id;
        e.state = State::stress;
        e.severity = res.study.severity;
        for (int g = 0; g < kGateCount; ++g) {
            const std::string base = id + "/gate" + std::to_string(g);
            save_volume(res.study.gates[g], out_dir / (base + ".vol"));
            e.gate_files.push_back(base + ".vol");
            for (int s = 0; s < 3; ++s) {
                const std::string mask_name =
                    base + "_" + structure_name(static_cast<Structure>(s)) + ".msk";
                save_mask(res.masks[g][s], out_dir / mask_name);
                e.mask_files[s].push_back(mask_name);
            }
        }
        save_truth(res.truth, out_dir / (id + "/truth.json"));
        e.truth_file = id + "/truth.json";
        manifest.entries.push_back(std::move(e));
    }
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace spectlv
