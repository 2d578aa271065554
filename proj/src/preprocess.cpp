#include "spectlv/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "spectlv/common.hpp"

namespace spectlv {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

constexpr int kCrop = 32;

}  // namespace

Volume3D to_long_axis(const Volume3D& vol, int long_axis) {
    vol.validate();
    require(long_axis >= 0 && long_axis <= 2, "to_long_axis: axis must be 0, 1, or 2");

    // rotate axes cyclically so the declared long axis lands on axis 2
    Volume3D oriented;
    if (long_axis == 2) {
        oriented = vol;
    } else {
        const int shift = 2 - long_axis;
        const int dims_in[3] = {vol.dims.l, vol.dims.w, vol.dims.h};
        int dims_out[3];
        for (int a = 0; a < 3; ++a) dims_out[(a + shift) % 3] = dims_in[a];
        oriented = Volume3D({dims_out[0], dims_out[1], dims_out[2]}, vol.voxel_mm);
        for (int x = 0; x < vol.dims.l; ++x)
            for (int y = 0; y < vol.dims.w; ++y)
                for (int z = 0; z < vol.dims.h; ++z) {
                    const int src[3] = {x, y, z};
                    int dst[3];
                    for (int a = 0; a < 3; ++a) dst[(a + shift) % 3] = src[a];
                    oriented.at(dst[0], dst[1], dst[2]) = vol.at(x, y, z);
                }
    }
    require(oriented.dims.l >= kCrop && oriented.dims.w >= kCrop && oriented.dims.h >= kCrop,
            "to_long_axis: input too small for a 32^3 crop");

    const float vmax = oriented.max_value();
    require(vmax > 0.0f, "to_long_axis: all-zero volume has no centroid");
    double cx = 0, cy = 0, cz = 0, n = 0;
    for (int x = 0; x < oriented.dims.l; ++x)
        for (int y = 0; y < oriented.dims.w; ++y)
            for (int z = 0; z < oriented.dims.h; ++z)
                if (oriented.at(x, y, z) >= 0.5f * vmax) {
                    cx += x;
                    cy += y;
                    cz += z;
                    n += 1;
                }
    const int dims_o[3] = {oriented.dims.l, oriented.dims.w, oriented.dims.h};
    const double cent[3] = {cx / n, cy / n, cz / n};
    int lo[3];
    for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<int>(std::lround(cent[a])) - kCrop / 2;
        lo[a] = std::clamp(lo[a], 0, dims_o[a] - kCrop);
    }
    Volume3D out({kCrop, kCrop, kCrop}, oriented.voxel_mm);
    for (int x = 0; x < kCrop; ++x)
        for (int y = 0; y < kCrop; ++y)
            for (int z = 0; z < kCrop; ++z)
                out.at(x, y, z) = oriented.at(lo[0] + x, lo[1] + y, lo[2] + z);
    return out;
}

AugmentParams draw_augment_params(std::uint64_t seed) {
    Rng rng(seed);
    AugmentParams p;
    p.scale = rng.uniform(0.9, 1.1);
    for (int a = 0; a < 3; ++a) p.flip[a] = rng.bernoulli(0.5);
    p.rot_deg = rng.uniform(-15.0, 15.0);
    return p;
}

void augment_with_params(Volume3D& vol, std::vector<Mask3D*>& masks, const AugmentParams& p) {
    for (const Mask3D* m : masks)
        require(m->dims == vol.dims, "augment: volume and masks must share dims");
    const Dims d = vol.dims;
    const double c[3] = {(d.l - 1) / 2.0, (d.w - 1) / 2.0, (d.h - 1) / 2.0};
    const double rad = p.rot_deg * M_PI / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);

    // output voxel -> source voxel: undo rotation (about axis 2), then scale,
    // then flips
    auto source_of = [&](int x, int y, int z, double src[3]) {
        const double q[3] = {x - c[0], y - c[1], z - c[2]};
        double r[3] = {cs * q[0] + sn * q[1], -sn * q[0] + cs * q[1], q[2]};
        for (int a = 0; a < 3; ++a) r[a] /= p.scale;
        for (int a = 0; a < 3; ++a) src[a] = p.flip[a] ? c[a] - r[a] : c[a] + r[a];
    };

    Volume3D out_vol(d, vol.voxel_mm);
    std::vector<Mask3D> out_masks;
    out_masks.reserve(masks.size());
    for (const Mask3D* m : masks) out_masks.emplace_back(d, m->voxel_mm, m->structure);

    for (int x = 0; x < d.l; ++x)
        for (int y = 0; y < d.w; ++y)
            for (int z = 0; z < d.h; ++z) {
                double s[3];
                source_of(x, y, z, s);
                // trilinear for the volume
                double acc = 0.0;
                const int x0 = static_cast<int>(std::floor(s[0]));
                const int y0 = static_cast<int>(std::floor(s[1]));
                const int z0 = static_cast<int>(std::floor(s[2]));
                for (int dx = 0; dx < 2; ++dx)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dz = 0; dz < 2; ++dz) {
                            const int xi = x0 + dx, yi = y0 + dy, zi = z0 + dz;
                            if (xi < 0 || xi >= d.l || yi < 0 || yi >= d.w || zi < 0 ||
                                zi >= d.h)
                                continue;
                            const double w = (dx ? s[0] - x0 : 1.0 - (s[0] - x0)) *
                                             (dy ? s[1] - y0 : 1.0 - (s[1] - y0)) *
                                             (dz ? s[2] - z0 : 1.0 - (s[2] - z0));
                            acc += w * vol.at(xi, yi, zi);
                        }
                out_vol.at(x, y, z) = static_cast<float>(acc);
                // nearest neighbor for masks
                const int xn = static_cast<int>(std::lround(s[0]));
                const int yn = static_cast<int>(std::lround(s[1]));
                const int zn = static_cast<int>(std::lround(s[2]));
                const bool inside = xn >= 0 && xn < d.l && yn >= 0 && yn < d.w && zn >= 0 &&
                                    zn < d.h;
                for (std::size_t mi = 0; mi < masks.size(); ++mi)
                    out_masks[mi].at(x, y, z) = inside ? masks[mi]->at(xn, yn, zn) : 0;
            }
    vol = std::move(out_vol);
    for (std::size_t mi = 0; mi < masks.size(); ++mi) *masks[mi] = std::move(out_masks[mi]);
}

void augment(Volume3D& vol, std::vector<Mask3D*>& masks, std::uint64_t seed) {
    augment_with_params(vol, masks, draw_augment_params(seed));
}

std::vector<FoldSplit> stratified_folds(const DatasetManifest& manifest, int k,
                                        std::uint64_t seed) {
    require(k >= 2, "stratified_folds: k must be at least 2");
    // unique patients in manifest order, each with one severity
    std::vector<std::string> order;
    std::map<std::string, Severity> severity;
    for (const auto& e : manifest.entries) {
        if (!severity.count(e.patient_id)) {
            order.push_back(e.patient_id);
            severity[e.patient_id] = e.severity;
        } else {
            require(severity[e.patient_id] == e.severity,
                    "stratified_folds: inconsistent severity for " + e.patient_id);
        }
    }
    require(!order.empty(), "stratified_folds: empty manifest");

    Rng rng(seed);
    std::vector<std::vector<std::string>> fold_members(static_cast<std::size_t>(k));
    int offset = 0;  // rotates per class so fold sizes stay balanced
    for (int cls = 0; cls < 3; ++cls) {
        std::vector<std::string> members;
        for (const auto& id : order)
            if (static_cast<int>(severity[id]) == cls) members.push_back(id);
        if (members.empty()) continue;
        require(static_cast<int>(members.size()) >= k,
                std::string("stratified_folds: class ") +
                    severity_name(static_cast<Severity>(cls)) + " has fewer members than k");
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i)
            fold_members[(offset + i) % k].push_back(members[i]);
        offset = (offset + static_cast<int>(members.size() % k)) % k;
    }

    std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        folds[f].test_ids = fold_members[f];
        for (int g = 0; g < k; ++g)
            if (g != f)
                folds[f].train_ids.insert(folds[f].train_ids.end(), fold_members[g].begin(),
                                          fold_members[g].end());
    }
    return folds;
}

}  // namespace spectlv
