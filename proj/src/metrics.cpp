#include "spectlv/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace spectlv {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

std::vector<std::array<int, 3>> foreground(const Mask3D& m) {
    std::vector<std::array<int, 3>> pts;
    for (int x = 0; x < m.dims.l; ++x)
        for (int y = 0; y < m.dims.w; ++y)
            for (int z = 0; z < m.dims.h; ++z)
                if (m.at(x, y, z)) pts.push_back({x, y, z});
    return pts;
}

// directed max-min distance in voxel units, squared arithmetic throughout
double directed_hd2(const std::vector<std::array<int, 3>>& a,
                    const std::vector<std::array<int, 3>>& b) {
    double worst = 0.0;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) {
            const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
            best = std::min(best, dx * dx + dy * dy + dz * dz);
            if (best == 0.0) break;
        }
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace

double dsc(const Mask3D& pred, const Mask3D& gt) {
    require(pred.dims == gt.dims, "dsc: dims mismatch");
    std::int64_t inter = 0, np = 0, ng = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        np += pred.data[i];
        ng += gt.data[i];
        inter += pred.data[i] & gt.data[i];
    }
    if (np + ng == 0) return 1.0;  // agreement on absence
    return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

Mask3D binarize(const Volume3D& prob, double threshold, Structure structure) {
    Mask3D m(prob.dims, prob.voxel_mm, structure);
    for (std::size_t i = 0; i < prob.data.size(); ++i)
        m.data[i] = prob.data[i] > threshold ? 1 : 0;
    return m;
}

double dsc(const Volume3D& prob, const Mask3D& gt, double threshold) {
    return dsc(binarize(prob, threshold, gt.structure), gt);
}

double hausdorff_mm(const Mask3D& pred, const Mask3D& gt) {
    require(pred.dims == gt.dims, "hausdorff: dims mismatch");
    require(pred.voxel_mm == gt.voxel_mm, "hausdorff: voxel size mismatch");
    auto p = foreground(pred);
    auto g = foreground(gt);
    require(!p.empty() && !g.empty(), "hausdorff: empty mask");
    const double hd2 = std::max(directed_hd2(p, g), directed_hd2(g, p));
    return std::sqrt(hd2) * pred.voxel_mm;
}

double relative_error(double measured, double gt_value) {
    require(gt_value != 0.0, "relative_error: ground-truth value is zero");
    return (measured - gt_value) / gt_value * 100.0;
}

PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    require(xs.size() == ys.size(), "pearson: length mismatch");
    const std::size_t n = xs.size();
    require(n >= 3, "pearson: need at least 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    require(sxx > 0.0 && syy > 0.0, "pearson: constant series");
    PearsonResult res;
    res.r = sxy / std::sqrt(sxx * syy);
    const double df = static_cast<double>(n) - 2.0;
    const double r2 = std::min(res.r * res.r, 1.0 - 1e-15);
    const double t = std::abs(res.r) * std::sqrt(df / (1.0 - r2));
    boost::math::students_t_distribution<double> dist(df);
    res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    return res;
}

BlandAltman bland_altman(const std::vector<double>& xs, const std::vector<double>& ys) {
    require(xs.size() == ys.size(), "bland_altman: length mismatch");
    require(xs.size() >= 2, "bland_altman: need at least 2 points");
    BlandAltman ba;
    const std::size_t n = xs.size();
    ba.means.resize(n);
    ba.diffs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ba.means[i] = 0.5 * (xs[i] + ys[i]);
        ba.diffs[i] = xs[i] - ys[i];
        ba.bias += ba.diffs[i];
    }
    ba.bias /= static_cast<double>(n);
    double ss = 0.0;
    for (double d : ba.diffs) ss += (d - ba.bias) * (d - ba.bias);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    ba.lower_limit = ba.bias - 1.96 * sd;
    ba.upper_limit = ba.bias + 1.96 * sd;
    return ba;
}

}  // namespace spectlv
