#include "spectlv/dp_prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spectlv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

}  // namespace

double Slice2D::max_value() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, v);
    return m;
}

Slice2D extract_slice(const Volume3D& vol, int x) {
    Slice2D s(vol.dims.w, vol.dims.h);
    for (int y = 0; y < vol.dims.w; ++y)
        for (int z = 0; z < vol.dims.h; ++z) s.at(y, z) = vol.at(x, y, z);
    return s;
}

Slice2D gaussian_smooth(const Slice2D& s, double sigma) {
    if (sigma <= 0.0) return s;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;

    Slice2D tmp(s.rows, s.cols), out(s.rows, s.cols);
    for (int r = 0; r < s.rows; ++r)
        for (int c = 0; c < s.cols; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int cc = std::clamp(c + i, 0, s.cols - 1);
                acc += k[i + radius] * s.at(r, cc);
            }
            tmp.at(r, c) = acc;
        }
    for (int r = 0; r < s.rows; ++r)
        for (int c = 0; c < s.cols; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int rr = std::clamp(r + i, 0, s.rows - 1);
                acc += k[i + radius] * tmp.at(rr, c);
            }
            out.at(r, c) = acc;
        }
    return out;
}

double bilinear(const Slice2D& s, double r, double c) {
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    const double fr = r - r0, fc = c - c0;
    double acc = 0.0;
    for (int dr = 0; dr < 2; ++dr) {
        const int ri = r0 + dr;
        if (ri < 0 || ri >= s.rows) continue;
        const double wr = dr ? fr : 1.0 - fr;
        for (int dc = 0; dc < 2; ++dc) {
            const int ci = c0 + dc;
            if (ci < 0 || ci >= s.cols) continue;
            acc += s.at(ri, ci) * wr * (dc ? fc : 1.0 - fc);
        }
    }
    return acc;
}

PolarSlice cartesian_to_polar(const Slice2D& slice, double center_row, double center_col,
                              int n_angles, int n_radii) {
    require(center_row >= 0 && center_row <= slice.rows - 1 && center_col >= 0 &&
                center_col <= slice.cols - 1,
            "cartesian_to_polar: center outside slice");
    PolarSlice p;
    p.center_row = center_row;
    p.center_col = center_col;
    p.n_angles = n_angles;
    p.n_radii = n_radii;
    p.samples.resize(static_cast<std::size_t>(n_angles) * n_radii);
    for (int a = 0; a < n_angles; ++a) {
        const double theta = 2.0 * M_PI * a / n_angles;
        const double dr = std::cos(theta), dc = std::sin(theta);
        for (int r = 0; r < n_radii; ++r)
            p.samples[static_cast<std::size_t>(a) * n_radii + r] =
                bilinear(slice, center_row + r * dr, center_col + r * dc);
    }
    return p;
}

std::vector<int> dp_boundary(const PolarSlice& polar, const std::vector<double>& cost,
                             int smooth_bound) {
    const int na = polar.n_angles, nr = polar.n_radii;
    require(static_cast<int>(cost.size()) == na * nr, "dp_boundary: cost size mismatch");
    require(smooth_bound >= 0, "dp_boundary: smooth_bound must be >= 0");
    for (double c : cost)
        require(std::isfinite(c), "dp_boundary: non-finite cost");

    double best_total = kInf;
    std::vector<int> best_path;
    std::vector<double> dp(static_cast<std::size_t>(na) * nr);
    std::vector<int> from(static_cast<std::size_t>(na) * nr);

    for (int r0 = 0; r0 < nr; ++r0) {
        for (int r = 0; r < nr; ++r)
            dp[r] = r == r0 ? cost[r] : kInf;
        for (int a = 1; a < na; ++a)
            for (int r = 0; r < nr; ++r) {
                double best = kInf;
                int arg = -1;
                for (int pr = std::max(0, r - smooth_bound);
                     pr <= std::min(nr - 1, r + smooth_bound); ++pr) {
                    const double v = dp[static_cast<std::size_t>(a - 1) * nr + pr];
                    if (v < best) {
                        best = v;
                        arg = pr;
                    }
                }
                dp[static_cast<std::size_t>(a) * nr + r] =
                    best == kInf ? kInf : best + cost[static_cast<std::size_t>(a) * nr + r];
                from[static_cast<std::size_t>(a) * nr + r] = arg;
            }
        for (int r = std::max(0, r0 - smooth_bound); r <= std::min(nr - 1, r0 + smooth_bound);
             ++r) {
            const double total = dp[static_cast<std::size_t>(na - 1) * nr + r];
            if (total < best_total) {
                best_total = total;
                best_path.assign(na, 0);
                int cur = r;
                for (int a = na - 1; a >= 1; --a) {
                    best_path[a] = cur;
                    cur = from[static_cast<std::size_t>(a) * nr + cur];
                }
                best_path[0] = cur;
            }
        }
    }
    require(best_total < kInf, "dp_boundary: no feasible closed path");
    return best_path;
}

namespace {

// sub-voxel boundary from a parabola through the cost minimum and neighbors
double refine_radius(const std::vector<double>& cost, int na_stride, int a, int r, int nr) {
    if (r <= 0 || r >= nr - 1) return r;
    const double cm = cost[static_cast<std::size_t>(a) * na_stride + r - 1];
    const double c0 = cost[static_cast<std::size_t>(a) * na_stride + r];
    const double cp = cost[static_cast<std::size_t>(a) * na_stride + r + 1];
    const double denom = cm - 2.0 * c0 + cp;
    if (denom <= 1e-12) return r;
    const double delta = 0.5 * (cm - cp) / denom;
    return r + std::clamp(delta, -0.5, 0.5);
}

}  // namespace

ContourPolar trace_slice(const Slice2D& slice, const DpPriorConfig& cfg, double volume_max) {
    ContourPolar contour;
    Slice2D smooth = gaussian_smooth(slice, cfg.sigma);
    const double slice_max = smooth.max_value();
    if (volume_max <= 0.0 || slice_max < cfg.slice_activity_frac * volume_max) return contour;

    // ring centroid over the upper-half-max region
    double sr = 0.0, sc = 0.0, n = 0.0;
    for (int r = 0; r < smooth.rows; ++r)
        for (int c = 0; c < smooth.cols; ++c)
            if (smooth.at(r, c) >= 0.5 * slice_max) {
                sr += r;
                sc += c;
                n += 1.0;
            }
    const double cr = n > 0 ? sr / n : (smooth.rows - 1) / 2.0;
    const double cc = n > 0 ? sc / n : (smooth.cols - 1) / 2.0;

    PolarSlice polar = cartesian_to_polar(smooth, cr, cc, cfg.n_angles, cfg.n_radii);
    const int na = cfg.n_angles, nr = cfg.n_radii;

    // radial derivative of the counts; boundaries sit at the steepest
    // transitions (rising at endo, falling at epi)
    std::vector<double> deriv(static_cast<std::size_t>(na) * nr);
    for (int a = 0; a < na; ++a)
        for (int r = 0; r < nr; ++r) {
            const double lo = polar.at(a, std::max(0, r - 1));
            const double hi = polar.at(a, std::min(nr - 1, r + 1));
            deriv[static_cast<std::size_t>(a) * nr + r] =
                (hi - lo) / (r == 0 || r == nr - 1 ? 1.0 : 2.0);
        }

    std::vector<double> endo_cost(deriv.size()), epi_cost(deriv.size());
    for (std::size_t i = 0; i < deriv.size(); ++i) {
        endo_cost[i] = -deriv[i];
        epi_cost[i] = deriv[i];
    }

    // A bright center means the cut misses the cavity (solid wall patch):
    // no endocardial boundary exists in this slice.
    double center_mean = 0.0;
    for (int a = 0; a < na; ++a) center_mean += polar.at(a, 0) + polar.at(a, 1);
    center_mean /= 2.0 * na;
    const bool has_cavity = center_mean < 0.5 * slice_max;

    std::vector<int> endo(na, 0);
    if (has_cavity) endo = dp_boundary(polar, endo_cost, cfg.smooth_bound);

    // epi must stay strictly outside endo at every angle
    const double big = 1e6;
    if (has_cavity)
        for (int a = 0; a < na; ++a)
            for (int r = 0; r <= std::min(endo[a], nr - 1); ++r)
                epi_cost[static_cast<std::size_t>(a) * nr + r] = big;
    std::vector<int> epi = dp_boundary(polar, epi_cost, cfg.smooth_bound);

    // valve arc: wall counts along the path fall under a fraction of the
    // slice maximum for a long contiguous run of angles
    std::vector<bool> low(na, false);
    for (int a = 0; a < na; ++a) {
        double acc = 0.0;
        int cnt = 0;
        for (int r = endo[a]; r <= epi[a]; ++r, ++cnt) acc += polar.at(a, r);
        low[a] = cnt > 0 && acc / cnt < cfg.valve_count_frac * slice_max;
    }
    const int min_arc = static_cast<int>(std::ceil(cfg.valve_arc_deg / 360.0 * na));
    std::vector<bool> valve(na, false);
    for (int start = 0; start < na; ++start) {
        if (!low[start]) continue;
        int len = 0;
        while (len < na && low[(start + len) % na]) ++len;
        if (len >= min_arc)
            for (int i = 0; i < len; ++i) valve[(start + i) % na] = true;
    }

    contour.empty = false;
    contour.center_row = cr;
    contour.center_col = cc;
    contour.valve = valve;
    contour.radii_endo.resize(na);
    contour.radii_epi.resize(na);
    for (int a = 0; a < na; ++a) {
        contour.radii_endo[a] = has_cavity ? refine_radius(endo_cost, nr, a, endo[a], nr) : 0.0;
        contour.radii_epi[a] = refine_radius(epi_cost, nr, a, epi[a], nr);
        if (contour.radii_epi[a] <= contour.radii_endo[a])
            contour.radii_epi[a] = contour.radii_endo[a] + 0.5;
    }
    return contour;
}

namespace {

// even-odd fill of the polygon built from non-valve contour vertices; the gap
// left by valve angles closes with a straight chord
void fill_polygon(const ContourPolar& contour, const std::vector<double>& radii, Slice2D& out) {
    std::vector<std::array<double, 2>> pts;
    const int na = static_cast<int>(radii.size());
    for (int a = 0; a < na; ++a) {
        if (contour.valve[a]) continue;
        const double theta = 2.0 * M_PI * a / na;
        pts.push_back({contour.center_row + radii[a] * std::cos(theta),
                       contour.center_col + radii[a] * std::sin(theta)});
    }
    if (pts.size() < 3) return;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            bool inside = false;
            for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
                const double yi = pts[i][0], xi = pts[i][1];
                const double yj = pts[j][0], xj = pts[j][1];
                if ((xi > c) != (xj > c) && r < (yj - yi) * (c - xi) / (xj - xi) + yi)
                    inside = !inside;
            }
            if (inside) out.at(r, c) = 1.0;
        }
}

}  // namespace

std::array<ShapePrior, 3> generate_prior(const Volume3D& vol, const DpPriorConfig& cfg) {
    vol.validate();
    const double vmax = vol.max_value();
    require(vmax > 0.0, "generate_prior: degenerate all-zero volume");

    std::array<ShapePrior, 3> out{Mask3D(vol.dims, vol.voxel_mm, Structure::endocardium),
                                  Mask3D(vol.dims, vol.voxel_mm, Structure::myocardium),
                                  Mask3D(vol.dims, vol.voxel_mm, Structure::epicardium)};
    for (int x = 0; x < vol.dims.l; ++x) {
        Slice2D slice = extract_slice(vol, x);
        ContourPolar contour = trace_slice(slice, cfg, vmax);
        if (contour.empty) continue;
        Slice2D endo_fill(slice.rows, slice.cols), epi_fill(slice.rows, slice.cols);
        fill_polygon(contour, contour.radii_endo, endo_fill);
        fill_polygon(contour, contour.radii_epi, epi_fill);
        for (int y = 0; y < vol.dims.w; ++y)
            for (int z = 0; z < vol.dims.h; ++z) {
                const bool epi_in = epi_fill.at(y, z) > 0.0;
                const bool endo_in = endo_fill.at(y, z) > 0.0 && epi_in;  // containment
                out[0].at(x, y, z) = endo_in ? 1 : 0;
                out[1].at(x, y, z) = (epi_in && !endo_in) ? 1 : 0;
                out[2].at(x, y, z) = epi_in ? 1 : 0;
            }
    }
    return out;
}

}  // namespace spectlv
