#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "qrsim/coords.hpp"
#include "qrsim/errors.hpp"
#include "qrsim/mesh.hpp"

namespace qrsim {

/// Rounds to the 9 significant digits used by the mesh file format, so
/// generated meshes survive a save/load cycle bit-exactly.
inline double quantize9(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::strtod(buf, nullptr);
}

// Two truncated prolate ellipsoidal shells. The LV axis is z (apex at
// negative z), the RV sits on the -x side, +y is anterior. Lengths in cm.
struct SyntheticGeometry {
    double lv_endo_radius = 2.0;
    double lv_endo_length = 4.0; // semi-axis along z
    double lv_wall = 0.85;
    double rv_offset = 2.0;      // RV ellipsoid centre at (-rv_offset, 0, 0)
    double rv_endo_radius_x = 2.4;
    double rv_endo_radius_y = 2.6;
    double rv_endo_length = 3.8;
    double rv_wall = 0.45;
    double base_height = 1.0;       // truncation plane z = base_height
    double dense_layer_max_ab = 0.7; // endocardial nodes above this ab form the sparse layer

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw ParameterError(std::string(name) + " must be positive, got " + std::to_string(v));
        };
        positive(lv_endo_radius, "lv_endo_radius");
        positive(lv_endo_length, "lv_endo_length");
        positive(lv_wall, "lv_wall");
        positive(rv_offset, "rv_offset");
        positive(rv_endo_radius_x, "rv_endo_radius_x");
        positive(rv_endo_radius_y, "rv_endo_radius_y");
        positive(rv_endo_length, "rv_endo_length");
        positive(rv_wall, "rv_wall");
        positive(base_height, "base_height");
        if (base_height >= lv_endo_length)
            throw ParameterError("base_height must be below the LV cavity tip (lv_endo_length)");
        if (base_height >= rv_endo_length)
            throw ParameterError("base_height must be below the RV cavity tip (rv_endo_length)");
        if (rv_offset + rv_endo_radius_x <= lv_endo_radius + lv_wall)
            throw ParameterError("RV cavity does not extend beyond the LV epicardium (rv_offset + rv_endo_radius_x too small)");
        if (rv_offset >= lv_endo_radius + lv_wall + rv_endo_radius_x)
            throw ParameterError("RV ellipsoid does not touch the LV (rv_offset too large)");
        if (!(dense_layer_max_ab >= 0.0 && dense_layer_max_ab <= 1.0))
            throw ParameterError("dense_layer_max_ab must lie in [0,1]");
    }

    // Family of nested ellipsoids; s = 0 is the endocardium, s = 1 the epicardium.
    struct Family {
        Vec3 center;
        Vec3 endo_radii;
        double wall;

        Vec3 radii(double s) const { return endo_radii + Vec3::Constant(s * wall); }
        double quadric(const Vec3& p, double s) const {
            const Vec3 r = radii(s);
            const Vec3 q = (p - center).cwiseQuotient(r);
            return q.squaredNorm();
        }
        // s such that p lies on the family member, solved by bisection.
        double level(const Vec3& p) const {
            double lo = -0.9 * endo_radii.minCoeff() / wall;
            double hi = 20.0;
            if (quadric(p, lo) <= 1.0) return lo;
            if (quadric(p, hi) >= 1.0) return hi;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                (quadric(p, mid) > 1.0 ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
    };

    Family lv_family() const {
        return {Vec3::Zero(), Vec3(lv_endo_radius, lv_endo_radius, lv_endo_length), lv_wall};
    }
    Family rv_family() const {
        return {Vec3(-rv_offset, 0.0, 0.0), Vec3(rv_endo_radius_x, rv_endo_radius_y, rv_endo_length), rv_wall};
    }

    bool in_lv_cavity(const Vec3& p) const { return p.z() <= base_height && lv_family().quadric(p, 0.0) < 1.0; }
    bool in_rv_cavity(const Vec3& p) const {
        return p.z() <= base_height && rv_family().quadric(p, 0.0) < 1.0 && lv_family().quadric(p, 1.0) > 1.0;
    }
    bool in_lv_wall(const Vec3& p) const {
        const auto lv = lv_family();
        return lv.quadric(p, 1.0) <= 1.0 && lv.quadric(p, 0.0) > 1.0;
    }
    bool in_rv_wall(const Vec3& p) const {
        const auto rv = rv_family();
        return rv.quadric(p, 1.0) <= 1.0 && rv.quadric(p, 0.0) > 1.0 && lv_family().quadric(p, 1.0) > 1.0;
    }
    /// Myocardium membership of the continuous geometry.
    bool contains(const Vec3& p) const { return p.z() <= base_height && (in_lv_wall(p) || in_rv_wall(p)); }

    std::array<Vec3, 2> bounding_box() const {
        const double lv_r = lv_endo_radius + lv_wall;
        const double rv_rx = rv_endo_radius_x + rv_wall, rv_ry = rv_endo_radius_y + rv_wall;
        const double zmin = -std::max(lv_endo_length + lv_wall, rv_endo_length + rv_wall);
        return {Vec3(-(rv_offset + rv_rx), -std::max(lv_r, rv_ry), zmin),
                Vec3(std::max(lv_r, rv_rx - rv_offset), std::max(lv_r, rv_ry), base_height)};
    }
};

namespace detail {

// Arc length along an ellipse meridian (radial semi-axis a, axial semi-axis c)
// from the apex (u = 0) to polar parameter u, by composite Gauss-Legendre.
inline double meridian_arc(double a, double c, double u) {
    static constexpr std::array<double, 4> x{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                             0.8611363115940526};
    static constexpr std::array<double, 4> w{0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                             0.3478548451374538};
    constexpr int panels = 16;
    const double hstep = u / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * hstep;
        for (int k = 0; k < 4; ++k) {
            const double t = mid + 0.5 * hstep * x[k];
            sum += w[k] * std::sqrt(a * a * std::cos(t) * std::cos(t) + c * c * std::sin(t) * std::sin(t));
        }
    }
    return sum * 0.5 * hstep;
}

// Normalised apex-to-base arc of p on the family member through p.
inline double apicobasal(const SyntheticGeometry::Family& fam, const Vec3& p, double s, double base_z) {
    const Vec3 r = fam.radii(std::max(s, -0.9 * fam.endo_radii.minCoeff() / fam.wall));
    const Vec3 q = p - fam.center;
    const double nx = q.x() / r.x(), ny = q.y() / r.y();
    const double rho_n = std::hypot(nx, ny);
    const double u = std::atan2(rho_n, -q.z() / r.z());
    const double az = std::atan2(ny, nx);
    const double a = std::hypot(r.x() * std::cos(az), r.y() * std::sin(az));
    const double zb = std::clamp((base_z - fam.center.z()) / r.z(), -1.0, 1.0);
    const double ub = std::acos(-zb);
    const double total = meridian_arc(a, r.z(), ub);
    if (!(total > 0.0)) return 1.0;
    return std::clamp(meridian_arc(a, r.z(), u) / total, 0.0, 1.0);
}

inline double lv_rotational(const Vec3& p) {
    const double phi = std::atan2(p.y(), p.x());
    return wrap_rt((phi + 2.0 * std::numbers::pi / 3.0) / (2.0 * std::numbers::pi));
}

// RV chart: mirrored azimuth about the RV centre so that the septal side
// maps to 5/6 (matching the LV septum) and the free wall centre to 1/3.
inline double rv_rotational(const SyntheticGeometry::Family& rv, const Vec3& p) {
    const Vec3 q = p - rv.center;
    const double v = std::atan2(q.y() / rv.endo_radii.y(), q.x() / rv.endo_radii.x());
    return wrap_rt(5.0 / 6.0 - v / (2.0 * std::numbers::pi));
}

inline void keep_largest_component(Mesh& m) {
    const Topology topo = build_topology(m);
    int count = 0;
    const auto label = node_components(m, topo, &count);
    if (count <= 1) return;
    std::vector<std::size_t> size(count, 0);
    for (int l : label) ++size[l];
    const int keep = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
    std::vector<int> remap(m.node_count(), -1);
    std::vector<Vec3> nodes;
    for (std::size_t i = 0; i < m.node_count(); ++i)
        if (label[i] == keep) {
            remap[i] = static_cast<int>(nodes.size());
            nodes.push_back(m.nodes[i]);
        }
    std::vector<Tet> tets;
    for (const Tet& t : m.tets)
        if (label[t[0]] == keep) tets.push_back({remap[t[0]], remap[t[1]], remap[t[2]], remap[t[3]]});
    m.nodes = std::move(nodes);
    m.tets = std::move(tets);
}

// Freudenthal split of the unit cube: 6 tets along the main diagonal.
inline constexpr std::array<std::array<int, 3>, 6> axis_permutations{
    {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

struct GridTets {
    std::vector<Vec3> nodes;
    std::vector<Tet> tets;
};

// Kuhn-split cube grid over [lo, hi] with spacing h, keeping tets for which
// keep(centroid, max_z) holds. Grid planes pass through integer multiples of h.
template <class Keep>
GridTets grid_tets(const Vec3& lo, const Vec3& hi, double h, Keep&& keep) {
    const std::array<long, 3> i0{static_cast<long>(std::floor(lo.x() / h)) - 1,
                                 static_cast<long>(std::floor(lo.y() / h)) - 1,
                                 static_cast<long>(std::floor(lo.z() / h)) - 1};
    const std::array<long, 3> i1{static_cast<long>(std::ceil(hi.x() / h)) + 1,
                                 static_cast<long>(std::ceil(hi.y() / h)) + 1,
                                 static_cast<long>(std::ceil(hi.z() / h)) + 1};
    const long nx = i1[0] - i0[0] + 1, ny = i1[1] - i0[1] + 1;
    auto lin = [&](long i, long j, long k) { return (k - i0[2]) * nx * ny + (j - i0[1]) * nx + (i - i0[0]); };
    auto pos = [&](long i, long j, long k) {
        return Vec3(quantize9(static_cast<double>(i) * h), quantize9(static_cast<double>(j) * h),
                    quantize9(static_cast<double>(k) * h));
    };

    std::vector<std::array<long, 4>> raw;
    for (long k = i0[2]; k < i1[2]; ++k)
        for (long j = i0[1]; j < i1[1]; ++j)
            for (long i = i0[0]; i < i1[0]; ++i)
                for (const auto& perm : axis_permutations) {
                    std::array<long, 3> c{i, j, k};
                    std::array<long, 4> ids{};
                    Vec3 cen = Vec3::Zero();
                    double top = -std::numeric_limits<double>::infinity();
                    for (int v = 0; v < 4; ++v) {
                        if (v > 0) ++c[perm[v - 1]];
                        ids[v] = lin(c[0], c[1], c[2]);
                        const Vec3 p = pos(c[0], c[1], c[2]);
                        cen += p;
                        top = std::max(top, p.z());
                    }
                    if (keep(Vec3(cen / 4.0), top)) raw.push_back(ids);
                }

    std::vector<long> used;
    used.reserve(raw.size() * 4);
    for (const auto& t : raw) used.insert(used.end(), t.begin(), t.end());
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    std::unordered_map<long, int> id;
    id.reserve(used.size());
    GridTets out;
    out.nodes.reserve(used.size());
    for (long l : used) {
        id.emplace(l, static_cast<int>(out.nodes.size()));
        const long i = l % nx + i0[0];
        const long j = (l / nx) % ny + i0[1];
        const long k = l / (nx * ny) + i0[2];
        out.nodes.push_back(pos(i, j, k));
    }
    out.tets.reserve(raw.size());
    for (const auto& t : raw) {
        Tet tet{id.at(t[0]), id.at(t[1]), id.at(t[2]), id.at(t[3])};
        if (signed_volume(out.nodes[tet[0]], out.nodes[tet[1]], out.nodes[tet[2]], out.nodes[tet[3]]) < 0.0)
            std::swap(tet[2], tet[3]);
        out.tets.push_back(tet);
    }
    return out;
}

// Body-centred cubic lattice over [lo, hi] with cube edge a: cube corners
// and cube centres are nodes; every pair of face-adjacent centres spans an
// octahedron with the shared face, split into 4 tets around the centre
// axis. Mean edge length is bcc_mean_edge * a.
inline constexpr double bcc_mean_edge = (6.0 + 8.0 * 0.8660254037844386) / 14.0;

template <class Keep>
GridTets bcc_tets(const Vec3& lo, const Vec3& hi, double a, Keep&& keep) {
    // Doubled integer lattice: corners at even, centres at odd indices.
    const std::array<long, 3> i0{2 * (static_cast<long>(std::floor(lo.x() / a)) - 1),
                                 2 * (static_cast<long>(std::floor(lo.y() / a)) - 1),
                                 2 * (static_cast<long>(std::floor(lo.z() / a)) - 1)};
    const std::array<long, 3> i1{2 * (static_cast<long>(std::ceil(hi.x() / a)) + 1),
                                 2 * (static_cast<long>(std::ceil(hi.y() / a)) + 1),
                                 2 * (static_cast<long>(std::ceil(hi.z() / a)) + 1)};
    const long nx = i1[0] - i0[0] + 1, ny = i1[1] - i0[1] + 1;
    using Idx = std::array<long, 3>;
    auto lin = [&](const Idx& q) { return (q[2] - i0[2]) * nx * ny + (q[1] - i0[1]) * nx + (q[0] - i0[0]); };
    auto pos = [&](const Idx& q) {
        return Vec3(quantize9(0.5 * a * static_cast<double>(q[0])), quantize9(0.5 * a * static_cast<double>(q[1])),
                    quantize9(0.5 * a * static_cast<double>(q[2])));
    };
    static constexpr std::array<std::array<int, 2>, 4> square{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};

    std::vector<std::array<long, 4>> raw;
    for (long k = i0[2] + 1; k < i1[2]; k += 2)
        for (long j = i0[1] + 1; j < i1[1]; j += 2)
            for (long i = i0[0] + 1; i < i1[0]; i += 2)
                for (int ax = 0; ax < 3; ++ax) {
                    const Idx c{i, j, k};
                    Idx c2 = c;
                    c2[ax] += 2;
                    if (c2[ax] >= i1[ax]) continue;
                    const int b = (ax + 1) % 3, d = (ax + 2) % 3;
                    for (int e = 0; e < 4; ++e) {
                        Idx p = c, q = c;
                        p[ax] += 1;
                        q[ax] += 1;
                        p[b] += square[e][0];
                        p[d] += square[e][1];
                        q[b] += square[(e + 1) % 4][0];
                        q[d] += square[(e + 1) % 4][1];
                        const std::array<Idx, 4> vs{c, c2, p, q};
                        Vec3 cen = Vec3::Zero();
                        double top = -std::numeric_limits<double>::infinity();
                        std::array<long, 4> ids{};
                        for (int v = 0; v < 4; ++v) {
                            const Vec3 x = pos(vs[v]);
                            cen += x;
                            top = std::max(top, x.z());
                            ids[v] = lin(vs[v]);
                        }
                        if (keep(Vec3(cen / 4.0), top)) raw.push_back(ids);
                    }
                }

    std::vector<long> used;
    used.reserve(raw.size() * 4);
    for (const auto& t : raw) used.insert(used.end(), t.begin(), t.end());
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    std::unordered_map<long, int> id;
    id.reserve(used.size());
    GridTets out;
    out.nodes.reserve(used.size());
    for (long l : used) {
        id.emplace(l, static_cast<int>(out.nodes.size()));
        out.nodes.push_back(pos({l % nx + i0[0], (l / nx) % ny + i0[1], l / (nx * ny) + i0[2]}));
    }
    out.tets.reserve(raw.size());
    for (const auto& t : raw) {
        Tet tet{id.at(t[0]), id.at(t[1]), id.at(t[2]), id.at(t[3])};
        if (signed_volume(out.nodes[tet[0]], out.nodes[tet[1]], out.nodes[tet[2]], out.nodes[tet[3]]) < 0.0)
            std::swap(tet[2], tet[3]);
        out.tets.push_back(tet);
    }
    return out;
}

} // namespace detail

/// Analytic coordinates of a point of the synthetic geometry. `side`
/// selects the chart; tm is clamped to [0,1].
inline CobivecoCoord synthetic_coordinate(const SyntheticGeometry& g, const Vec3& p, Side side) {
    if (side == Side::LV) {
        const auto fam = g.lv_family();
        const double s = fam.level(p);
        return {std::clamp(1.0 - s, 0.0, 1.0), detail::apicobasal(fam, p, s, g.base_height),
                detail::lv_rotational(p), Side::LV};
    }
    const auto fam = g.rv_family();
    const double s = fam.level(p);
    return {std::clamp(1.0 - s, 0.0, 1.0), detail::apicobasal(fam, p, s, g.base_height),
            detail::rv_rotational(fam, p), Side::RV};
}

/// Chamber chart of a point: RV for the free wall, i.e. more than `slack`
/// cm outside the LV epicardial ellipsoid and within `slack` of the RV wall
/// shell. The whole septum belongs to the LV chart.
inline Side synthetic_side(const SyntheticGeometry& g, const Vec3& p, double slack) {
    if (g.lv_family().level(p) <= 1.0 + slack / g.lv_wall) return Side::LV;
    const double s_rv = g.rv_family().level(p);
    const double tol = slack / g.rv_wall;
    return s_rv >= -tol && s_rv <= 1.0 + tol ? Side::RV : Side::LV;
}

/// Two-cavity truncated-ellipsoid mesh with analytically assigned
/// coordinates, surface tags and endocardial layer flags.
inline Mesh generate_synthetic_biventricle(double resolution, const SyntheticGeometry& g = {}) {
    if (!(resolution > 0.0)) throw ParameterError("resolution must be positive, got " + std::to_string(resolution));
    g.validate();
    const double h = resolution;
    const auto box = g.bounding_box();
    auto grid = detail::bcc_tets(box[0], box[1], h / detail::bcc_mean_edge, [&](const Vec3& c, double top) {
        return top <= g.base_height + 1e-9 && g.contains(c);
    });
    if (grid.tets.empty()) throw ParameterError("resolution too coarse: no tets inside the myocardium");

    Mesh m;
    m.nodes = std::move(grid.nodes);
    m.tets = std::move(grid.tets);
    detail::keep_largest_component(m);
    const std::size_t n = m.node_count();

    // Tag each boundary face with the analytic surface nearest its centroid.
    m.surface_tags.assign(n, surface::none);
    const auto lv = g.lv_family();
    const auto rv = g.rv_family();
    for (const Face& f : boundary_faces(m)) {
        const Vec3 c = (m.nodes[f.nodes[0]] + m.nodes[f.nodes[1]] + m.nodes[f.nodes[2]]) / 3.0;
        const double s_lv = lv.level(c), s_rv = rv.level(c);
        const bool septal = s_rv < 0.5;
        std::array<std::pair<double, std::uint8_t>, 5> cand{{
            {std::fabs(c.z() - g.base_height), surface::base},
            {std::fabs(s_lv) * g.lv_wall, surface::lv_endocardium},
            {std::fabs(s_lv - 1.0) * g.lv_wall, septal ? surface::rv_endocardium : surface::epicardium},
            {s_lv > 1.0 ? std::fabs(s_rv) * g.rv_wall : 1e300, surface::rv_endocardium},
            {s_lv > 1.0 ? std::fabs(s_rv - 1.0) * g.rv_wall : 1e300, surface::epicardium},
        }};
        const auto best = *std::min_element(cand.begin(), cand.end(),
                                            [](const auto& a, const auto& b) { return a.first < b.first; });
        for (int v : f.nodes) m.surface_tags[v] |= best.second;
    }

    m.coords.resize(n);
    m.endo_layer.assign(n, EndoLayer::none);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = m.nodes[i];
        CobivecoCoord c = synthetic_coordinate(g, p, synthetic_side(g, p, h));
        if (m.surface_tags[i] & surface::epicardium) c.tm = 0.0;
        c.tm = quantize9(c.tm);
        c.ab = quantize9(c.ab);
        c.rt = wrap_rt(quantize9(c.rt));
        m.coords[i] = c;
        const auto tags = m.surface_tags[i];
        if ((tags & surface::endocardium) && !(tags & surface::epicardium))
            m.endo_layer[i] = c.ab <= g.dense_layer_max_ab ? EndoLayer::dense : EndoLayer::sparse;
    }

    // The apex-most node (lowest, then closest to the long axis) anchors ab = 0.
    std::size_t apex = 0;
    for (std::size_t i = 1; i < n; ++i) {
        const auto key = [&](std::size_t k) { return std::pair(m.nodes[k].z(), m.nodes[k].head<2>().norm()); };
        if (key(i) < key(apex)) apex = i;
    }
    m.coords[apex].ab = 0.0;

    validate_mesh(m);
    return m;
}

/// Box [0, nx*h] x [0, ny*h] x [0, nz*h] shifted by `origin`, Kuhn-split.
/// Coordinates are normalised positions (tm along x, ab along z, rt along
/// y scaled into [0,1)); all boundary nodes are tagged epicardium.
inline Mesh make_box_mesh(int nx, int ny, int nz, double h, const Vec3& origin = Vec3::Zero()) {
    if (nx < 1 || ny < 1 || nz < 1 || !(h > 0.0)) throw ParameterError("make_box_mesh: invalid dimensions");
    const Vec3 lo(0, 0, 0), hi(nx * h, ny * h, nz * h);
    auto grid = detail::grid_tets(lo, hi, h, [&](const Vec3& c, double) {
        return c.x() > 0 && c.y() > 0 && c.z() > 0 && c.x() < hi.x() && c.y() < hi.y() && c.z() < hi.z();
    });
    Mesh m;
    m.nodes = std::move(grid.nodes);
    m.tets = std::move(grid.tets);
    const std::size_t n = m.node_count();
    m.coords.resize(n);
    m.surface_tags.assign(n, surface::none);
    m.endo_layer.assign(n, EndoLayer::none);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 q = m.nodes[i].cwiseQuotient(hi);
        m.coords[i] = {std::clamp(q.x(), 0.0, 1.0), std::clamp(q.z(), 0.0, 1.0), std::clamp(q.y(), 0.0, 1.0) * 0.999,
                       Side::LV};
        m.nodes[i] += origin;
    }
    for (const Face& f : boundary_faces(m))
        for (int v : f.nodes) m.surface_tags[v] |= surface::epicardium;
    validate_mesh(m);
    return m;
}

} // namespace qrsim
