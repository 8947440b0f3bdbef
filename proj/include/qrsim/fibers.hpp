#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "qrsim/errors.hpp"
#include "qrsim/mesh.hpp"

namespace qrsim {

// Orthonormal right-handed triad: fiber, sheet (transmural), sheet-normal.
struct FiberFrame {
    Vec3 f = Vec3::UnitX();
    Vec3 s = Vec3::UnitY();
    Vec3 n = Vec3::UnitZ();
};

struct FiberAngles {
    double alpha_endo = 60.0; // degrees, at tm = 1
    double alpha_epi = -60.0; // degrees, at tm = 0

    void validate() const {
        if (!(alpha_endo >= -90.0 && alpha_endo <= 90.0) || !(alpha_epi >= -90.0 && alpha_epi <= 90.0))
            throw ParameterError("fiber angles must lie in [-90, 90] degrees");
    }
};

/// Helix angle (degrees) at transmural depth tm, linear in tm.
inline double fiber_angle(const FiberAngles& a, double tm) { return a.alpha_epi + (a.alpha_endo - a.alpha_epi) * tm; }

// Ratio below which the tangent plane (apicobasal direction with the
// transmural component removed) counts as degenerate.
inline constexpr double tangent_condition_threshold = 1e-6;

// Neighbour-averaging passes applied to the nodal direction fields.
inline constexpr int smoothing_passes = 3;

namespace detail {

// Nodal gradient of a field: volume-weighted mean of incident element
// gradients restricted to elements of the node's chamber chart.
inline std::vector<Vec3> nodal_gradient(const Mesh& m, const Topology& topo, const std::vector<Vec3>& grad,
                                        const std::vector<double>& vol, const std::vector<CobivecoCoord>& ec) {
    std::vector<Vec3> out(m.node_count(), Vec3::Zero());
    for (std::size_t v = 0; v < m.node_count(); ++v) {
        Vec3 acc = Vec3::Zero(), any = Vec3::Zero();
        double w = 0.0;
        for (int e : topo.tets_of(static_cast<int>(v))) {
            any += vol[e] * grad[e];
            if (ec[e].side != m.coords[v].side) continue;
            acc += vol[e] * grad[e];
            w += vol[e];
        }
        out[v] = w > 0.0 ? acc : any;
    }
    return out;
}

// Jacobi averaging of a nodal vector field over same-chart neighbours.
inline void smooth_nodal(const Mesh& m, const Topology& topo, std::vector<Vec3>& field, int passes) {
    std::vector<Vec3> next(field.size());
    for (int p = 0; p < passes; ++p) {
        for (std::size_t v = 0; v < field.size(); ++v) {
            Vec3 acc = field[v];
            for (int w : topo.neighbors_of(static_cast<int>(v)))
                if (m.coords[w].side == m.coords[v].side) acc += field[w];
            next[v] = acc;
        }
        field.swap(next);
    }
}

} // namespace detail

/// Per-element frames by a rule-based transmural rotation: s follows the
/// transmural gradient, the fiber rotates linearly in tm within the tangent
/// plane spanned by the circumferential and apicobasal directions.
/// Elements with a degenerate tangent plane copy the frame of the nearest
/// (by centroid) well-conditioned element.
inline std::vector<FiberFrame> assign_fibers(const Mesh& m, const FiberAngles& angles = {}) {
    angles.validate();
    const std::size_t ne = m.tet_count();
    const Topology topo = build_topology(m);
    std::vector<double> tm(m.node_count()), ab(m.node_count());
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        tm[i] = m.coords[i].tm;
        ab[i] = m.coords[i].ab;
    }
    const auto ec = element_coordinates(m);
    std::vector<double> vol(ne);
    for (std::size_t e = 0; e < ne; ++e) vol[e] = signed_volume(m, e);
    auto g_tm = detail::nodal_gradient(m, topo, element_gradient(m, tm), vol, ec);
    auto g_ab = detail::nodal_gradient(m, topo, element_gradient(m, ab), vol, ec);
    detail::smooth_nodal(m, topo, g_tm, smoothing_passes);
    detail::smooth_nodal(m, topo, g_ab, smoothing_passes);

    std::vector<FiberFrame> frames(ne);
    std::vector<char> ok(ne, 0);
    for (std::size_t e = 0; e < ne; ++e) {
        Vec3 gt = Vec3::Zero(), ga = Vec3::Zero();
        int used = 0;
        for (int v : m.tets[e]) {
            if (m.coords[v].side != ec[e].side) continue;
            gt += g_tm[v];
            ga += g_ab[v];
            ++used;
        }
        if (used == 0) continue;
        const double gt_norm = gt.norm(), ga_norm = ga.norm();
        if (!(gt_norm > 0.0) || !(ga_norm > 0.0)) continue;
        const Vec3 s = gt / gt_norm;
        Vec3 l = ga - ga.dot(s) * s;
        if (!(l.norm() / ga_norm >= tangent_condition_threshold)) continue;
        l.normalize();
        const Vec3 c = l.cross(s);
        const double a = fiber_angle(angles, ec[e].tm) * std::numbers::pi / 180.0;
        Vec3 f = std::cos(a) * c + std::sin(a) * l;
        f.normalize();
        frames[e] = {f, s, f.cross(s).normalized()};
        ok[e] = 1;
    }

    std::vector<std::size_t> good;
    for (std::size_t e = 0; e < ne; ++e)
        if (ok[e]) good.push_back(e);
    if (good.empty()) throw ValidationError("assign_fibers: no element has a well-conditioned tangent plane");
    for (std::size_t e = 0; e < ne; ++e) {
        if (ok[e]) continue;
        const Vec3 c = centroid(m, e);
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = good.front();
        for (std::size_t g : good) {
            const double d = (centroid(m, g) - c).squaredNorm();
            if (d < best) {
                best = d;
                pick = g;
            }
        }
        frames[e] = frames[pick];
    }
    return frames;
}

/// Signed in-plane angle (degrees) of the fiber relative to the
/// circumferential direction of the frame's tangent plane.
inline double in_plane_angle(const FiberFrame& fr, const Vec3& apicobasal) {
    Vec3 l = apicobasal - apicobasal.dot(fr.s) * fr.s;
    l.normalize();
    const Vec3 c = l.cross(fr.s);
    return std::atan2(fr.f.dot(l), fr.f.dot(c)) * 180.0 / std::numbers::pi;
}

} // namespace qrsim
