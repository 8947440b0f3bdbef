#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qrsim/coords.hpp"
#include "qrsim/errors.hpp"
#include "qrsim/fibers.hpp"
#include "qrsim/mesh.hpp"
#include "qrsim/scenario.hpp"

namespace qrsim {

inline constexpr double infinite_time = std::numeric_limits<double>::infinity();

struct RootNode {
    std::string name;
    CobivecoCoord location;
    double pk_delay = 0.0; // ms
};

/// Seven endocardial sites: four LV, three RV. RV mid-septum is matched on
/// the septal RV surface, which carries LV-chart (ab, rt) values.
inline std::vector<RootNode> default_roots() {
    return {
        {"lv_mid_septum", {1.0, 0.5, 5.0 / 6.0, Side::LV}, 0.0},
        {"lv_basal_anterior_paraseptal", {1.0, 0.8, 0.62, Side::LV}, 0.0},
        {"lv_mid_posterior_1", {1.0, 0.5, 0.04, Side::LV}, 0.0},
        {"lv_mid_posterior_2", {1.0, 0.5, 0.17, Side::LV}, 0.0},
        {"rv_mid_septum", {1.0, 0.5, 5.0 / 6.0, Side::RV}, 0.0},
        {"rv_free_wall_1", {1.0, 0.6, 0.25, Side::RV}, 0.0},
        {"rv_free_wall_2", {1.0, 0.6, 0.45, Side::RV}, 0.0},
    };
}

/// Delays shifted so the earliest root starts at 0.
inline std::vector<double> normalize_root_times(const std::vector<RootNode>& roots) {
    if (roots.empty()) throw ParameterError("at least one root node is required");
    double lo = infinite_time;
    for (const auto& r : roots) {
        if (!(r.pk_delay >= 0.0) || !std::isfinite(r.pk_delay))
            throw ParameterError("root '" + r.name + "': delay must be finite and >= 0");
        lo = std::min(lo, r.pk_delay);
    }
    std::vector<double> out;
    out.reserve(roots.size());
    for (const auto& r : roots) out.push_back(r.pk_delay - lo);
    return out;
}

struct SnappedRoot {
    int node = -1;
    double residual = 0.0;  // (ab, rt) distance to the matched node
    double tolerance = 0.0; // 2 x local (ab, rt) edge length
};

/// Nearest endocardial node of the root's chamber in (ab, rt); the match
/// must lie within twice the mean (ab, rt) length of the node's edges.
inline SnappedRoot snap_root(const Mesh& m, const Topology& topo, const RootNode& r) {
    validate(r.location, "root '" + r.name + "'");
    const std::uint8_t want = r.location.side == Side::LV ? surface::lv_endocardium : surface::rv_endocardium;
    auto dist = [](const CobivecoCoord& a, const CobivecoCoord& b) {
        return std::hypot(a.ab - b.ab, rt_distance(a.rt, b.rt));
    };
    SnappedRoot best;
    double bd = infinite_time;
    for (std::size_t v = 0; v < m.node_count(); ++v) {
        if (!(m.surface_tags[v] & want)) continue;
        if (want == surface::lv_endocardium && m.coords[v].side != Side::LV) continue;
        const double d = dist(m.coords[v], r.location);
        if (d < bd) {
            bd = d;
            best.node = static_cast<int>(v);
        }
    }
    if (best.node < 0)
        throw ValidationError("root '" + r.name + "': mesh has no " + std::string(to_string(r.location.side)) +
                              " endocardial nodes");
    double len = 0.0;
    int k = 0;
    for (int w : topo.neighbors_of(best.node)) {
        len += dist(m.coords[best.node], m.coords[w]);
        ++k;
    }
    best.residual = bd;
    best.tolerance = k > 0 ? 2.0 * len / k : 0.0;
    if (!(bd < best.tolerance)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "root '%s': nearest endocardial node %d is %.4g away in (ab, rt), limit %.4g",
                      r.name.c_str(), best.node, bd, best.tolerance);
        throw ValidationError(buf);
    }
    return best;
}

/// Per-element traversal metric M = sum d d^T / v^2 (v in cm/ms), so that
/// sqrt(e^T M e) is the time in ms to cross the vector e (cm).
inline Mat3 velocity_metric(const FiberFrame& fr, const std::array<double, 3>& v_cm_per_s) {
    Mat3 M = Mat3::Zero();
    const Vec3* dirs[3] = {&fr.f, &fr.s, &fr.n};
    for (int i = 0; i < 3; ++i) {
        const double v = v_cm_per_s[i] / 1000.0;
        M += (*dirs[i]) * dirs[i]->transpose() / (v * v);
    }
    return M;
}

inline double traversal_time(const Mat3& M, const Vec3& e) { return std::sqrt(std::max(0.0, e.dot(M * e))); }

namespace detail {

// min over p on segment [a, b] of T(p) + |x - p|_M with T linear, where
// d = x - b, e = a - b, delta = t_a - t_b. Returns +inf if the stationary
// point is not strictly inside.
inline double edge_stationary(const Mat3& M, const Vec3& d, const Vec3& e, double tb, double delta) {
    const double alpha = e.dot(M * e), beta = e.dot(M * d), gamma = d.dot(M * d);
    const double den = alpha - delta * delta;
    if (!(alpha > 0.0) || !(den > 0.0)) return infinite_time;
    const double num = alpha * gamma - beta * beta;
    const double N = std::sqrt(std::max(0.0, num) / den);
    const double s = (beta - N * delta) / alpha;
    if (!(s > 0.0 && s < 1.0)) return infinite_time;
    return tb + s * delta + traversal_time(M, d - s * e);
}

// Same over the triangle (a, b, c); d = x - c, columns of E = a - c, b - c.
inline double face_stationary(const Mat3& M, const Vec3& d, const Vec3& ea, const Vec3& eb, double tc,
                              const Eigen::Vector2d& delta) {
    Eigen::Matrix<double, 3, 2> E;
    E.col(0) = ea;
    E.col(1) = eb;
    const Eigen::Matrix2d A = E.transpose() * M * E;
    const double det = A.determinant();
    if (!(det > 1e-300)) return infinite_time;
    const Eigen::Matrix2d Ai = A.inverse();
    const Eigen::Vector2d b = E.transpose() * (M * d);
    const double gamma = d.dot(M * d);
    const double c0 = gamma - b.dot(Ai * b);
    const double den = 1.0 - delta.dot(Ai * delta);
    if (!(den > 0.0)) return infinite_time;
    const double N = std::sqrt(std::max(0.0, c0) / den);
    const Eigen::Vector2d lam = Ai * (b - N * delta);
    if (!(lam[0] > 0.0 && lam[1] > 0.0 && lam[0] + lam[1] < 1.0)) return infinite_time;
    return tc + lam.dot(delta) + traversal_time(M, d - E * lam);
}

} // namespace detail

/// Arrival time at x through the opposite face of a tet whose other three
/// vertices p[i] carry times t[i] (+inf allowed). The minimum of the convex
/// cost over the face is found among the interior stationary point, the
/// edge stationary points and the vertices. Vertices with interp[i] false
/// only contribute their own vertex candidate.
inline double local_update(const Mat3& M, const Vec3& x, const std::array<Vec3, 3>& p, const std::array<double, 3>& t,
                           const std::array<bool, 3>& interp = {true, true, true}) {
    double best = infinite_time;
    for (int i = 0; i < 3; ++i)
        if (std::isfinite(t[i])) best = std::min(best, t[i] + traversal_time(M, x - p[i]));
    std::array<bool, 3> ok;
    for (int i = 0; i < 3; ++i) ok[i] = interp[i] && std::isfinite(t[i]);
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        if (!ok[i] || !ok[j]) continue;
        best = std::min(best, detail::edge_stationary(M, x - p[j], p[i] - p[j], t[j], t[i] - t[j]));
    }
    if (ok[0] && ok[1] && ok[2])
        best = std::min(best, detail::face_stationary(M, x - p[2], p[0] - p[2], p[1] - p[2], t[2],
                                                      Eigen::Vector2d(t[0] - t[2], t[1] - t[2])));
    return best;
}

struct ActivationMap {
    std::vector<double> time; // ms, per node
    std::vector<int> root_nodes;

    double min() const { return *std::min_element(time.begin(), time.end()); }
    double max() const { return *std::max_element(time.begin(), time.end()); }
    double mean() const {
        double s = 0.0;
        for (double t : time) s += t;
        return time.empty() ? 0.0 : s / static_cast<double>(time.size());
    }
};

struct EikonalOptions {
    double tolerance = 1e-12; // ms; smaller improvements are ignored
    double source_radius = 0.5; // cm, see seed_sources
};

// Endocardial layer edges with their isotropic traversal time.
struct LayerEdge {
    int to;
    double time;
};

inline std::vector<std::vector<LayerEdge>> layer_edges(const Mesh& m, const CVField& cv) {
    std::vector<std::vector<LayerEdge>> out(m.node_count());
    for (const auto& [a, b] : mesh_edges(m)) {
        if (m.endo_layer[a] == EndoLayer::none || m.endo_layer[b] == EndoLayer::none) continue;
        const double v = std::min(cv.endo_speed[a], cv.endo_speed[b]) / 1000.0;
        const double t = (m.nodes[a] - m.nodes[b]).norm() / v;
        out[a].push_back({b, t});
        out[b].push_back({a, t});
    }
    return out;
}

inline void validate_cv_field(const Mesh& m, const CVField& cv) {
    if (cv.element_speed.size() != m.tet_count() || cv.endo_speed.size() != m.node_count())
        throw ValidationError("CV field size does not match the mesh");
    for (std::size_t e = 0; e < cv.element_speed.size(); ++e)
        for (double v : cv.element_speed[e])
            if (!(v > 0.0) || !std::isfinite(v))
                throw ValidationError("element " + std::to_string(e) + " has a non-positive conduction velocity");
    for (std::size_t n = 0; n < m.node_count(); ++n)
        if (m.endo_layer[n] != EndoLayer::none && !(cv.endo_speed[n] > 0.0))
            throw ValidationError("endocardial node " + std::to_string(n) + " has a non-positive layer speed");
}

// Point-source treatment. Around a root whose neighbourhood has a single
// metric, nodes within `radius` whose tets all carry that metric, reached
// through such nodes, start from the straight-line time, which is exact there.
inline void seed_sources(const Mesh& m, const Topology& topo, const std::vector<Mat3>& metric,
                         const std::vector<int>& roots, double radius, std::vector<double>& time) {
    const std::vector<double> start = time;
    std::vector<int> mark(m.node_count(), -1);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        const int r = roots[i];
        const Mat3& M = metric[topo.tets_of(r).front()];
        const double scale = M.norm();
        auto homogeneous = [&](int v) {
            for (int e : topo.tets_of(v))
                if ((metric[e] - M).norm() > 1e-12 * scale) return false;
            return true;
        };
        if (!homogeneous(r)) continue;
        std::vector<int> stack{r};
        mark[r] = static_cast<int>(i);
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            if (!homogeneous(u)) continue;
            time[u] = std::min(time[u], start[r] + traversal_time(M, m.nodes[u] - m.nodes[r]));
            for (int w : topo.neighbors_of(u))
                if (mark[w] != static_cast<int>(i) && (m.nodes[w] - m.nodes[r]).norm() <= radius) {
                    mark[w] = static_cast<int>(i);
                    stack.push_back(w);
                }
        }
    }
}

/// Label-correcting solve: nodes are popped in time order and every tet
/// around a popped node re-solves its other vertices; improved nodes are
/// re-queued until no update improves any node.
inline ActivationMap solve_eikonal(const Mesh& m, const std::vector<FiberFrame>& fibers, const CVField& cv,
                                   const std::vector<int>& root_nodes, const std::vector<double>& root_times,
                                   const EikonalOptions& opt = {}) {
    if (fibers.size() != m.tet_count()) throw ValidationError("fiber field size does not match the mesh");
    validate_cv_field(m, cv);
    if (root_nodes.empty() || root_nodes.size() != root_times.size())
        throw ParameterError("root node and root time lists must be non-empty and of equal length");

    const Topology topo = build_topology(m);
    std::vector<Mat3> metric(m.tet_count());
    for (std::size_t e = 0; e < m.tet_count(); ++e) metric[e] = velocity_metric(fibers[e], cv.element_speed[e]);
    const auto layer = layer_edges(m, cv);

    // A node touching a faster element than e carries times from that
    // faster medium; interpolating them across e's faces would let the slow
    // element inherit the fast front, so inside e such a node is used as a
    // point source only.
    std::vector<double> tet_speed(m.tet_count()), node_speed(m.node_count(), 0.0);
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        const auto& v = cv.element_speed[e];
        tet_speed[e] = std::max({v[0], v[1], v[2]});
        for (int n : m.tets[e]) node_speed[n] = std::max(node_speed[n], tet_speed[e]);
    }

    ActivationMap out;
    out.time.assign(m.node_count(), infinite_time);
    out.root_nodes = root_nodes;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (std::size_t i = 0; i < root_nodes.size(); ++i) {
        const int r = root_nodes[i];
        if (r < 0 || static_cast<std::size_t>(r) >= m.node_count())
            throw ParameterError("root node index " + std::to_string(r) + " out of range");
        if (root_times[i] < out.time[r]) out.time[r] = root_times[i];
    }
    if (opt.source_radius > 0.0) seed_sources(m, topo, metric, root_nodes, opt.source_radius, out.time);
    for (std::size_t v = 0; v < m.node_count(); ++v)
        if (std::isfinite(out.time[v])) queue.push({out.time[v], static_cast<int>(v)});

    auto offer = [&](int v, double t) {
        if (t < out.time[v] - opt.tolerance) {
            out.time[v] = t;
            queue.push({t, v});
        }
    };

    while (!queue.empty()) {
        const auto [tu, u] = queue.top();
        queue.pop();
        if (tu > out.time[u]) continue;
        for (int e : topo.tets_of(u)) {
            const Tet& tet = m.tets[e];
            for (int k = 0; k < 4; ++k) {
                const int v = tet[k];
                if (v == u) continue;
                std::array<Vec3, 3> p;
                std::array<double, 3> t;
                std::array<bool, 3> interp;
                for (int j = 0, q = 0; j < 4; ++j) {
                    if (j == k) continue;
                    p[q] = m.nodes[tet[j]];
                    interp[q] = node_speed[tet[j]] <= tet_speed[e] * (1.0 + 1e-12);
                    t[q++] = out.time[tet[j]];
                }
                offer(v, local_update(metric[e], m.nodes[v], p, t, interp));
            }
        }
        for (const auto& le : layer[u]) offer(le.to, out.time[u] + le.time);
    }

    std::vector<int> missing;
    for (std::size_t v = 0; v < m.node_count(); ++v)
        if (!std::isfinite(out.time[v])) missing.push_back(static_cast<int>(v));
    if (!missing.empty()) {
        std::string ids;
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) ids += (i ? "," : "") + std::to_string(missing[i]);
        if (missing.size() > 20) ids += ",...";
        throw UnreachableError(std::to_string(missing.size()) + " nodes unreachable from the roots: " + ids);
    }
    return out;
}

/// Snaps the roots to endocardial nodes and solves from their normalized
/// delays.
inline ActivationMap solve_eikonal(const Mesh& m, const std::vector<FiberFrame>& fibers, const CVField& cv,
                                   const std::vector<RootNode>& roots, const EikonalOptions& opt = {}) {
    const auto times = normalize_root_times(roots);
    const Topology topo = build_topology(m);
    std::vector<int> nodes;
    for (const auto& r : roots) nodes.push_back(snap_root(m, topo, r).node);
    return solve_eikonal(m, fibers, cv, nodes, times, opt);
}

/// "node_id time_ms" lines, 6 decimals.
inline void write_activation(const ActivationMap& a, std::ostream& out) {
    char buf[64];
    for (std::size_t i = 0; i < a.time.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu %.6f\n", i, a.time[i]);
        out << buf;
    }
}

inline void write_activation(const ActivationMap& a, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_activation(a, out);
}

} // namespace qrsim
