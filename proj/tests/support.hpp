#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qrsim/config.hpp"
#include "qrsim/eikonal.hpp"
#include "qrsim/fibers.hpp"
#include "qrsim/mesh.hpp"
#include "qrsim/scenario.hpp"
#include "qrsim/synthetic.hpp"

#ifndef QRSIM_SOURCE_DIR
#define QRSIM_SOURCE_DIR "."
#endif

namespace testing_support {

using namespace qrsim;

inline std::string source_path(const std::string& rel) { return std::string(QRSIM_SOURCE_DIR) + "/" + rel; }

inline ExperimentConfig default_config() { return load_config(source_path("configs/default.json")); }

inline const Mesh& default_mesh() {
    static const Mesh m = generate_synthetic_biventricle(0.2);
    return m;
}

inline const std::vector<FiberFrame>& default_fibers() {
    static const std::vector<FiberFrame> f = assign_fibers(default_mesh());
    return f;
}

// Coarse synthetic mesh with fewer than 2k nodes.
inline const Mesh& small_mesh() {
    static const Mesh m = generate_synthetic_biventricle(0.5);
    return m;
}

inline CVField isotropic_field(const Mesh& m, double v) {
    CVField f;
    f.element_speed.assign(m.tet_count(), {v, v, v});
    f.zone.assign(m.tet_count(), Zone::healthy);
    f.endo_speed.assign(m.node_count(), 0.0);
    return f;
}

inline Mesh without_layer(Mesh m) {
    std::fill(m.endo_layer.begin(), m.endo_layer.end(), EndoLayer::none);
    return m;
}

// Plain Dijkstra over an explicit weighted graph.
struct Graph {
    std::vector<std::vector<std::pair<int, double>>> adj;

    explicit Graph(std::size_t n) : adj(n) {}
    void add(int a, int b, double w) {
        adj[a].emplace_back(b, w);
        adj[b].emplace_back(a, w);
    }
    std::vector<double> shortest(const std::vector<int>& src, const std::vector<double>& t0) const {
        std::vector<double> d(adj.size(), std::numeric_limits<double>::infinity());
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
        for (std::size_t i = 0; i < src.size(); ++i)
            if (t0[i] < d[src[i]]) {
                d[src[i]] = t0[i];
                q.emplace(t0[i], src[i]);
            }
        while (!q.empty()) {
            auto [t, u] = q.top();
            q.pop();
            if (t > d[u]) continue;
            for (auto [v, w] : adj[u])
                if (t + w < d[v]) {
                    d[v] = t + w;
                    q.emplace(d[v], v);
                }
        }
        return d;
    }
};

inline Mat3 tet_metric(const FiberFrame& fr, const std::array<double, 3>& v_cm_per_s) {
    Mat3 M = Mat3::Zero();
    const Vec3 dirs[3] = {fr.f, fr.s, fr.n};
    for (int i = 0; i < 3; ++i) {
        const double v = v_cm_per_s[i] / 1000.0;
        M += dirs[i] * dirs[i].transpose() / (v * v);
    }
    return M;
}

inline double metric_length(const Mat3& M, const Vec3& e) { return std::sqrt(e.dot(M * e)); }

// Endocardial layer links: both ends in the layer, isotropic speed equal to
// the slower end.
inline void add_layer_edges(Graph& g, const Mesh& m, const CVField& cv) {
    for (const auto& [a, b] : mesh_edges(m)) {
        if (m.endo_layer[a] == EndoLayer::none || m.endo_layer[b] == EndoLayer::none) continue;
        const double v = std::min(cv.endo_speed[a], cv.endo_speed[b]) / 1000.0;
        g.add(a, b, (m.nodes[a] - m.nodes[b]).norm() / v);
    }
}

/// Mesh edges weighted by the cheapest incident tet metric, plus layer links.
inline Graph edge_graph(const Mesh& m, const std::vector<FiberFrame>& fib, const CVField& cv) {
    std::map<std::pair<int, int>, double> w;
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        const Mat3 M = tet_metric(fib[e], cv.element_speed[e]);
        const auto& t = m.tets[e];
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                const auto key = std::minmax(t[i], t[j]);
                const double len = metric_length(M, m.nodes[t[i]] - m.nodes[t[j]]);
                auto [it, fresh] = w.emplace(key, len);
                if (!fresh) it->second = std::min(it->second, len);
            }
    }
    Graph g(m.node_count());
    for (const auto& [k, len] : w) g.add(k.first, k.second, len);
    add_layer_edges(g, m, cv);
    return g;
}

/// Once-refined graph: edge midpoints become extra vertices and every pair
/// of the 10 points of a tet is linked with that tet's metric. Vertex ids
/// [0, n) are the mesh nodes.
inline Graph refined_graph(const Mesh& m, const std::vector<FiberFrame>& fib, const CVField& cv) {
    std::map<std::pair<int, int>, int> mid;
    std::vector<Vec3> pos(m.nodes.begin(), m.nodes.end());
    for (const auto& [a, b] : mesh_edges(m)) {
        mid[{a, b}] = static_cast<int>(pos.size());
        pos.push_back(0.5 * (m.nodes[a] + m.nodes[b]));
    }
    Graph g(pos.size());
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        const Mat3 M = tet_metric(fib[e], cv.element_speed[e]);
        const auto& t = m.tets[e];
        std::vector<int> pts(t.begin(), t.end());
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                const auto [a, b] = std::minmax(t[i], t[j]);
                pts.push_back(mid.at({a, b}));
            }
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                g.add(pts[i], pts[j], metric_length(M, pos[pts[i]] - pos[pts[j]]));
    }
    // The endocardial layer is a surface: on each boundary triangle of layer
    // nodes, the 6 points are linked at the triangle's slowest layer speed.
    for (const Face& f : boundary_faces(m)) {
        const auto& n = f.nodes;
        if (m.endo_layer[n[0]] == EndoLayer::none || m.endo_layer[n[1]] == EndoLayer::none ||
            m.endo_layer[n[2]] == EndoLayer::none)
            continue;
        const double v = std::min({cv.endo_speed[n[0]], cv.endo_speed[n[1]], cv.endo_speed[n[2]]}) / 1000.0;
        std::vector<int> pts(n.begin(), n.end());
        for (int i = 0; i < 3; ++i) {
            const auto [a, b] = std::minmax(n[i], n[(i + 1) % 3]);
            pts.push_back(mid.at({a, b}));
        }
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) g.add(pts[i], pts[j], (pos[pts[i]] - pos[pts[j]]).norm() / v);
    }
    add_layer_edges(g, m, cv);
    return g;
}

/// Point-in-mesh queries on a uniform bucket grid of tet bounding boxes.
class Locator {
public:
    Locator(const Mesh& m, double cell) : m_(m), cell_(cell) {
        for (std::size_t e = 0; e < m.tet_count(); ++e) {
            Vec3 lo = m.nodes[m.tets[e][0]], hi = lo;
            for (int v : m.tets[e]) {
                lo = lo.cwiseMin(m.nodes[v]);
                hi = hi.cwiseMax(m.nodes[v]);
            }
            const auto a = index(lo), b = index(hi);
            for (long i = a[0]; i <= b[0]; ++i)
                for (long j = a[1]; j <= b[1]; ++j)
                    for (long k = a[2]; k <= b[2]; ++k) buckets_[key({i, j, k})].push_back(static_cast<int>(e));
        }
    }

    bool inside(const Vec3& p) const {
        const auto it = buckets_.find(key(index(p)));
        if (it == buckets_.end()) return false;
        for (int e : it->second) {
            const auto& t = m_.tets[e];
            std::array<Vec3, 4> q{m_.nodes[t[0]], m_.nodes[t[1]], m_.nodes[t[2]], m_.nodes[t[3]]};
            const double vol = signed_volume(q[0], q[1], q[2], q[3]);
            bool ok = true;
            for (int f = 0; f < 4 && ok; ++f) {
                auto r = q;
                r[f] = p;
                ok = signed_volume(r[0], r[1], r[2], r[3]) >= -1e-9 * vol;
            }
            if (ok) return true;
        }
        return false;
    }

    /// Straight segment a-b stays inside the mesh (sampled every `step` cm).
    bool visible(const Vec3& a, const Vec3& b, double step) const {
        const double len = (b - a).norm();
        const int n = std::max(2, static_cast<int>(len / step));
        for (int k = 1; k < n; ++k)
            if (!inside(a + (b - a) * (static_cast<double>(k) / n))) return false;
        return true;
    }

private:
    std::array<long, 3> index(const Vec3& p) const {
        return {static_cast<long>(std::floor(p.x() / cell_)), static_cast<long>(std::floor(p.y() / cell_)),
                static_cast<long>(std::floor(p.z() / cell_))};
    }
    static long key(const std::array<long, 3>& i) {
        return (i[0] + 1000) * 4000000L + (i[1] + 1000) * 2000L + (i[2] + 1000);
    }

    const Mesh& m_;
    double cell_;
    std::unordered_map<long, std::vector<int>> buckets_;
};

} // namespace testing_support
