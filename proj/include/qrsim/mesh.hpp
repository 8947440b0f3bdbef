#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "qrsim/coords.hpp"
#include "qrsim/errors.hpp"

namespace qrsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Tet = std::array<int, 4>;

namespace surface {
inline constexpr std::uint8_t none = 0;
inline constexpr std::uint8_t epicardium = 1;
inline constexpr std::uint8_t lv_endocardium = 2;
inline constexpr std::uint8_t rv_endocardium = 4;
inline constexpr std::uint8_t base = 8;
inline constexpr std::uint8_t all = 15;
inline constexpr std::uint8_t endocardium = lv_endocardium | rv_endocardium;
} // namespace surface

enum class EndoLayer : std::uint8_t { none, dense, sparse };

// Tetrahedral biventricular mesh. Positions are in cm. Construct through
// generate_synthetic_biventricle, load_mesh or make_box_mesh, which all
// return meshes that passed validate_mesh; treat as immutable afterwards.
struct Mesh {
    std::vector<Vec3> nodes;
    std::vector<Tet> tets;
    std::vector<CobivecoCoord> coords;
    std::vector<std::uint8_t> surface_tags;
    std::vector<EndoLayer> endo_layer;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t tet_count() const { return tets.size(); }
};

struct Face {
    std::array<int, 3> nodes; // outward orientation
    int tet = -1;
};

inline double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

inline double signed_volume(const Mesh& m, std::size_t e) {
    const Tet& t = m.tets[e];
    return signed_volume(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]], m.nodes[t[3]]);
}

inline Vec3 centroid(const Mesh& m, std::size_t e) {
    const Tet& t = m.tets[e];
    return 0.25 * (m.nodes[t[0]] + m.nodes[t[1]] + m.nodes[t[2]] + m.nodes[t[3]]);
}

inline double total_volume(const Mesh& m) {
    double v = 0.0;
    for (std::size_t e = 0; e < m.tet_count(); ++e) v += signed_volume(m, e);
    return v;
}

/// Gradients of the four linear shape functions of tet e (row i = grad phi_i).
inline Eigen::Matrix<double, 4, 3> shape_gradients(const Mesh& m, std::size_t e) {
    const Tet& t = m.tets[e];
    Mat3 d;
    d.col(0) = m.nodes[t[1]] - m.nodes[t[0]];
    d.col(1) = m.nodes[t[2]] - m.nodes[t[0]];
    d.col(2) = m.nodes[t[3]] - m.nodes[t[0]];
    // grad phi_{1..3} are the rows of d^{-1}; grad phi_0 = -sum
    const Mat3 inv = d.inverse();
    Eigen::Matrix<double, 4, 3> g;
    g.row(1) = inv.row(0);
    g.row(2) = inv.row(1);
    g.row(3) = inv.row(2);
    g.row(0) = -(g.row(1) + g.row(2) + g.row(3));
    return g;
}

/// Exact gradient of the piecewise-linear interpolant of a nodal field.
inline std::vector<Vec3> element_gradient(const Mesh& m, std::span<const double> f) {
    if (f.size() != m.node_count())
        throw ParameterError("element_gradient: field has " + std::to_string(f.size()) +
                             " values, mesh has " + std::to_string(m.node_count()) + " nodes");
    std::vector<Vec3> out(m.tet_count());
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        const Tet& t = m.tets[e];
        Mat3 d;
        Vec3 df;
        for (int k = 0; k < 3; ++k) {
            d.row(k) = (m.nodes[t[k + 1]] - m.nodes[t[0]]).transpose();
            df[k] = f[t[k + 1]] - f[t[0]];
        }
        out[e] = d.partialPivLu().solve(df);
    }
    return out;
}

/// Coordinate of an element centroid: chamber by majority (ties go to LV),
/// tm/ab averaged over nodes of that chamber, rt by circular mean.
inline CobivecoCoord element_coordinate(const Mesh& m, std::size_t e) {
    const Tet& t = m.tets[e];
    int lv = 0;
    for (int n : t) lv += m.coords[n].side == Side::LV ? 1 : 0;
    const Side side = lv >= 2 ? Side::LV : Side::RV;
    double tm = 0.0, ab = 0.0;
    std::array<double, 4> rts{};
    int k = 0;
    for (int n : t) {
        const auto& c = m.coords[n];
        if (c.side != side) continue;
        tm += c.tm;
        ab += c.ab;
        rts[k++] = c.rt;
    }
    return {tm / k, ab / k, circular_mean_rt(std::span<const double>(rts.data(), k)), side};
}

inline std::vector<CobivecoCoord> element_coordinates(const Mesh& m) {
    std::vector<CobivecoCoord> out(m.tet_count());
    for (std::size_t e = 0; e < m.tet_count(); ++e) out[e] = element_coordinate(m, e);
    return out;
}

namespace detail {

inline constexpr std::array<std::array<int, 3>, 4> tet_faces{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

struct FaceKey {
    std::array<int, 3> sorted;
    std::array<int, 3> oriented;
    int tet;
};

inline std::vector<FaceKey> all_faces(const Mesh& m) {
    std::vector<FaceKey> faces;
    faces.reserve(4 * m.tet_count());
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        const Tet& t = m.tets[e];
        for (const auto& f : tet_faces) {
            std::array<int, 3> o{t[f[0]], t[f[1]], t[f[2]]};
            std::array<int, 3> s = o;
            std::sort(s.begin(), s.end());
            faces.push_back({s, o, static_cast<int>(e)});
        }
    }
    std::sort(faces.begin(), faces.end(), [](const FaceKey& a, const FaceKey& b) {
        return a.sorted != b.sorted ? a.sorted < b.sorted : a.tet < b.tet;
    });
    return faces;
}

} // namespace detail

/// Faces that belong to exactly one tet, oriented outward for positively
/// oriented tets. Throws if any face is shared by more than two tets.
inline std::vector<Face> boundary_faces(const Mesh& m) {
    const auto faces = detail::all_faces(m);
    std::vector<Face> out;
    for (std::size_t i = 0; i < faces.size();) {
        std::size_t j = i + 1;
        while (j < faces.size() && faces[j].sorted == faces[i].sorted) ++j;
        if (j - i > 2)
            throw ValidationError("non-manifold face shared by " + std::to_string(j - i) +
                                  " tets (first tet " + std::to_string(faces[i].tet) + ")");
        if (j - i == 1) out.push_back({faces[i].oriented, faces[i].tet});
        i = j;
    }
    return out;
}

// Node adjacency in compressed row form.
struct Topology {
    std::vector<int> node_tet_offsets, node_tets;
    std::vector<int> node_nbr_offsets, node_nbrs;

    std::span<const int> tets_of(int n) const {
        return {node_tets.data() + node_tet_offsets[n],
                static_cast<std::size_t>(node_tet_offsets[n + 1] - node_tet_offsets[n])};
    }
    std::span<const int> neighbors_of(int n) const {
        return {node_nbrs.data() + node_nbr_offsets[n],
                static_cast<std::size_t>(node_nbr_offsets[n + 1] - node_nbr_offsets[n])};
    }
};

inline Topology build_topology(const Mesh& m) {
    const std::size_t n = m.node_count();
    Topology topo;
    topo.node_tet_offsets.assign(n + 1, 0);
    for (const Tet& t : m.tets)
        for (int v : t) ++topo.node_tet_offsets[v + 1];
    std::partial_sum(topo.node_tet_offsets.begin(), topo.node_tet_offsets.end(),
                     topo.node_tet_offsets.begin());
    topo.node_tets.resize(topo.node_tet_offsets.back());
    std::vector<int> fill(topo.node_tet_offsets.begin(), topo.node_tet_offsets.end() - 1);
    for (std::size_t e = 0; e < m.tet_count(); ++e)
        for (int v : m.tets[e]) topo.node_tets[fill[v]++] = static_cast<int>(e);

    topo.node_nbr_offsets.assign(n + 1, 0);
    std::vector<int> scratch;
    std::vector<std::vector<int>> nbrs(n);
    for (std::size_t v = 0; v < n; ++v) {
        scratch.clear();
        for (int e : topo.tets_of(static_cast<int>(v)))
            for (int w : m.tets[e])
                if (w != static_cast<int>(v)) scratch.push_back(w);
        std::sort(scratch.begin(), scratch.end());
        scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
        nbrs[v] = scratch;
        topo.node_nbr_offsets[v + 1] = topo.node_nbr_offsets[v] + static_cast<int>(scratch.size());
    }
    topo.node_nbrs.reserve(topo.node_nbr_offsets.back());
    for (auto& l : nbrs) topo.node_nbrs.insert(topo.node_nbrs.end(), l.begin(), l.end());
    return topo;
}

/// Unique undirected edges (a < b), sorted.
inline std::vector<std::array<int, 2>> mesh_edges(const Mesh& m) {
    std::vector<std::array<int, 2>> edges;
    edges.reserve(6 * m.tet_count());
    for (const Tet& t : m.tets)
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                edges.push_back({std::min(t[i], t[j]), std::max(t[i], t[j])});
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

inline double mean_edge_length(const Mesh& m) {
    const auto edges = mesh_edges(m);
    if (edges.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : edges) s += (m.nodes[e[0]] - m.nodes[e[1]]).norm();
    return s / static_cast<double>(edges.size());
}

/// Connected components over tet-sharing; returns a label per node.
inline std::vector<int> node_components(const Mesh& m, const Topology& topo, int* count = nullptr) {
    std::vector<int> label(m.node_count(), -1);
    int next = 0;
    std::vector<int> stack;
    for (std::size_t s = 0; s < m.node_count(); ++s) {
        if (label[s] >= 0) continue;
        label[s] = next;
        stack.assign(1, static_cast<int>(s));
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : topo.neighbors_of(v))
                if (label[w] < 0) {
                    label[w] = next;
                    stack.push_back(w);
                }
        }
        ++next;
    }
    if (count) *count = next;
    return label;
}

/// Reorients negatively oriented tets in place and checks every mesh
/// invariant. Errors name the first offending record.
inline void validate_mesh(Mesh& m) {
    const std::size_t n = m.node_count();
    if (n == 0 || m.tet_count() == 0) throw ValidationError("mesh has no nodes or no tets");
    if (m.coords.size() != n || m.surface_tags.size() != n || m.endo_layer.size() != n)
        throw ValidationError("per-node arrays do not match node count " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
        if (!m.nodes[i].allFinite()) throw ValidationError("node " + std::to_string(i) + " has non-finite position");
    std::vector<char> used(n, 0);
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        Tet& t = m.tets[e];
        for (int v : t)
            if (v < 0 || static_cast<std::size_t>(v) >= n)
                throw ValidationError("tet " + std::to_string(e) + " references node " + std::to_string(v) +
                                      " outside [0," + std::to_string(n) + ")");
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                if (t[i] == t[j]) throw ValidationError("tet " + std::to_string(e) + " repeats node " + std::to_string(t[i]));
        double vol = signed_volume(m, e);
        if (vol < 0.0) {
            std::swap(t[2], t[3]);
            vol = -vol;
        }
        if (!(vol > 0.0)) throw ValidationError("tet " + std::to_string(e) + " is degenerate (zero volume)");
        for (int v : t) used[v] = 1;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) throw ValidationError("node " + std::to_string(i) + " is not referenced by any tet");
    for (std::size_t i = 0; i < n; ++i) validate(m.coords[i], "node " + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i)
        if (m.surface_tags[i] & ~surface::all)
            throw ValidationError("node " + std::to_string(i) + " has unknown surface tag bits");
    (void)boundary_faces(m); // throws on non-manifold faces
}

} // namespace qrsim
