#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qrsim/errors.hpp"
#include "qrsim/mesh.hpp"

namespace qrsim {

// Mesh text format (UTF-8):
//
//   #nodes n      then n lines  "x y z"            (cm)
//   #tets m       then m lines  "i0 i1 i2 i3"      (zero-based)
//   #coords n     then n lines  "tm ab rt side"    (side: LV | RV)
//   #tags n       then n lines  "surfaces layer"
//
// surfaces is "-" or a comma list of epi, lv_endo, rv_endo, base; layer is
// none | dense | sparse. Reals are written with 9 significant digits.

namespace detail {

inline std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline constexpr std::array<std::pair<std::uint8_t, const char*>, 4> surface_names{
    {{surface::epicardium, "epi"}, {surface::lv_endocardium, "lv_endo"}, {surface::rv_endocardium, "rv_endo"},
     {surface::base, "base"}}};

inline std::string format_tags(std::uint8_t tags) {
    std::string out;
    for (const auto& [bit, name] : surface_names)
        if (tags & bit) {
            if (!out.empty()) out += ',';
            out += name;
        }
    return out.empty() ? "-" : out;
}

inline const char* format_layer(EndoLayer l) {
    switch (l) {
    case EndoLayer::dense: return "dense";
    case EndoLayer::sparse: return "sparse";
    default: return "none";
    }
}

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-empty line; false at end of input.
    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++number_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    }
    int number() const { return number_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("line " + std::to_string(number_) + ": " + what);
    }

private:
    std::istream& in_;
    int number_ = 0;
};

inline std::size_t read_header(LineReader& r, const std::string& name) {
    std::string line;
    if (!r.next(line)) r.fail("expected section '#" + name + "', found end of file");
    std::istringstream ss(line);
    std::string tag;
    long long count = -1;
    ss >> tag >> count;
    if (tag != "#" + name || count < 0) r.fail("expected '#" + name + " <count>', found '" + line + "'");
    return static_cast<std::size_t>(count);
}

template <class... T>
void read_fields(LineReader& r, const std::string& line, const std::string& record, T&... fields) {
    std::istringstream ss(line);
    ((ss >> fields), ...);
    std::string extra;
    if (ss.fail() || (ss >> extra)) r.fail("malformed " + record + ": '" + line + "'");
}

} // namespace detail

inline void save_mesh(const Mesh& m, std::ostream& out) {
    using detail::fmt9;
    out << "#nodes " << m.node_count() << '\n';
    for (const Vec3& p : m.nodes) out << fmt9(p.x()) << ' ' << fmt9(p.y()) << ' ' << fmt9(p.z()) << '\n';
    out << "#tets " << m.tet_count() << '\n';
    for (const Tet& t : m.tets) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    out << "#coords " << m.node_count() << '\n';
    for (const auto& c : m.coords)
        out << fmt9(c.tm) << ' ' << fmt9(c.ab) << ' ' << fmt9(c.rt) << ' ' << to_string(c.side) << '\n';
    out << "#tags " << m.node_count() << '\n';
    for (std::size_t i = 0; i < m.node_count(); ++i)
        out << detail::format_tags(m.surface_tags[i]) << ' ' << detail::format_layer(m.endo_layer[i]) << '\n';
}

inline void save_mesh(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    save_mesh(m, out);
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline Mesh load_mesh(std::istream& in) {
    detail::LineReader r(in);
    std::string line;
    Mesh m;

    const std::size_t n = detail::read_header(r, "nodes");
    m.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!r.next(line)) r.fail("node record " + std::to_string(i) + " missing");
        double x, y, z;
        detail::read_fields(r, line, "node record " + std::to_string(i), x, y, z);
        m.nodes[i] = Vec3(x, y, z);
    }

    const std::size_t nt = detail::read_header(r, "tets");
    m.tets.resize(nt);
    for (std::size_t e = 0; e < nt; ++e) {
        if (!r.next(line)) r.fail("tet record " + std::to_string(e) + " missing");
        long long a, b, c, d;
        detail::read_fields(r, line, "tet record " + std::to_string(e), a, b, c, d);
        for (long long v : {a, b, c, d})
            if (v < 0 || static_cast<std::size_t>(v) >= n)
                r.fail("tet " + std::to_string(e) + " references node " + std::to_string(v) + " outside [0," +
                       std::to_string(n) + ")");
        m.tets[e] = {static_cast<int>(a), static_cast<int>(b), static_cast<int>(c), static_cast<int>(d)};
    }

    if (detail::read_header(r, "coords") != n) r.fail("#coords count differs from #nodes");
    m.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!r.next(line)) r.fail("coords record " + std::to_string(i) + " missing");
        CobivecoCoord c;
        std::string side;
        detail::read_fields(r, line, "coords record " + std::to_string(i), c.tm, c.ab, c.rt, side);
        try {
            c.side = parse_side(side);
            validate(c, "coords record " + std::to_string(i));
        } catch (const Error& err) {
            r.fail(err.what());
        }
        m.coords[i] = c;
    }

    if (detail::read_header(r, "tags") != n) r.fail("#tags count differs from #nodes");
    m.surface_tags.resize(n);
    m.endo_layer.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!r.next(line)) r.fail("tags record " + std::to_string(i) + " missing");
        std::string tags, layer;
        detail::read_fields(r, line, "tags record " + std::to_string(i), tags, layer);
        std::uint8_t bits = surface::none;
        if (tags != "-") {
            std::istringstream ts(tags);
            std::string tok;
            while (std::getline(ts, tok, ',')) {
                bool known = false;
                for (const auto& [bit, name] : detail::surface_names)
                    if (tok == name) {
                        bits |= bit;
                        known = true;
                    }
                if (!known) r.fail("tags record " + std::to_string(i) + ": unknown surface '" + tok + "'");
            }
        }
        m.surface_tags[i] = bits;
        if (layer == "none")
            m.endo_layer[i] = EndoLayer::none;
        else if (layer == "dense")
            m.endo_layer[i] = EndoLayer::dense;
        else if (layer == "sparse")
            m.endo_layer[i] = EndoLayer::sparse;
        else
            r.fail("tags record " + std::to_string(i) + ": unknown endocardial layer '" + layer + "'");
    }
    if (r.next(line)) r.fail("unexpected trailing content '" + line + "'");

    validate_mesh(m);
    return m;
}

inline Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file '" + path + "'");
    return load_mesh(in);
}

} // namespace qrsim
