#pragma once

#include <array>
#include <string>
#include <vector>

#include "qrsim/coords.hpp"
#include "qrsim/errors.hpp"
#include "qrsim/fibers.hpp"
#include "qrsim/mesh.hpp"

namespace qrsim {

enum class Zone : std::uint8_t { healthy = 0, border = 1, scar = 2 };

inline const char* to_string(Zone z) {
    switch (z) {
    case Zone::border: return "border";
    case Zone::scar: return "scar";
    default: return "healthy";
    }
}

enum class Membership { core, border, outside };

// Ellipsoid in (tm, ab, rt) on the LV chart. The border zone is the shell
// between the core and the same ellipsoid with radii scaled by border_scale.
struct InfarctRegion {
    std::array<double, 3> center{0.5, 0.5, 0.0}; // tm0, ab0, rt0
    std::array<double, 3> radii{0.5, 0.2, 0.1};  // tm_r, ab_r, rt_r
    double border_scale = 1.3;

    void validate() const {
        for (int i = 0; i < 3; ++i)
            if (!(radii[i] > 0.0)) throw ParameterError("infarct region radii must be positive");
        if (!(border_scale >= 1.0)) throw ParameterError("infarct region border_scale must be >= 1");
        if (!(center[2] >= 0.0 && center[2] < 1.0)) throw ParameterError("infarct region rt0 must lie in [0,1)");
    }
};

/// Normalized quadratic form with the rt component measured on the circle.
inline double region_form(const CobivecoCoord& c, const InfarctRegion& r, double scale = 1.0) {
    const double d0 = (c.tm - r.center[0]) / (r.radii[0] * scale);
    const double d1 = (c.ab - r.center[1]) / (r.radii[1] * scale);
    const double d2 = rt_distance(c.rt, r.center[2]) / (r.radii[2] * scale);
    return d0 * d0 + d1 * d1 + d2 * d2;
}

/// Regions live on the LV chart, so RV points are always outside.
inline Membership in_region(const CobivecoCoord& c, const InfarctRegion& r) {
    if (c.side != Side::LV) return Membership::outside;
    if (region_form(c, r) <= 1.0) return Membership::core;
    if (region_form(c, r, r.border_scale) <= 1.0) return Membership::border;
    return Membership::outside;
}

struct CvReduction {
    double scar = 0.10;
    double border = 0.50;
    friend bool operator==(const CvReduction&, const CvReduction&) = default;
};

struct ScenarioSpec {
    std::string name;
    std::string location; // empty for the baseline
    std::string extent;   // transmural | subendocardial, empty for the baseline
    std::vector<InfarctRegion> regions;
    CvReduction cv_reduction;

    bool is_baseline() const { return regions.empty(); }

    void validate() const {
        for (const auto& r : regions) r.validate();
        const auto& cv = cv_reduction;
        if (!(cv.scar > 0.0 && cv.scar <= cv.border && cv.border <= 1.0))
            throw ParameterError("scenario '" + name + "': need 0 < scar_fraction <= border_fraction <= 1");
    }
};

// Healthy speeds in cm/s: fiber, sheet, sheet-normal, and the isotropic
// endocardial layer speeds.
struct BaseCV {
    double fiber = 65.0;
    double sheet = 48.0;
    double normal = 51.0;
    double endo_sparse = 100.0;
    double endo_dense = 150.0;

    void validate() const {
        for (double v : {fiber, sheet, normal, endo_sparse, endo_dense})
            if (!(v > 0.0)) throw ValidationError("conduction velocities must be positive");
    }
};

namespace catalogue_table {

struct Location {
    const char* name;
    double ab0, rt0, ab_r, rt_r;
};

// Centres and half-widths on the LV chart (rt 0 = posterior junction,
// 1/3 lateral, 7/12 anterior, 5/6 septal midline).
inline constexpr std::array<Location, 7> locations{{
    {"septal", 0.55, 5.0 / 6.0, 0.30, 0.12},
    {"apical", 0.0, 0.0, 0.38, 2.0},
    {"ext_anterior", 0.45, 0.60, 0.55, 0.15},
    {"lim_anterior", 0.55, 0.583, 0.275, 0.075},
    {"lateral", 0.55, 1.0 / 3.0, 0.30, 0.14},
    {"inferior", 0.55, 1.0 / 12.0, 0.30, 0.075},
    {"inferolateral", 0.50, 1.0 / 6.0, 0.35, 0.14},
}};

inline constexpr Location lateral_small{"lateral_small", 0.55, 1.0 / 3.0, 0.20, 0.09};

struct Extent {
    const char* name;
    double tm0, tm_r;
};
inline constexpr Extent transmural{"transmural", 0.5, 0.55};
inline constexpr Extent subendocardial{"subendocardial", 1.0, 0.5};

inline constexpr double border_scale = 1.3;
inline constexpr CvReduction default_reduction{0.10, 0.50};
inline constexpr CvReduction alternative_reduction{0.05, 0.25};

} // namespace catalogue_table

inline ScenarioSpec make_scenario(const catalogue_table::Location& loc, const catalogue_table::Extent& ext,
                                  const CvReduction& cv, const std::string& name) {
    InfarctRegion r;
    r.center = {ext.tm0, loc.ab0, loc.rt0};
    r.radii = {ext.tm_r, loc.ab_r, loc.rt_r};
    return {name, loc.name, ext.name, {r}, cv};
}

struct CatalogueParams {
    CvReduction default_reduction = catalogue_table::default_reduction;
    CvReduction alternative_reduction = catalogue_table::alternative_reduction;
    double border_scale = catalogue_table::border_scale;
};

/// Baseline first, then 7 locations x {transmural, subendocardial}, the two
/// small lateral scars and the lateral transmural scar with slower CVs.
inline std::vector<ScenarioSpec> catalogue(const CatalogueParams& p = {}) {
    using namespace catalogue_table;
    std::vector<ScenarioSpec> out;
    out.push_back({"baseline", "", "", {}, p.default_reduction});
    for (const auto& loc : locations)
        for (const auto* ext : {&transmural, &subendocardial})
            out.push_back(make_scenario(loc, *ext, p.default_reduction, std::string(loc.name) + "_" + ext->name));
    for (const auto* ext : {&transmural, &subendocardial})
        out.push_back(make_scenario(lateral_small, *ext, p.default_reduction,
                                    std::string("lateral_small_") + ext->name));
    out.push_back(make_scenario(locations[4], transmural, p.alternative_reduction, "lateral_altcv_transmural"));
    for (auto& s : out) {
        for (auto& r : s.regions) r.border_scale = p.border_scale;
        s.validate();
    }
    return out;
}

struct CVField {
    std::vector<std::array<double, 3>> element_speed; // v_f, v_s, v_n
    std::vector<Zone> zone;                           // per element
    std::vector<double> endo_speed;                   // per node, 0 outside the layer

    std::size_t count(Zone z) const {
        std::size_t n = 0;
        for (Zone q : zone) n += q == z ? 1 : 0;
        return n;
    }
};

inline double zone_fraction(Zone z, const CvReduction& cv) {
    switch (z) {
    case Zone::scar: return cv.scar;
    case Zone::border: return cv.border;
    default: return 1.0;
    }
}

/// Most severe membership over all regions.
inline Zone classify(const CobivecoCoord& c, const std::vector<InfarctRegion>& regions) {
    Zone z = Zone::healthy;
    for (const auto& r : regions) {
        const Membership mb = in_region(c, r);
        if (mb == Membership::core) return Zone::scar;
        if (mb == Membership::border) z = Zone::border;
    }
    return z;
}

/// Zones are decided at element centroid coordinates. A layer node takes the
/// most severe zone among its incident elements.
inline CVField build_cv_field(const Mesh& m, const ScenarioSpec& spec, const BaseCV& base = {}) {
    spec.validate();
    base.validate();
    CVField f;
    const std::size_t ne = m.tet_count();
    f.element_speed.resize(ne);
    f.zone.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const Zone z = spec.is_baseline() ? Zone::healthy : classify(element_coordinate(m, e), spec.regions);
        const double k = zone_fraction(z, spec.cv_reduction);
        f.zone[e] = z;
        f.element_speed[e] =
            z == Zone::healthy ? std::array{base.fiber, base.sheet, base.normal}
                               : std::array{k * base.fiber, k * base.sheet, k * base.normal};
    }
    std::vector<Zone> node_zone(m.node_count(), Zone::healthy);
    for (std::size_t e = 0; e < ne; ++e)
        for (int v : m.tets[e])
            if (f.zone[e] > node_zone[v]) node_zone[v] = f.zone[e];
    f.endo_speed.assign(m.node_count(), 0.0);
    for (std::size_t v = 0; v < m.node_count(); ++v) {
        if (m.endo_layer[v] == EndoLayer::none) continue;
        const double healthy = m.endo_layer[v] == EndoLayer::dense ? base.endo_dense : base.endo_sparse;
        f.endo_speed[v] = node_zone[v] == Zone::healthy ? healthy
                                                        : zone_fraction(node_zone[v], spec.cv_reduction) * healthy;
    }
    return f;
}

inline const ScenarioSpec& find_scenario(const std::vector<ScenarioSpec>& list, const std::string& name) {
    for (const auto& s : list)
        if (s.name == name) return s;
    throw ParameterError("unknown scenario '" + name + "'");
}

} // namespace qrsim
