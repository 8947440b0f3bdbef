#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qrsim/eikonal.hpp"
#include "qrsim/errors.hpp"
#include "qrsim/fibers.hpp"
#include "qrsim/pseudo_ecg.hpp"
#include "qrsim/qrs_analysis.hpp"
#include "qrsim/scenario.hpp"
#include "qrsim/synthetic.hpp"

namespace qrsim {

struct MeshSource {
    bool synthetic = true;
    double resolution = 0.2; // cm
    SyntheticGeometry geometry;
    std::string path; // used when !synthetic
};

// Everything one experiment needs. Defaults mirror the published constants;
// electrode positions have no default and must come from the config file.
struct ExperimentConfig {
    MeshSource mesh;
    BaseCV cv;
    CatalogueParams infarct;
    FiberAngles fibers;
    std::vector<RootNode> roots = default_roots();
    std::optional<ElectrodeSet> electrodes;
    TransmembraneTemplate tmpl;
    EcgOptions ecg;
    EikonalOptions eikonal;
    AnalysisOptions analysis;
    std::vector<std::string> scenarios; // empty = full catalogue
    std::string output_dir = "out";
    bool write_activation = true;
    int jobs = 1;

    /// Selected scenarios in catalogue order, baseline always first.
    std::vector<ScenarioSpec> selected_scenarios() const {
        const auto all = catalogue(infarct);
        if (scenarios.empty()) return all;
        for (const auto& n : scenarios) find_scenario(all, n);
        std::vector<ScenarioSpec> out;
        for (const auto& s : all)
            if (s.is_baseline() || std::find(scenarios.begin(), scenarios.end(), s.name) != scenarios.end())
                out.push_back(s);
        return out;
    }

    void validate() const {
        if (mesh.synthetic) {
            if (!(mesh.resolution > 0.0)) throw ParameterError("mesh.resolution_cm must be positive");
            mesh.geometry.validate();
        } else if (mesh.path.empty()) {
            throw ParameterError("mesh.path is required when mesh.source is \"file\"");
        }
        cv.validate();
        fibers.validate();
        normalize_root_times(roots);
        for (const auto& r : roots) qrsim::validate(r.location, "root '" + r.name + "'");
        if (!electrodes) throw ParameterError("electrodes table is required");
        tmpl.validate();
        if (!(ecg.sample_period > 0.0)) throw ParameterError("ecg.sample_period_ms must be positive");
        if (!(ecg.pad >= 0.0)) throw ParameterError("ecg.pad_ms must be >= 0");
        if (!(eikonal.tolerance >= 0.0)) throw ParameterError("eikonal.tolerance_ms must be >= 0");
        if (!(eikonal.source_radius >= 0.0)) throw ParameterError("eikonal.source_radius_cm must be >= 0");
        if (jobs < 1) throw ParameterError("jobs must be >= 1");
        selected_scenarios();
    }
};

namespace detail {

using json = nlohmann::json;

// Rejects keys outside the allowed set so typos do not silently fall back
// to defaults.
inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ParseError(section + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ParseError(section + ": unknown key '" + k + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(section + "." + key + ": wrong type");
    }
}

inline Vec3 read_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected [x, y, z]");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw ParseError(where + ": expected numbers");
        v[i] = j[i].get<double>();
    }
    return v;
}

inline void read_geometry(const json& j, SyntheticGeometry& g) {
    const std::string s = "mesh.geometry";
    check_keys(j, s,
               {"lv_endo_radius", "lv_endo_length", "lv_wall", "rv_offset", "rv_endo_radius_x", "rv_endo_radius_y",
                "rv_endo_length", "rv_wall", "base_height", "dense_layer_max_ab"});
    read(j, "lv_endo_radius", g.lv_endo_radius, s);
    read(j, "lv_endo_length", g.lv_endo_length, s);
    read(j, "lv_wall", g.lv_wall, s);
    read(j, "rv_offset", g.rv_offset, s);
    read(j, "rv_endo_radius_x", g.rv_endo_radius_x, s);
    read(j, "rv_endo_radius_y", g.rv_endo_radius_y, s);
    read(j, "rv_endo_length", g.rv_endo_length, s);
    read(j, "rv_wall", g.rv_wall, s);
    read(j, "base_height", g.base_height, s);
    read(j, "dense_layer_max_ab", g.dense_layer_max_ab, s);
}

inline void read_mesh(const json& j, MeshSource& m, const std::filesystem::path& base_dir) {
    check_keys(j, "mesh", {"source", "resolution_cm", "geometry", "path"});
    std::string source = "synthetic";
    read(j, "source", source, "mesh");
    if (source == "synthetic") {
        m.synthetic = true;
        read(j, "resolution_cm", m.resolution, "mesh");
        if (j.contains("geometry")) read_geometry(j["geometry"], m.geometry);
    } else if (source == "file") {
        m.synthetic = false;
        read(j, "path", m.path, "mesh");
        if (!m.path.empty() && std::filesystem::path(m.path).is_relative()) m.path = (base_dir / m.path).string();
    } else {
        throw ParseError("mesh.source must be \"synthetic\" or \"file\", got '" + source + "'");
    }
}

inline std::vector<RootNode> read_roots(const json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("roots: expected a non-empty array");
    std::vector<RootNode> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string s = "roots[" + std::to_string(i) + "]";
        check_keys(j[i], s, {"name", "side", "tm", "ab", "rt", "delay_ms"});
        for (const char* k : {"name", "side", "ab", "rt"})
            if (!j[i].contains(k)) throw ParseError(s + ": missing '" + k + "'");
        RootNode r;
        std::string side;
        r.location.tm = 1.0;
        read(j[i], "name", r.name, s);
        read(j[i], "side", side, s);
        r.location.side = parse_side(side);
        read(j[i], "tm", r.location.tm, s);
        read(j[i], "ab", r.location.ab, s);
        read(j[i], "rt", r.location.rt, s);
        read(j[i], "delay_ms", r.pk_delay, s);
        out.push_back(r);
    }
    return out;
}

inline ElectrodeSet read_electrodes(const json& j) {
    if (!j.is_object()) throw ParseError("electrodes_cm: expected an object");
    ElectrodeSet es;
    for (const auto& [k, v] : j.items())
        if (std::find(electrode_names.begin(), electrode_names.end(), k) == electrode_names.end())
            throw ParseError("electrodes_cm: unknown electrode '" + k + "'");
    for (std::size_t i = 0; i < electrode_names.size(); ++i) {
        const std::string name(electrode_names[i]);
        if (!j.contains(name)) throw ParseError("electrodes_cm: missing '" + name + "'");
        es.position[i] = read_vec3(j[name], "electrodes_cm." + name);
    }
    return es;
}

} // namespace detail

/// Parses a JSON config. A relative mesh path resolves against base_dir;
/// output_dir stays relative to the working directory.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
    using detail::read;
    detail::json j;
    try {
        j = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    detail::check_keys(j, "config",
                       {"mesh", "conduction_velocity_cm_per_s", "infarct", "fibers", "roots", "electrodes_cm",
                        "template", "ecg", "eikonal", "analysis", "scenarios", "output_dir", "write_activation",
                        "jobs"});
    ExperimentConfig c;
    if (j.contains("mesh")) detail::read_mesh(j["mesh"], c.mesh, base_dir);
    if (j.contains("conduction_velocity_cm_per_s")) {
        const auto& s = j["conduction_velocity_cm_per_s"];
        const std::string n = "conduction_velocity_cm_per_s";
        detail::check_keys(s, n, {"fiber", "sheet", "normal", "endo_sparse", "endo_dense"});
        read(s, "fiber", c.cv.fiber, n);
        read(s, "sheet", c.cv.sheet, n);
        read(s, "normal", c.cv.normal, n);
        read(s, "endo_sparse", c.cv.endo_sparse, n);
        read(s, "endo_dense", c.cv.endo_dense, n);
    }
    if (j.contains("infarct")) {
        const auto& s = j["infarct"];
        detail::check_keys(s, "infarct",
                           {"scar_fraction", "border_fraction", "alt_scar_fraction", "alt_border_fraction",
                            "border_scale"});
        read(s, "scar_fraction", c.infarct.default_reduction.scar, "infarct");
        read(s, "border_fraction", c.infarct.default_reduction.border, "infarct");
        read(s, "alt_scar_fraction", c.infarct.alternative_reduction.scar, "infarct");
        read(s, "alt_border_fraction", c.infarct.alternative_reduction.border, "infarct");
        read(s, "border_scale", c.infarct.border_scale, "infarct");
    }
    if (j.contains("fibers")) {
        const auto& s = j["fibers"];
        detail::check_keys(s, "fibers", {"alpha_endo_deg", "alpha_epi_deg"});
        read(s, "alpha_endo_deg", c.fibers.alpha_endo, "fibers");
        read(s, "alpha_epi_deg", c.fibers.alpha_epi, "fibers");
    }
    if (j.contains("roots")) c.roots = detail::read_roots(j["roots"]);
    if (j.contains("electrodes_cm")) c.electrodes = detail::read_electrodes(j["electrodes_cm"]);
    if (j.contains("template")) {
        const auto& s = j["template"];
        detail::check_keys(s, "template", {"v_rest_mv", "v_peak_mv", "upstroke_ms"});
        read(s, "v_rest_mv", c.tmpl.v_rest, "template");
        read(s, "v_peak_mv", c.tmpl.v_peak, "template");
        read(s, "upstroke_ms", c.tmpl.upstroke_duration, "template");
    }
    if (j.contains("ecg")) {
        const auto& s = j["ecg"];
        detail::check_keys(s, "ecg", {"sample_period_ms", "pad_ms", "gain"});
        read(s, "sample_period_ms", c.ecg.sample_period, "ecg");
        read(s, "pad_ms", c.ecg.pad, "ecg");
        read(s, "gain", c.ecg.gain_k, "ecg");
    }
    if (j.contains("eikonal")) {
        const auto& s = j["eikonal"];
        detail::check_keys(s, "eikonal", {"tolerance_ms", "source_radius_cm"});
        read(s, "tolerance_ms", c.eikonal.tolerance, "eikonal");
        read(s, "source_radius_cm", c.eikonal.source_radius, "eikonal");
    }
    if (j.contains("analysis")) {
        const auto& s = j["analysis"];
        detail::check_keys(s, "analysis",
                           {"onset_threshold", "fqrs_prominence", "q_duration_ms", "q_to_r", "prwp_r_mm"});
        read(s, "onset_threshold", c.analysis.onset_threshold, "analysis");
        read(s, "fqrs_prominence", c.analysis.fqrs_prominence, "analysis");
        read(s, "q_duration_ms", c.analysis.q_duration_limit, "analysis");
        read(s, "q_to_r", c.analysis.q_to_r_limit, "analysis");
        read(s, "prwp_r_mm", c.analysis.prwp_r_limit_mm, "analysis");
    }
    if (j.contains("scenarios")) {
        const auto& s = j["scenarios"];
        if (s.is_string() && s.get<std::string>() == "all")
            c.scenarios.clear();
        else
            read(j, "scenarios", c.scenarios, "config");
    }
    read(j, "output_dir", c.output_dir, "config");
    read(j, "write_activation", c.write_activation, "config");
    read(j, "jobs", c.jobs, "config");
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::path(path).parent_path());
}

/// Comma-separated scenario list as given on the command line.
inline std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(csv);
    while (std::getline(ss, cur, ',')) {
        const auto b = cur.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(cur.substr(b, cur.find_last_not_of(" \t") - b + 1));
    }
    return out;
}

} // namespace qrsim
