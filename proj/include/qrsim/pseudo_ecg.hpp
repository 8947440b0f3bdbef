#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "qrsim/eikonal.hpp"
#include "qrsim/errors.hpp"
#include "qrsim/mesh.hpp"

namespace qrsim {

struct TransmembraneTemplate {
    double v_rest = -85.0;          // mV
    double v_peak = 30.0;           // mV
    double upstroke_duration = 1.0; // ms

    void validate() const {
        if (!(v_peak > v_rest)) throw ParameterError("template: v_peak must exceed v_rest");
        if (!(upstroke_duration > 0.0)) throw ParameterError("template: upstroke_duration must be positive");
    }
};

/// Upstroke-only action potential: rest, linear rise, held plateau.
inline double transmembrane_at(const TransmembraneTemplate& tp, double t_act, double t) {
    if (t < t_act) return tp.v_rest;
    const double u = (t - t_act) / tp.upstroke_duration;
    if (u >= 1.0) return tp.v_peak;
    return tp.v_rest + u * (tp.v_peak - tp.v_rest);
}

inline constexpr std::array<std::string_view, 9> electrode_names{"RA", "LA", "LL", "V1", "V2",
                                                                 "V3", "V4", "V5", "V6"};
inline constexpr std::array<std::string_view, 12> lead_names{"I",   "II",  "III", "aVR", "aVL", "aVF",
                                                             "V1",  "V2",  "V3",  "V4",  "V5",  "V6"};

namespace lead {
inline constexpr int I = 0, II = 1, III = 2, aVR = 3, aVL = 4, aVF = 5, V1 = 6, V2 = 7, V3 = 8, V4 = 9, V5 = 10,
                     V6 = 11;
}

inline int lead_index(std::string_view name) {
    for (std::size_t i = 0; i < lead_names.size(); ++i)
        if (lead_names[i] == name) return static_cast<int>(i);
    throw ParameterError("unknown lead '" + std::string(name) + "'");
}

// Positions in cm, in the mesh frame, ordered as electrode_names.
struct ElectrodeSet {
    std::array<Vec3, 9> position;

    const Vec3& operator[](std::string_view name) const {
        for (std::size_t i = 0; i < electrode_names.size(); ++i)
            if (electrode_names[i] == name) return position[i];
        throw ParameterError("unknown electrode '" + std::string(name) + "'");
    }
};

// Distance below which an electrode counts as inside the myocardium.
inline constexpr double electrode_clearance = 1.0; // cm

inline void validate_electrode(const Mesh& m, const Vec3& p, std::string_view name = "electrode") {
    for (std::size_t v = 0; v < m.node_count(); ++v)
        if ((m.nodes[v] - p).norm() <= electrode_clearance)
            throw ValidationError(std::string(name) + " lies within " + std::to_string(electrode_clearance) +
                                  " cm of myocardial node " + std::to_string(v));
}

inline void validate_electrodes(const Mesh& m, const ElectrodeSet& es) {
    for (std::size_t i = 0; i < es.position.size(); ++i) validate_electrode(m, es.position[i], electrode_names[i]);
}

/// Gradient of 1/r with respect to the source point x, r = |x - electrode|.
inline Vec3 grad_inverse_distance(const Vec3& x, const Vec3& electrode) {
    const Vec3 d = x - electrode;
    const double r = d.norm();
    return -d / (r * r * r);
}

/// Direct element sum: gain_k * sum over tets of -grad(Vm) . grad(1/r)
/// at the centroid, times the tet volume.
inline double electrode_potential(const Mesh& m, const ActivationMap& act, const TransmembraneTemplate& tp,
                                  const Vec3& electrode, double t, double gain_k) {
    tp.validate();
    validate_electrode(m, electrode);
    if (act.time.size() != m.node_count()) throw ValidationError("activation map size does not match the mesh");
    double phi = 0.0;
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        const auto G = shape_gradients(m, e);
        Vec3 gv = Vec3::Zero();
        for (int i = 0; i < 4; ++i) gv += transmembrane_at(tp, act.time[m.tets[e][i]], t) * G.row(i).transpose();
        phi += -gv.dot(grad_inverse_distance(centroid(m, e), electrode)) * std::fabs(signed_volume(m, e));
    }
    return gain_k * phi;
}

/// Per-node lead-field weights: phi(t) = gain_k * sum_n (Vm_n(t) - v_rest) w_n.
/// Identical to electrode_potential up to summation order.
inline std::vector<double> node_weights(const Mesh& m, const Vec3& electrode) {
    std::vector<double> w(m.node_count(), 0.0);
    for (std::size_t e = 0; e < m.tet_count(); ++e) {
        const auto G = shape_gradients(m, e);
        const Vec3 g = grad_inverse_distance(centroid(m, e), electrode) * std::fabs(signed_volume(m, e));
        for (int i = 0; i < 4; ++i) w[m.tets[e][i]] -= G.row(i).dot(g);
    }
    return w;
}

struct LeadField {
    std::array<std::vector<double>, 9> weight;
};

inline LeadField build_lead_field(const Mesh& m, const ElectrodeSet& es) {
    validate_electrodes(m, es);
    LeadField lf;
    for (std::size_t i = 0; i < es.position.size(); ++i) lf.weight[i] = node_weights(m, es.position[i]);
    return lf;
}

// Scale from raw lead units to normalized units, and normalized units to mm.
struct Calibration {
    double scale = 1.0;
    double mm_per_unit = 10.0;
};

struct QRSRecording {
    double sample_period = 1.0; // ms
    std::array<std::vector<double>, 12> leads;
    Calibration calibration;

    std::size_t samples() const { return leads[0].size(); }
    const std::vector<double>& operator[](std::string_view name) const { return leads[lead_index(name)]; }
    double max_abs() const {
        double mx = 0.0;
        for (const auto& l : leads)
            for (double v : l) mx = std::max(mx, std::fabs(v));
        return mx;
    }
};

struct EcgOptions {
    double sample_period = 1.0; // ms
    double pad = 5.0;           // ms after the last upstroke
    double gain_k = 1.0;
};

/// 12 leads from electrode potentials, in raw (unscaled) units.
inline std::array<std::vector<double>, 12> derive_leads(const std::array<std::vector<double>, 9>& phi) {
    const auto &RA = phi[0], &LA = phi[1], &LL = phi[2];
    const std::size_t n = RA.size();
    std::array<std::vector<double>, 12> out;
    for (auto& l : out) l.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[lead::I][k] = LA[k] - RA[k];
        out[lead::II][k] = LL[k] - RA[k];
        out[lead::III][k] = LL[k] - LA[k];
        out[lead::aVR][k] = RA[k] - 0.5 * (LA[k] + LL[k]);
        out[lead::aVL][k] = LA[k] - 0.5 * (RA[k] + LL[k]);
        out[lead::aVF][k] = LL[k] - 0.5 * (RA[k] + LA[k]);
        const double wct = (RA[k] + LA[k] + LL[k]) / 3.0;
        for (int v = 0; v < 6; ++v) out[lead::V1 + v][k] = phi[3 + v][k] - wct;
    }
    return out;
}

/// Largest positive deflection over all leads, in the units of the input.
inline double largest_r(const std::array<std::vector<double>, 12>& leads) {
    double r = 0.0;
    for (const auto& l : leads)
        for (double v : l) r = std::max(r, v);
    return r;
}

/// Samples t_k = k * sample_period over [0, max activation + upstroke + pad].
/// Without a calibration the recording calibrates itself (baseline run):
/// max |amplitude| over leads becomes 1 and the largest R wave 10 mm.
inline QRSRecording simulate_qrs(const Mesh& m, const ActivationMap& act, const TransmembraneTemplate& tp,
                                 const LeadField& lf, const EcgOptions& opt = {},
                                 const Calibration* calibration = nullptr) {
    tp.validate();
    if (!(opt.sample_period > 0.0)) throw ParameterError("sample_period must be positive");
    if (act.time.size() != m.node_count()) throw ValidationError("activation map size does not match the mesh");
    const double window = act.max() + tp.upstroke_duration + opt.pad;
    const std::size_t ns = static_cast<std::size_t>(std::floor(window / opt.sample_period + 1e-9)) + 1;

    std::array<std::vector<double>, 9> phi;
    for (auto& p : phi) p.assign(ns, 0.0);
    std::vector<double> u(m.node_count());
    double magnitude = 0.0; // largest sum of |term|, the roundoff reference
    for (std::size_t k = 0; k < ns; ++k) {
        const double t = static_cast<double>(k) * opt.sample_period;
        for (std::size_t n = 0; n < m.node_count(); ++n) u[n] = transmembrane_at(tp, act.time[n], t) - tp.v_rest;
        for (int e = 0; e < 9; ++e) {
            const auto& w = lf.weight[e];
            double s = 0.0, s_abs = 0.0;
            for (std::size_t n = 0; n < u.size(); ++n) {
                s += u[n] * w[n];
                s_abs += std::fabs(u[n] * w[n]);
            }
            phi[e][k] = opt.gain_k * s;
            magnitude = std::max(magnitude, std::fabs(opt.gain_k) * s_abs);
        }
    }

    QRSRecording rec;
    rec.sample_period = opt.sample_period;
    rec.leads = derive_leads(phi);
    if (calibration) {
        rec.calibration = *calibration;
    } else {
        double mx = 0.0;
        for (const auto& l : rec.leads)
            for (double v : l) mx = std::max(mx, std::fabs(v));
        if (!(mx > 1e-9 * magnitude)) throw NoQrsError("baseline recording is flat; cannot normalize");
        rec.calibration.scale = 1.0 / mx;
    }
    for (auto& l : rec.leads)
        for (double& v : l) v *= rec.calibration.scale;
    if (!calibration) {
        const double r = largest_r(rec.leads);
        if (!(r > 0.0)) throw NoQrsError("baseline recording has no positive deflection");
        rec.calibration.mm_per_unit = 10.0 / r;
    }
    return rec;
}

inline void write_recording_csv(const QRSRecording& rec, std::ostream& out) {
    out << "time_ms";
    for (auto n : lead_names) out << ',' << n;
    out << '\n';
    char buf[48];
    for (std::size_t k = 0; k < rec.samples(); ++k) {
        std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(k) * rec.sample_period);
        out << buf;
        for (const auto& l : rec.leads) {
            std::snprintf(buf, sizeof buf, ",%.6f", l[k]);
            out << buf;
        }
        out << '\n';
    }
}

inline void write_recording_csv(const QRSRecording& rec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_recording_csv(rec, out);
}

} // namespace qrsim
