#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qrsim/errors.hpp"
#include "qrsim/pseudo_ecg.hpp"

namespace qrsim {

/// Unnormalized dynamic time warping cost with local cost |a_i - b_j| and
/// steps (i-1, j), (i, j-1), (i-1, j-1), no window.
inline double dtw(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ParameterError("dtw: both series must be non-empty");
    const std::size_t m = b.size();
    std::vector<double> prev(m), cur(m);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = std::fabs(a[i] - b[j]);
            double best;
            if (i == 0 && j == 0)
                best = 0.0;
            else if (i == 0)
                best = cur[j - 1];
            else if (j == 0)
                best = prev[j];
            else
                best = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = c + best;
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

struct AnalysisOptions {
    double onset_threshold = 0.02;   // fraction of the lead's max |amplitude|
    double fqrs_prominence = 0.05;   // fraction of the lead's max |amplitude|
    double q_duration_limit = 30.0;  // ms
    double q_to_r_limit = 0.25;      // |Q| / R
    double prwp_r_limit_mm = 2.0;    // mm
};

struct Interval {
    double onset = 0.0;  // ms
    double offset = 0.0; // ms
    double duration() const { return offset - onset; }
};

namespace detail {

inline double max_abs(std::span<const double> x) {
    double mx = 0.0;
    for (double v : x) mx = std::max(mx, std::fabs(v));
    return mx;
}

// First and last sample index with |x| above the threshold.
inline std::pair<std::size_t, std::size_t> qrs_samples(std::span<const double> x, double fraction) {
    const double theta = fraction * max_abs(x);
    if (!(theta > 0.0)) throw NoQrsError("trace is flat");
    std::size_t first = x.size(), last = 0;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (std::fabs(x[k]) > theta) {
            first = std::min(first, k);
            last = k;
        }
    return {first, last};
}

} // namespace detail

/// Onset/offset: first and last samples whose |amplitude| exceeds the
/// threshold fraction of the trace's max |amplitude|.
inline Interval delineate(std::span<const double> x, double sample_period, double fraction = 0.02) {
    const auto [a, b] = detail::qrs_samples(x, fraction);
    return {static_cast<double>(a) * sample_period, static_cast<double>(b) * sample_period};
}

struct Extremum {
    std::size_t index;
    bool peak; // false for a trough
    double prominence;
};

/// Local extrema strictly inside [lo, hi] (plateaus count once, at their
/// first sample) with topographic prominence computed within [lo, hi].
inline std::vector<Extremum> find_extrema(std::span<const double> x, std::size_t lo, std::size_t hi) {
    std::vector<Extremum> out;
    if (hi >= x.size() || lo + 2 > hi) return out;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        if (x[i] == x[i - 1]) continue;
        std::size_t j = i;
        while (j + 1 < hi && x[j + 1] == x[i]) ++j;
        const bool peak = x[i] > x[i - 1] && x[i] > x[j + 1];
        const bool trough = x[i] < x[i - 1] && x[i] < x[j + 1];
        if (peak || trough) {
            const double s = peak ? 1.0 : -1.0;
            const double v = s * x[i];
            double left = v, right = v;
            for (std::size_t k = i; k-- > lo;) {
                if (s * x[k] > v) break;
                left = std::min(left, s * x[k]);
            }
            for (std::size_t k = j + 1; k <= hi; ++k) {
                if (s * x[k] > v) break;
                right = std::min(right, s * x[k]);
            }
            out.push_back({i, peak, v - std::max(left, right)});
        }
        i = j;
    }
    return out;
}

/// Extrema beyond the canonical Q-R-S set (Q only when the complex starts
/// with a trough), after dropping extrema below the prominence fraction.
inline int count_fqrs(std::span<const double> x, double onset_fraction = 0.02, double prominence_fraction = 0.05) {
    const auto [lo, hi] = detail::qrs_samples(x, onset_fraction);
    const double limit = prominence_fraction * detail::max_abs(x);
    int n = 0;
    bool first_trough = false;
    for (const auto& e : find_extrema(x, lo, hi)) {
        if (e.prominence < limit) continue;
        if (n == 0) first_trough = !e.peak;
        ++n;
    }
    const int canonical = std::min(n, first_trough ? 3 : 2);
    return n - canonical;
}

struct LeadFeatures {
    bool has_qrs = false;
    double onset = 0.0, offset = 0.0, duration = 0.0; // ms
    double q_amp = 0.0;                               // <= 0, normalized units
    double q_duration = 0.0;                          // ms
    double r_amp = 0.0;                               // >= 0
    double r_time = 0.0;                              // ms
    double s_amp = 0.0;                               // <= 0
    int fqrs_count = 0;
};

/// Q: an initial negative deflection, from onset to the first sample at
/// or above zero. R: largest positive value in the complex. S: most
/// negative value after R.
inline LeadFeatures lead_features(std::span<const double> x, double sample_period, const AnalysisOptions& opt = {}) {
    LeadFeatures f;
    std::size_t lo, hi;
    try {
        std::tie(lo, hi) = detail::qrs_samples(x, opt.onset_threshold);
    } catch (const NoQrsError&) {
        return f;
    }
    f.has_qrs = true;
    f.onset = static_cast<double>(lo) * sample_period;
    f.offset = static_cast<double>(hi) * sample_period;
    f.duration = f.offset - f.onset;
    std::size_t r_idx = lo;
    for (std::size_t k = lo; k <= hi; ++k)
        if (x[k] > f.r_amp) {
            f.r_amp = x[k];
            r_idx = k;
        }
    f.r_time = static_cast<double>(r_idx) * sample_period;
    if (x[lo] < 0.0) {
        std::size_t k = lo;
        while (k <= hi && x[k] < 0.0) {
            f.q_amp = std::min(f.q_amp, x[k]);
            ++k;
        }
        f.q_duration = static_cast<double>(k - lo) * sample_period;
    }
    if (f.r_amp > 0.0)
        for (std::size_t k = r_idx; k <= hi; ++k) f.s_amp = std::min(f.s_amp, x[k]);
    f.fqrs_count = count_fqrs(x, opt.onset_threshold, opt.fqrs_prominence);
    return f;
}

inline bool detect_pathological_q(const LeadFeatures& f, const AnalysisOptions& opt = {}) {
    if (!f.has_qrs || !(f.q_amp < 0.0)) return false;
    return f.q_duration >= opt.q_duration_limit || std::fabs(f.q_amp) >= opt.q_to_r_limit * f.r_amp;
}

/// R in mm: R_V3 or R_V4 at most the limit, or R_V5 < R_V6, or R_V2 < R_V1.
inline bool detect_prwp(const std::array<LeadFeatures, 12>& f, double mm_per_unit, const AnalysisOptions& opt = {}) {
    auto r = [&](int l) { return f[l].r_amp * mm_per_unit; };
    return r(lead::V3) <= opt.prwp_r_limit_mm || r(lead::V4) <= opt.prwp_r_limit_mm || r(lead::V5) < r(lead::V6) ||
           r(lead::V2) < r(lead::V1);
}

inline constexpr std::array<int, 3> inferior_leads{lead::II, lead::III, lead::aVF};
inline constexpr std::array<int, 4> anterior_leads{lead::V1, lead::V2, lead::V3, lead::V4};
inline constexpr std::array<int, 4> lateral_leads{lead::I, lead::aVL, lead::V5, lead::V6};

struct QRSFeatures {
    std::array<LeadFeatures, 12> lead;
    bool pathological_q = false; // any lead except aVR
    bool fqrs_inferior = false, fqrs_anterior = false, fqrs_lateral = false;
    bool prwp = false;
    double duration = 0.0; // max lead duration, ms
};

inline QRSFeatures analyze(const QRSRecording& rec, const AnalysisOptions& opt = {}) {
    QRSFeatures out;
    bool any = false;
    for (int l = 0; l < 12; ++l) {
        out.lead[l] = lead_features(rec.leads[l], rec.sample_period, opt);
        if (!out.lead[l].has_qrs) continue;
        any = true;
        out.duration = std::max(out.duration, out.lead[l].duration);
        if (l != lead::aVR && detect_pathological_q(out.lead[l], opt)) out.pathological_q = true;
    }
    if (!any) throw NoQrsError("no lead contains a QRS complex");
    auto group = [&](const auto& leads) {
        for (int l : leads)
            if (out.lead[l].fqrs_count >= 1) return true;
        return false;
    };
    out.fqrs_inferior = group(inferior_leads);
    out.fqrs_anterior = group(anterior_leads);
    out.fqrs_lateral = group(lateral_leads);
    out.prwp = detect_prwp(out.lead, rec.calibration.mm_per_unit, opt);
    return out;
}

struct DissimilarityRow {
    std::array<double, 12> lead{};
    double dtw_max = 0.0;
    double dtw_avg = 0.0;
};

struct DissimilarityReport {
    std::vector<DissimilarityRow> rows;        // one per scenario, vs baseline
    std::vector<std::vector<double>> pairwise; // mean per-lead DTW
};

inline DissimilarityRow compare(const QRSRecording& a, const QRSRecording& b) {
    if (a.sample_period != b.sample_period)
        throw ParameterError("recordings differ in sample period; lead sets are not comparable");
    DissimilarityRow row;
    double sum = 0.0;
    for (int l = 0; l < 12; ++l) {
        row.lead[l] = dtw(a.leads[l], b.leads[l]);
        row.dtw_max = std::max(row.dtw_max, row.lead[l]);
        sum += row.lead[l];
    }
    row.dtw_avg = sum / 12.0;
    return row;
}

inline DissimilarityReport dissimilarity_report(const QRSRecording& baseline,
                                                const std::vector<const QRSRecording*>& scenarios) {
    DissimilarityReport rep;
    const std::size_t n = scenarios.size();
    for (const auto* s : scenarios) rep.rows.push_back(compare(*s, baseline));
    rep.pairwise.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) rep.pairwise[i][j] = rep.pairwise[j][i] =
            compare(*scenarios[i], *scenarios[j]).dtw_avg;
    return rep;
}

} // namespace qrsim
