#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qrsim/experiment.hpp"

namespace qrsim {

namespace svg {

inline std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline void open(std::ostream& o, double w, double h) {
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(w) << "\" height=\"" << f2(h)
      << "\" viewBox=\"0 0 " << f2(w) << ' ' << f2(h) << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << f2(w) << "\" height=\"" << f2(h) << "\" fill=\"white\"/>\n";
}

inline void close(std::ostream& o) { o << "</svg>\n"; }

inline void text(std::ostream& o, double x, double y, const std::string& s, const char* anchor = "start") {
    o << "<text x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" text-anchor=\"" << anchor << "\">" << escape(s)
      << "</text>\n";
}

/// White to dark red over [0, 1].
inline std::string heat(double u) {
    u = std::clamp(u, 0.0, 1.0);
    const int r = static_cast<int>(255 - 75 * u);
    const int g = static_cast<int>(255 - 235 * u);
    const int b = static_cast<int>(255 - 225 * u);
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

/// Grid of cells with row and column labels; values scaled by their max.
inline void matrix(std::ostream& o, const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                   const std::vector<std::vector<double>>& v, const std::string& title) {
    const double cw = 44, ch = 20, left = 200, top = 110;
    double mx = 0.0;
    for (const auto& r : v)
        for (double x : r) mx = std::max(mx, x);
    open(o, left + cw * static_cast<double>(cols.size()) + 20, top + ch * static_cast<double>(rows.size()) + 20);
    text(o, 10, 20, title);
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const double x = left + cw * (static_cast<double>(j) + 0.5), y = top - 6;
        o << "<text x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" transform=\"rotate(-60 " << f2(x) << ' ' << f2(y)
          << ")\">" << escape(cols[j]) << "</text>\n";
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double y = top + ch * static_cast<double>(i);
        text(o, left - 6, y + ch * 0.7, rows[i], "end");
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double val = v[i][j];
            o << "<rect class=\"cell\" x=\"" << f2(left + cw * static_cast<double>(j)) << "\" y=\"" << f2(y)
              << "\" width=\"" << f2(cw) << "\" height=\"" << f2(ch) << "\" fill=\"" << heat(mx > 0 ? val / mx : 0)
              << "\" stroke=\"#cccccc\"><title>" << escape(rows[i] + " / " + cols[j]) << ": " << f2(val)
              << "</title></rect>\n";
        }
    }
    close(o);
}

inline std::string polyline(const std::vector<double>& x, double x0, double y0, double w, double h, double dt,
                            double t_max, double amp) {
    std::ostringstream s;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double px = x0 + w * (static_cast<double>(k) * dt) / t_max;
        const double py = y0 + h * 0.5 - (h * 0.45) * x[k] / amp;
        s << (k ? " " : "") << f2(px) << ',' << f2(py);
    }
    return s.str();
}

} // namespace svg

inline void write_heatmap_svg(const ExperimentReport& rep, std::ostream& o) {
    std::vector<std::string> cols(lead_names.begin(), lead_names.end());
    std::vector<std::vector<double>> v;
    for (const auto& r : rep.dissimilarity.rows) v.emplace_back(r.lead.begin(), r.lead.end());
    svg::matrix(o, rep.row_names, cols, v, "Per-lead DTW against baseline");
}

inline void write_pairwise_svg(const ExperimentReport& rep, std::ostream& o) {
    svg::matrix(o, rep.pairwise_names, rep.pairwise_names, rep.dissimilarity.pairwise, "Pairwise mean DTW");
}

/// 12 panels (3 x 4), baseline in grey and scenario in red on a shared
/// time axis and amplitude scale.
inline void write_trace_svg(const QRSRecording& base, const QRSRecording& rec, const std::string& name,
                            std::ostream& o) {
    const double pw = 220, ph = 120, gap = 16, top = 30;
    const double t_max = std::max(1.0, std::max(static_cast<double>(base.samples() - 1) * base.sample_period,
                                                 static_cast<double>(rec.samples() - 1) * rec.sample_period));
    const double amp = std::max({base.max_abs(), rec.max_abs(), 1e-12});
    svg::open(o, 4 * (pw + gap) + gap, top + 3 * (ph + gap) + gap);
    svg::text(o, gap, 20, name + " (red) vs baseline (grey)");
    for (int l = 0; l < 12; ++l) {
        const double x0 = gap + (l % 4) * (pw + gap), y0 = top + (l / 4) * (ph + gap);
        o << "<rect x=\"" << svg::f2(x0) << "\" y=\"" << svg::f2(y0) << "\" width=\"" << svg::f2(pw)
          << "\" height=\"" << svg::f2(ph) << "\" fill=\"none\" stroke=\"#dddddd\"/>\n";
        o << "<line x1=\"" << svg::f2(x0) << "\" y1=\"" << svg::f2(y0 + ph / 2) << "\" x2=\"" << svg::f2(x0 + pw)
          << "\" y2=\"" << svg::f2(y0 + ph / 2) << "\" stroke=\"#eeeeee\"/>\n";
        svg::text(o, x0 + 4, y0 + 13, std::string(lead_names[l]));
        o << "<polyline fill=\"none\" stroke=\"#999999\" stroke-width=\"1\" points=\""
          << svg::polyline(base.leads[l], x0, y0, pw, ph, base.sample_period, t_max, amp) << "\"/>\n";
        o << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1\" points=\""
          << svg::polyline(rec.leads[l], x0, y0, pw, ph, rec.sample_period, t_max, amp) << "\"/>\n";
    }
    svg::close(o);
}

struct PlotResult {
    std::vector<std::string> files;
    std::vector<std::string> warnings;
};

/// Heatmap and pairwise matrix plus one trace overlay per successful
/// non-baseline scenario. Without scenarios the heatmap is skipped.
inline PlotResult emit_plots(const ExperimentReport& rep) {
    PlotResult out;
    auto emit = [&](const std::string& file, auto&& writer) {
        auto f = detail::open_out(rep.output_dir, file);
        writer(f);
        if (!f) throw IoError("failed writing '" + file + "'");
        out.files.push_back(file);
    };
    if (rep.row_names.empty()) {
        out.warnings.push_back("no scenarios besides the baseline; heatmap not emitted");
    } else {
        emit("heatmap.svg", [&](std::ostream& o) { write_heatmap_svg(rep, o); });
    }
    if (!rep.pairwise_names.empty()) emit("pairwise.svg", [&](std::ostream& o) { write_pairwise_svg(rep, o); });
    if (rep.scenarios.empty() || !rep.scenarios.front().ok) return out;
    const auto& base = rep.scenarios.front().recording;
    for (std::size_t i = 1; i < rep.scenarios.size(); ++i) {
        const auto& s = rep.scenarios[i];
        if (!s.ok) continue;
        emit("traces_" + s.name + ".svg", [&](std::ostream& o) { write_trace_svg(base, s.recording, s.name, o); });
    }
    return out;
}

} // namespace qrsim
