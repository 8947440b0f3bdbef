#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "qrsim/config.hpp"
#include "qrsim/eikonal.hpp"
#include "qrsim/fibers.hpp"
#include "qrsim/mesh_io.hpp"
#include "qrsim/pseudo_ecg.hpp"
#include "qrsim/qrs_analysis.hpp"
#include "qrsim/scenario.hpp"
#include "qrsim/synthetic.hpp"

namespace qrsim {

// Scenario-independent state shared read-only by all workers.
struct PreparedExperiment {
    Mesh mesh;
    std::vector<FiberFrame> fibers;
    LeadField lead_field;
    std::vector<SnappedRoot> roots;
    std::vector<double> root_times;
};

inline Mesh load_or_generate_mesh(const MeshSource& src) {
    if (src.synthetic) return generate_synthetic_biventricle(src.resolution, src.geometry);
    return load_mesh(src.path);
}

inline PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    PreparedExperiment p;
    p.mesh = load_or_generate_mesh(cfg.mesh);
    p.fibers = assign_fibers(p.mesh, cfg.fibers);
    p.lead_field = build_lead_field(p.mesh, *cfg.electrodes);
    const Topology topo = build_topology(p.mesh);
    for (const auto& r : cfg.roots) p.roots.push_back(snap_root(p.mesh, topo, r));
    p.root_times = normalize_root_times(cfg.roots);
    return p;
}

struct ScenarioResult {
    std::string name;
    bool ok = false;
    std::string error_kind, error_message;
    double act_min = 0.0, act_max = 0.0, act_mean = 0.0; // ms
    std::size_t scar_elements = 0, border_elements = 0;
    QRSRecording recording;
    QRSFeatures features;
    std::string recording_path, activation_path;
    double einthoven_residual = 0.0;  // max |I + III - II|
    double goldberger_residual = 0.0; // max |aVR + aVL + aVF|
};

struct ExperimentReport {
    std::vector<ScenarioResult> scenarios; // baseline first, then catalogue order
    std::vector<std::string> row_names;      // dissimilarity rows: successful non-baseline scenarios
    std::vector<std::string> pairwise_names; // all successful scenarios, baseline first
    DissimilarityReport dissimilarity;
    std::string output_dir;

    std::size_t failures() const {
        return static_cast<std::size_t>(
            std::count_if(scenarios.begin(), scenarios.end(), [](const auto& s) { return !s.ok; }));
    }
    const ScenarioResult& operator[](const std::string& name) const {
        for (const auto& s : scenarios)
            if (s.name == name) return s;
        throw ParameterError("scenario '" + name + "' is not in the report");
    }
};

inline double einthoven_residual(const QRSRecording& r) {
    double e = 0.0;
    for (std::size_t k = 0; k < r.samples(); ++k)
        e = std::max(e, std::fabs(r.leads[lead::I][k] + r.leads[lead::III][k] - r.leads[lead::II][k]));
    return e;
}

inline double goldberger_residual(const QRSRecording& r) {
    double e = 0.0;
    for (std::size_t k = 0; k < r.samples(); ++k)
        e = std::max(e, std::fabs(r.leads[lead::aVR][k] + r.leads[lead::aVL][k] + r.leads[lead::aVF][k]));
    return e;
}

/// One scenario end to end. Library errors are captured in the result.
/// Files go to out_dir unless it is empty.
inline ScenarioResult run_scenario(const PreparedExperiment& p, const ExperimentConfig& cfg, const ScenarioSpec& spec,
                                   const Calibration* calibration, const std::string& out_dir) {
    ScenarioResult r;
    r.name = spec.name;
    try {
        const CVField cv = build_cv_field(p.mesh, spec, cfg.cv);
        r.scar_elements = cv.count(Zone::scar);
        r.border_elements = cv.count(Zone::border);
        std::vector<int> nodes;
        for (const auto& s : p.roots) nodes.push_back(s.node);
        const ActivationMap act = solve_eikonal(p.mesh, p.fibers, cv, nodes, p.root_times, cfg.eikonal);
        r.act_min = act.min();
        r.act_max = act.max();
        r.act_mean = act.mean();
        r.recording = simulate_qrs(p.mesh, act, cfg.tmpl, p.lead_field, cfg.ecg, calibration);
        r.einthoven_residual = einthoven_residual(r.recording);
        r.goldberger_residual = goldberger_residual(r.recording);
        r.features = analyze(r.recording, cfg.analysis);
        if (!out_dir.empty()) {
            r.recording_path = "qrs_" + spec.name + ".csv";
            write_recording_csv(r.recording, (std::filesystem::path(out_dir) / r.recording_path).string());
            if (cfg.write_activation) {
                r.activation_path = "activation_" + spec.name + ".txt";
                write_activation(act, (std::filesystem::path(out_dir) / r.activation_path).string());
            }
        }
        r.ok = true;
    } catch (const Error& e) {
        r.error_kind = e.kind();
        r.error_message = e.what();
    } catch (const std::exception& e) {
        r.error_kind = "internal";
        r.error_message = e.what();
    }
    return r;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::ofstream open_out(const std::string& dir, const std::string& name) {
    const auto path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

} // namespace detail

inline void write_dissimilarity_csv(const ExperimentReport& rep, std::ostream& out) {
    out << "scenario";
    for (auto n : lead_names) out << ',' << n;
    out << ",dtw_max,dtw_avg\n";
    for (std::size_t i = 0; i < rep.row_names.size(); ++i) {
        const auto& row = rep.dissimilarity.rows[i];
        out << rep.row_names[i];
        for (double v : row.lead) out << ',' << detail::num(v);
        out << ',' << detail::num(row.dtw_max) << ',' << detail::num(row.dtw_avg) << '\n';
    }
}

inline void write_pairwise_csv(const ExperimentReport& rep, std::ostream& out) {
    out << "scenario";
    for (const auto& n : rep.pairwise_names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < rep.pairwise_names.size(); ++i) {
        out << rep.pairwise_names[i];
        for (double v : rep.dissimilarity.pairwise[i]) out << ',' << detail::num(v);
        out << '\n';
    }
}

inline void write_features_csv(const ExperimentReport& rep, std::ostream& out) {
    out << "scenario,lead,has_qrs,onset_ms,offset_ms,duration_ms,q_amp,q_duration_ms,r_amp,r_mm,s_amp,fqrs_count,"
           "pathological_q\n";
    for (const auto& s : rep.scenarios) {
        if (!s.ok) continue;
        for (int l = 0; l < 12; ++l) {
            const auto& f = s.features.lead[l];
            out << s.name << ',' << lead_names[l] << ',' << (f.has_qrs ? 1 : 0) << ',' << detail::num(f.onset) << ','
                << detail::num(f.offset) << ',' << detail::num(f.duration) << ',' << detail::num(f.q_amp) << ','
                << detail::num(f.q_duration) << ',' << detail::num(f.r_amp) << ','
                << detail::num(f.r_amp * s.recording.calibration.mm_per_unit) << ',' << detail::num(f.s_amp) << ','
                << f.fqrs_count << ',' << (detect_pathological_q(f) ? 1 : 0) << '\n';
        }
    }
}

inline void write_summary_csv(const ExperimentReport& rep, std::ostream& out) {
    out << "scenario,status,error,act_min_ms,act_max_ms,act_mean_ms,scar_elements,border_elements,qrs_duration_ms,"
           "pathological_q,fqrs_inferior,fqrs_anterior,fqrs_lateral,prwp,dtw_max,dtw_avg,einthoven_residual,"
           "goldberger_residual,recording\n";
    for (const auto& s : rep.scenarios) {
        out << s.name << ',';
        if (!s.ok) {
            out << "failed," << detail::csv_field(s.error_kind + ": " + s.error_message) << ",,,,,,,,,,,,,,,,\n";
            continue;
        }
        double dmax = 0.0, davg = 0.0;
        for (std::size_t i = 0; i < rep.row_names.size(); ++i)
            if (rep.row_names[i] == s.name) {
                dmax = rep.dissimilarity.rows[i].dtw_max;
                davg = rep.dissimilarity.rows[i].dtw_avg;
            }
        const auto& f = s.features;
        out << "ok,," << detail::num(s.act_min) << ',' << detail::num(s.act_max) << ',' << detail::num(s.act_mean)
            << ',' << s.scar_elements << ',' << s.border_elements << ',' << detail::num(f.duration) << ','
            << f.pathological_q << ',' << f.fqrs_inferior << ',' << f.fqrs_anterior << ',' << f.fqrs_lateral << ','
            << f.prwp << ',' << detail::num(dmax) << ',' << detail::num(davg) << ','
            << detail::sci(s.einthoven_residual) << ',' << detail::sci(s.goldberger_residual) << ','
            << s.recording_path << '\n';
    }
}

/// Pairwise mean per-lead DTW over the successful recordings; cells are
/// independent, so the worker count does not change the result.
inline void assemble_dissimilarity(ExperimentReport& rep, int jobs) {
    std::vector<const ScenarioResult*> ok;
    for (const auto& s : rep.scenarios)
        if (s.ok) ok.push_back(&s);
    rep.row_names.clear();
    rep.pairwise_names.clear();
    rep.dissimilarity = {};
    if (ok.empty() || ok.front()->name != rep.scenarios.front().name) return; // baseline failed
    for (const auto* s : ok) rep.pairwise_names.push_back(s->name);
    for (std::size_t i = 1; i < ok.size(); ++i) rep.row_names.push_back(ok[i]->name);
    rep.dissimilarity.rows.resize(rep.row_names.size());
    const std::size_t n = ok.size();
    rep.dissimilarity.pairwise.assign(n, std::vector<double>(n, 0.0));
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) cells.emplace_back(i, j);
    std::vector<DissimilarityRow> res(cells.size());
    parallel_for(cells.size(), jobs,
                 [&](std::size_t c) { res[c] = compare(ok[cells[c].second]->recording, ok[cells[c].first]->recording); });
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto [i, j] = cells[c];
        rep.dissimilarity.pairwise[i][j] = rep.dissimilarity.pairwise[j][i] = res[c].dtw_avg;
        if (i == 0) rep.dissimilarity.rows[j - 1] = res[c];
    }
}

inline void write_report_tables(const ExperimentReport& rep) {
    auto d = detail::open_out(rep.output_dir, "dissimilarity.csv");
    write_dissimilarity_csv(rep, d);
    auto p = detail::open_out(rep.output_dir, "pairwise.csv");
    write_pairwise_csv(rep, p);
    auto f = detail::open_out(rep.output_dir, "features.csv");
    write_features_csv(rep, f);
    auto s = detail::open_out(rep.output_dir, "summary.csv");
    write_summary_csv(rep, s);
}

/// Baseline first (it fixes the calibration), then the other selected
/// scenarios on a worker pool, then single-threaded report assembly.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    const auto specs = cfg.selected_scenarios();
    ExperimentReport rep;
    rep.output_dir = cfg.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg.output_dir))
        throw IoError("cannot create output directory '" + cfg.output_dir + "'");

    const PreparedExperiment prep = prepare_experiment(cfg);
    rep.scenarios.resize(specs.size());
    rep.scenarios[0] = run_scenario(prep, cfg, specs[0], nullptr, cfg.output_dir);
    if (rep.scenarios[0].ok) {
        const Calibration cal = rep.scenarios[0].recording.calibration;
        parallel_for(specs.size() - 1, cfg.jobs, [&](std::size_t i) {
            rep.scenarios[i + 1] = run_scenario(prep, cfg, specs[i + 1], &cal, cfg.output_dir);
        });
    } else {
        for (std::size_t i = 1; i < specs.size(); ++i) {
            rep.scenarios[i].name = specs[i].name;
            rep.scenarios[i].error_kind = "baseline";
            rep.scenarios[i].error_message = "baseline failed; no calibration available";
        }
    }
    assemble_dissimilarity(rep, cfg.jobs);
    write_report_tables(rep);
    return rep;
}

} // namespace qrsim
