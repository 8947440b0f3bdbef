// qrsim command-line entry point: simulate, catalogue, mesh.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "qrsim/config.hpp"
#include "qrsim/experiment.hpp"
#include "qrsim/mesh_io.hpp"
#include "qrsim/scenario.hpp"
#include "qrsim/svg.hpp"
#include "qrsim/synthetic.hpp"

namespace {

using nlohmann::json;

int fail(const std::string& kind, const std::string& message, int code = 1) {
    json j{{"status", "error"}, {"kind", kind}, {"message", message}};
    std::cerr << j.dump() << '\n';
    return code;
}

void print_catalogue(const qrsim::CatalogueParams& p) {
    std::printf("%-32s %-14s %-15s %6s %6s %6s %6s %6s %6s %5s %6s\n", "scenario", "location", "extent", "tm0",
                "ab0", "rt0", "tm_r", "ab_r", "rt_r", "scar", "border");
    for (const auto& s : qrsim::catalogue(p)) {
        if (s.is_baseline()) {
            std::printf("%-32s -\n", s.name.c_str());
            continue;
        }
        const auto& r = s.regions.front();
        std::printf("%-32s %-14s %-15s %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %5.2f %6.2f\n", s.name.c_str(),
                    s.location.c_str(), s.extent.c_str(), r.center[0], r.center[1], r.center[2], r.radii[0],
                    r.radii[1], r.radii[2], s.cv_reduction.scar, s.cv_reduction.border);
    }
    std::printf("border zone: core radii x %.2f\n", p.border_scale);
}

void print_report(const qrsim::ExperimentReport& rep) {
    std::printf("%-32s %-7s %8s %8s %8s %8s %8s\n", "scenario", "status", "act_max", "act_mean", "qrs_ms", "dtw_max",
                "dtw_avg");
    for (const auto& s : rep.scenarios) {
        if (!s.ok) {
            std::printf("%-32s %-7s %s: %s\n", s.name.c_str(), "failed", s.error_kind.c_str(), s.error_message.c_str());
            continue;
        }
        double dmax = 0.0, davg = 0.0;
        for (std::size_t i = 0; i < rep.row_names.size(); ++i)
            if (rep.row_names[i] == s.name) {
                dmax = rep.dissimilarity.rows[i].dtw_max;
                davg = rep.dissimilarity.rows[i].dtw_avg;
            }
        std::printf("%-32s %-7s %8.2f %8.2f %8.1f %8.3f %8.3f\n", s.name.c_str(), "ok", s.act_max, s.act_mean,
                    s.features.duration, dmax, davg);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Infarct QRS simulation: eikonal activation, pseudo-ECG and QRS dissimilarity"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "Run baseline and scenarios from a config file");
    std::string config_path, scenarios, out_dir;
    int jobs = 0;
    sim->add_option("--config", config_path, "JSON experiment config")->required();
    sim->add_option("--scenarios", scenarios, "Comma-separated scenario names (baseline is always run)");
    sim->add_option("--out", out_dir, "Output directory (overrides the config)");
    sim->add_option("--jobs", jobs, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);

    auto* cat = app.add_subcommand("catalogue", "Show the scenario catalogue");
    bool print = false;
    std::string cat_config;
    cat->add_flag("--print", print, "Print the catalogue table")->required();
    cat->add_option("--config", cat_config, "Config whose infarct section overrides the defaults");

    auto* mesh = app.add_subcommand("mesh", "Generate the synthetic biventricular mesh");
    bool generate = false;
    std::string mesh_out, mesh_config;
    double resolution = 0.0;
    mesh->add_flag("--generate", generate, "Generate the synthetic mesh")->required();
    mesh->add_option("--out", mesh_out, "Output mesh file")->required();
    mesh->add_option("--resolution", resolution, "Mean edge length in cm (default 0.2)")->check(CLI::PositiveNumber);
    mesh->add_option("--config", mesh_config, "Config whose mesh section supplies the geometry");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (*sim) {
            auto cfg = qrsim::load_config(config_path);
            if (!scenarios.empty()) cfg.scenarios = qrsim::split_names(scenarios);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            if (jobs > 0) cfg.jobs = jobs;
            cfg.validate();
            const auto rep = qrsim::run_experiment(cfg);
            const auto plots = qrsim::emit_plots(rep);
            for (const auto& w : plots.warnings) std::cerr << "warning: " << w << '\n';
            print_report(rep);
            if (rep.failures() > 0) {
                json f = json::array();
                for (const auto& s : rep.scenarios)
                    if (!s.ok) f.push_back({{"scenario", s.name}, {"kind", s.error_kind}, {"message", s.error_message}});
                std::cerr << json{{"status", "partial_failure"}, {"failures", f}}.dump() << '\n';
                return 3;
            }
            return 0;
        }
        if (*cat) {
            qrsim::CatalogueParams p;
            if (!cat_config.empty()) p = qrsim::load_config(cat_config).infarct;
            print_catalogue(p);
            return 0;
        }
        if (*mesh) {
            qrsim::MeshSource src;
            if (!mesh_config.empty()) src = qrsim::load_config(mesh_config).mesh;
            if (!src.synthetic) return fail("parameter", "mesh --generate needs a synthetic mesh source");
            if (resolution > 0.0) src.resolution = resolution;
            const auto m = qrsim::generate_synthetic_biventricle(src.resolution, src.geometry);
            qrsim::save_mesh(m, mesh_out);
            std::printf("wrote %s: %zu nodes, %zu tets, mean edge %.4f cm, volume %.3f cm^3\n", mesh_out.c_str(),
                        m.node_count(), m.tet_count(), qrsim::mean_edge_length(m), qrsim::total_volume(m));
            return 0;
        }
    } catch (const qrsim::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
