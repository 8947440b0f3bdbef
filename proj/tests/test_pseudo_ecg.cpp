#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "qrsim/pseudo_ecg.hpp"
#include "qrsim/qrs_analysis.hpp"
#include "support.hpp"

using namespace qrsim;
using testing_support::small_mesh;

namespace {

Mesh single_tet(const std::array<Vec3, 4>& p) {
    Mesh m;
    m.nodes.assign(p.begin(), p.end());
    m.tets = {{0, 1, 2, 3}};
    if (signed_volume(m, 0) < 0) std::swap(m.tets[0][2], m.tets[0][3]);
    m.coords.assign(4, CobivecoCoord{});
    m.surface_tags.assign(4, surface::epicardium);
    m.endo_layer.assign(4, EndoLayer::none);
    return m;
}

// Box mesh plus its mirror image in the plane x = 0.
Mesh mirrored_pair() {
    const Mesh a = make_box_mesh(3, 2, 2, 0.25, Vec3(1.0, -0.25, -0.25));
    Mesh m = a;
    const int n = static_cast<int>(a.node_count());
    for (const Vec3& p : a.nodes) m.nodes.emplace_back(-p.x(), p.y(), p.z());
    for (const Tet& t : a.tets) m.tets.push_back({t[0] + n, t[1] + n, t[3] + n, t[2] + n});
    m.coords.insert(m.coords.end(), a.coords.begin(), a.coords.end());
    m.surface_tags.insert(m.surface_tags.end(), a.surface_tags.begin(), a.surface_tags.end());
    m.endo_layer.insert(m.endo_layer.end(), a.endo_layer.begin(), a.endo_layer.end());
    return m;
}

ActivationMap activation_of(const Mesh& m, const std::function<double(const Vec3&)>& f) {
    ActivationMap a;
    for (const Vec3& p : m.nodes) a.time.push_back(f(p));
    return a;
}

const ElectrodeSet& electrodes() {
    static const ElectrodeSet es = testing_support::default_config().electrodes.value();
    return es;
}

struct SmallRun {
    ActivationMap act;
    LeadField lf;
};

const SmallRun& small_run() {
    static const SmallRun run = [] {
        const Mesh& m = small_mesh();
        const auto fib = assign_fibers(m);
        const auto cv = build_cv_field(m, catalogue().front());
        return SmallRun{solve_eikonal(m, fib, cv, default_roots()), build_lead_field(m, electrodes())};
    }();
    return run;
}

} // namespace

TEST(Template, RestUpstrokeAndPlateau) {
    const TransmembraneTemplate tp;
    EXPECT_DOUBLE_EQ(transmembrane_at(tp, 10.0, 9.9), -85.0);
    EXPECT_DOUBLE_EQ(transmembrane_at(tp, 10.0, 10.5), -27.5);
    EXPECT_DOUBLE_EQ(transmembrane_at(tp, 10.0, 10.0), -85.0);
    EXPECT_DOUBLE_EQ(transmembrane_at(tp, 10.0, 11.0), 30.0);
    EXPECT_DOUBLE_EQ(transmembrane_at(tp, 10.0, 500.0), 30.0);
    EXPECT_THROW((TransmembraneTemplate{30.0, 30.0, 1.0}.validate()), ParameterError);
    EXPECT_THROW((TransmembraneTemplate{-85.0, 30.0, 0.0}.validate()), ParameterError);
}

TEST(ElectrodePotential, UniformPotentialGivesZero) {
    const Mesh& m = small_mesh();
    const auto act = activation_of(m, [](const Vec3&) { return 4.0; });
    for (double t : {0.0, 4.5, 10.0})
        EXPECT_NEAR(electrode_potential(m, act, {}, electrodes()["V3"], t, 1.0), 0.0, 1e-9);
}

TEST(ElectrodePotential, LinearInGain) {
    const Mesh& m = small_mesh();
    const auto act = activation_of(m, [](const Vec3& p) { return 10.0 + 3.0 * p.x() - p.z(); });
    const double one = electrode_potential(m, act, {}, electrodes()["V2"], 10.3, 1.0);
    const double two = electrode_potential(m, act, {}, electrodes()["V2"], 10.3, 2.0);
    ASSERT_NE(one, 0.0);
    EXPECT_NEAR(two, 2.0 * one, 1e-12 * std::fabs(one));
}

TEST(ElectrodePotential, MirrorPatchesCancelOnTheSymmetryPlane) {
    const Mesh m = mirrored_pair();
    // Vm is linear in x across both patches at t = 5, so both carry the
    // same gradient while their geometry is mirrored.
    const auto act = activation_of(m, [](const Vec3& p) { return 5.0 - 0.2 * (p.x() + 2.0); });
    const Vec3 e(0.0, 3.0, 1.5);
    const double both = electrode_potential(m, act, {}, e, 5.0, 1.0);
    const Mesh half = make_box_mesh(3, 2, 2, 0.25, Vec3(1.0, -0.25, -0.25));
    const double one = electrode_potential(half, activation_of(half, [](const Vec3& p) { return 5.0 - 0.2 * (p.x() + 2.0); }),
                                           {}, e, 5.0, 1.0);
    ASSERT_GT(std::fabs(one), 1e-3);
    EXPECT_NEAR(both, 0.0, 1e-6 * std::fabs(one));
}

TEST(ElectrodePotential, SingleTetDipoleFallsFourfoldWithDoubledDistance) {
    const Mesh m = single_tet({Vec3(0, 0, 0), Vec3(0.2, 0, 0), Vec3(0, 0.2, 0), Vec3(0, 0, 0.2)});
    ActivationMap act;
    act.time = {0.0, 0.3, 0.1, 0.6};
    const double t = 0.5;
    const TransmembraneTemplate tp;
    // Independent gradient of the linear Vm: solve the 3x3 edge system.
    Mat3 E;
    Vec3 dv;
    for (int i = 1; i < 4; ++i) {
        E.row(i - 1) = (m.nodes[i] - m.nodes[0]).transpose();
        dv[i - 1] = transmembrane_at(tp, act.time[i], t) - transmembrane_at(tp, act.time[0], t);
    }
    const Vec3 g = E.partialPivLu().solve(dv);
    const Vec3 c = (m.nodes[0] + m.nodes[1] + m.nodes[2] + m.nodes[3]) / 4.0;
    const double vol = 0.2 * 0.2 * 0.2 / 6.0;
    const Vec3 dir = Vec3(1.0, 0.4, -0.3).normalized();
    for (double d : {5.0, 10.0, 20.0}) {
        const Vec3 e1 = c + d * dir, e2 = c + 2 * d * dir;
        auto oracle = [&](const Vec3& e) {
            const Vec3 r = c - e;
            return -g.dot(-r / std::pow(r.norm(), 3)) * vol;
        };
        const double p1 = electrode_potential(m, act, tp, e1, t, 1.0);
        const double p2 = electrode_potential(m, act, tp, e2, t, 1.0);
        EXPECT_NEAR(p1, oracle(e1), 1e-9 * std::fabs(oracle(e1)));
        EXPECT_NEAR(p1 / p2, 4.0, 1e-9);
    }
}

TEST(ElectrodePotential, ElectrodeInsideTissueIsRejected) {
    const Mesh& m = small_mesh();
    const auto act = activation_of(m, [](const Vec3&) { return 0.0; });
    EXPECT_THROW(electrode_potential(m, act, {}, m.nodes[10], 1.0, 1.0), ValidationError);
    ElectrodeSet es = electrodes();
    es.position[4] = m.nodes[0] + Vec3(0.5, 0, 0);
    EXPECT_THROW(build_lead_field(m, es), ValidationError);
}

TEST(ElectrodePotential, NodeWeightsMatchTheElementSum) {
    const Mesh& m = small_mesh();
    const auto& run = small_run();
    const TransmembraneTemplate tp;
    for (int e : {0, 3, 8})
        for (double t : {5.0, 17.5, 30.0}) {
            const double direct = electrode_potential(m, run.act, tp, electrodes().position[e], t, 1.0);
            double via = 0.0;
            for (std::size_t n = 0; n < m.node_count(); ++n)
                via += (transmembrane_at(tp, run.act.time[n], t) - tp.v_rest) * run.lf.weight[e][n];
            EXPECT_NEAR(via, direct, 1e-9 * (1.0 + std::fabs(direct)));
        }
}

TEST(Leads, EinthovenAndGoldbergerIdentities) {
    std::mt19937 rng(1);
    std::normal_distribution<double> n(0.0, 3.0);
    std::array<std::vector<double>, 9> phi;
    for (auto& p : phi)
        for (int k = 0; k < 50; ++k) p.push_back(n(rng));
    const auto L = derive_leads(phi);
    for (int k = 0; k < 50; ++k) {
        EXPECT_NEAR(L[lead::I][k] + L[lead::III][k], L[lead::II][k], 1e-9);
        EXPECT_NEAR(L[lead::aVR][k] + L[lead::aVL][k] + L[lead::aVF][k], 0.0, 1e-9);
        EXPECT_NEAR(L[lead::aVR][k], -0.5 * (L[lead::I][k] + L[lead::II][k]), 1e-9);
        const double wct = (phi[0][k] + phi[1][k] + phi[2][k]) / 3.0;
        EXPECT_NEAR(L[lead::V4][k], phi[6][k] - wct, 1e-12);
    }
}

TEST(Recording, BaselineIsNormalizedAndCalibrated) {
    const auto& run = small_run();
    const auto rec = simulate_qrs(small_mesh(), run.act, {}, run.lf);
    EXPECT_NEAR(rec.max_abs(), 1.0, 1e-12);
    EXPECT_NEAR(largest_r(rec.leads) * rec.calibration.mm_per_unit, 10.0, 1e-9);
    const std::size_t expected = static_cast<std::size_t>(std::floor(run.act.max() + 1.0 + 5.0)) + 1;
    for (const auto& l : rec.leads) EXPECT_EQ(l.size(), expected);
    for (std::size_t k = 0; k < rec.samples(); ++k) {
        EXPECT_NEAR(rec.leads[lead::I][k] + rec.leads[lead::III][k], rec.leads[lead::II][k], 1e-9);
        EXPECT_NEAR(rec.leads[lead::aVR][k] + rec.leads[lead::aVL][k] + rec.leads[lead::aVF][k], 0.0, 1e-9);
    }
    // Before any activation every lead is flat at zero.
    for (const auto& l : rec.leads) EXPECT_EQ(l[0], 0.0);
}

TEST(Recording, SuppliedCalibrationIsReused) {
    const auto& run = small_run();
    const auto base = simulate_qrs(small_mesh(), run.act, {}, run.lf);
    EcgOptions doubled;
    doubled.gain_k = 2.0;
    const auto rec = simulate_qrs(small_mesh(), run.act, {}, run.lf, doubled, &base.calibration);
    EXPECT_EQ(rec.calibration.scale, base.calibration.scale);
    EXPECT_EQ(rec.calibration.mm_per_unit, base.calibration.mm_per_unit);
    for (int l = 0; l < 12; ++l)
        for (std::size_t k = 0; k < rec.samples(); ++k) ASSERT_NEAR(rec.leads[l][k], 2.0 * base.leads[l][k], 1e-9);
}

TEST(Recording, FlatBaselineCannotBeNormalized) {
    const Mesh& m = small_mesh();
    ActivationMap act;
    act.time.assign(m.node_count(), 0.0);
    EXPECT_THROW(simulate_qrs(m, act, {}, small_run().lf), NoQrsError);
}

TEST(Recording, TimeShiftMovesEveryTrace) {
    const auto& run = small_run();
    const auto base = simulate_qrs(small_mesh(), run.act, {}, run.lf);
    ActivationMap shifted = run.act;
    for (double& t : shifted.time) t += 7.0;
    const auto rec = simulate_qrs(small_mesh(), shifted, {}, run.lf, {}, &base.calibration);
    ASSERT_EQ(rec.samples(), base.samples() + 7);
    for (int l = 0; l < 12; ++l) {
        for (std::size_t k = 0; k < 7; ++k) ASSERT_NEAR(rec.leads[l][k], 0.0, 1e-9);
        for (std::size_t k = 0; k < base.samples(); ++k) ASSERT_NEAR(rec.leads[l][k + 7], base.leads[l][k], 1e-9);
    }
}

TEST(Recording, HalvingTheSamplePeriodKeepsDtwStable) {
    const Mesh& m = small_mesh();
    const auto fib = assign_fibers(m);
    const auto& run = small_run();
    const auto cat = catalogue();
    const auto& scen = find_scenario(cat, "lateral_transmural");
    const auto act = solve_eikonal(m, fib, build_cv_field(m, scen), default_roots());
    EcgOptions fine;
    fine.sample_period = 0.5;
    const auto base1 = simulate_qrs(m, run.act, {}, run.lf);
    const auto base05 = simulate_qrs(m, run.act, {}, run.lf, fine);
    const auto rec1 = simulate_qrs(m, act, {}, run.lf, {}, &base1.calibration);
    const auto rec05 = simulate_qrs(m, act, {}, run.lf, fine, &base05.calibration);
    auto decimate = [](const std::vector<double>& x) {
        std::vector<double> out;
        for (std::size_t k = 0; k < x.size(); k += 2) out.push_back(x[k]);
        return out;
    };
    for (int l = 0; l < 12; ++l) {
        const double coarse = dtw(rec1.leads[l], base1.leads[l]);
        const double refined = dtw(decimate(rec05.leads[l]), decimate(base05.leads[l]));
        EXPECT_LE(std::fabs(refined - coarse), 0.02 * coarse + 1e-12) << lead_names[l];
    }
}

TEST(Recording, CsvHasHeaderAndSixDecimals) {
    QRSRecording rec;
    rec.sample_period = 0.5;
    for (int l = 0; l < 12; ++l) rec.leads[l] = {0.0, l * 0.1234567};
    std::ostringstream out;
    write_recording_csv(rec, out);
    std::istringstream in(out.str());
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    EXPECT_EQ(header, "time_ms,I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6");
    EXPECT_EQ(row0.substr(0, 18), "0.000000,0.000000,");
    EXPECT_EQ(row1.substr(0, 27), "0.500000,0.000000,0.123457,");
}
