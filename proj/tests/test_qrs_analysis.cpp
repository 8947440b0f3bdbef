#include <gtest/gtest.h>

#include <random>

#include "qrsim/qrs_analysis.hpp"

using namespace qrsim;

namespace {

// Full (n+1) x (m+1) table with an infinite border.
double dtw_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> D(a.size() + 1, std::vector<double>(b.size() + 1, inf));
    D[0][0] = 0.0;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            D[i][j] = std::fabs(a[i - 1] - b[j - 1]) + std::min({D[i - 1][j], D[i][j - 1], D[i - 1][j - 1]});
    return D[a.size()][b.size()];
}

// Piecewise-linear trace through (time ms, value) knots, 1 ms samples,
// zero outside the knots.
std::vector<double> trace(const std::vector<std::pair<double, double>>& knots, std::size_t n = 140) {
    std::vector<double> x(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k);
        for (std::size_t i = 0; i + 1 < knots.size(); ++i)
            if (t >= knots[i].first && t <= knots[i + 1].first) {
                const double u = (t - knots[i].first) / (knots[i + 1].first - knots[i].first);
                x[k] = knots[i].second + u * (knots[i + 1].second - knots[i].second);
                break;
            }
    }
    return x;
}

// Direction changes of the sampled trace, ignoring flat steps.
int extrema_census(const std::vector<double>& x) {
    int changes = 0, last = 0;
    for (std::size_t k = 1; k < x.size(); ++k) {
        const int s = (x[k] > x[k - 1]) - (x[k] < x[k - 1]);
        if (s == 0) continue;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

const std::vector<std::pair<double, double>> monophasic{{20, 0}, {50, 1.0}, {80, 0}};
const std::vector<std::pair<double, double>> rsr{{20, 0}, {40, 1.0}, {55, -0.3}, {70, 0.6}, {85, 0}};
const std::vector<std::pair<double, double>> rsrsr{{20, 0}, {35, 1.0}, {45, -0.3}, {55, 0.6},
                                                   {65, -0.4}, {75, 0.5}, {90, 0}};

QRSRecording recording_with(const std::vector<double>& base) {
    QRSRecording rec;
    rec.sample_period = 1.0;
    for (auto& l : rec.leads) l = base;
    rec.calibration.mm_per_unit = 10.0;
    return rec;
}

LeadFeatures with_r(double r) {
    LeadFeatures f;
    f.has_qrs = true;
    f.r_amp = r;
    return f;
}

} // namespace

TEST(Dtw, HandWorkedExample) {
    EXPECT_DOUBLE_EQ(dtw(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3}), 1.0);
    EXPECT_DOUBLE_EQ(dtw_oracle({1, 2, 3}, {1, 3}), 1.0);
}

TEST(Dtw, IdenticalSeriesCostNothing) {
    const std::vector<double> a{0.1, -0.4, 2.0, 2.0, 0.3};
    EXPECT_EQ(dtw(a, a), 0.0);
    EXPECT_EQ(dtw(std::vector<double>{5.0}, std::vector<double>{5.0}), 0.0);
}

TEST(Dtw, MatchesFullTableOracleAndIsSymmetric) {
    std::mt19937 rng(21);
    std::uniform_int_distribution<int> len(1, 40);
    std::normal_distribution<double> val(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(len(rng)), b(len(rng));
        for (double& v : a) v = val(rng);
        for (double& v : b) v = val(rng);
        const double d = dtw(a, b);
        EXPECT_NEAR(d, dtw_oracle(a, b), 1e-9 * (1 + d));
        EXPECT_NEAR(d, dtw(b, a), 1e-12 * (1 + d));
        EXPECT_GE(d, 0.0);
    }
}

TEST(Dtw, EmptyInputIsRejected) {
    EXPECT_THROW(dtw(std::vector<double>{}, std::vector<double>{1.0}), ParameterError);
    EXPECT_THROW(dtw(std::vector<double>{1.0}, std::vector<double>{}), ParameterError);
}

TEST(Delineate, PulseBoundsAreFound) {
    std::vector<double> x(120, 0.0);
    for (int k = 10; k <= 90; ++k) x[k] = 1.0;
    const auto iv = delineate(x, 1.0);
    EXPECT_EQ(iv.onset, 10.0);
    EXPECT_EQ(iv.offset, 90.0);
    EXPECT_EQ(iv.duration(), 80.0);
    for (int k = 91; k < 110; ++k) x[k] = -0.01;
    EXPECT_EQ(delineate(x, 1.0).offset, 90.0);
    EXPECT_EQ(delineate(x, 0.5).offset, 45.0);
}

TEST(Delineate, FlatTraceHasNoQrs) {
    EXPECT_THROW(delineate(std::vector<double>(50, 0.0), 1.0), NoQrsError);
}

TEST(Delineate, TrimmingToTheWindowIsIdempotent) {
    for (const auto* knots : {&monophasic, &rsr, &rsrsr}) {
        const auto x = trace(*knots);
        const auto iv = delineate(x, 1.0);
        const std::vector<double> trimmed(x.begin() + static_cast<long>(iv.onset),
                                          x.begin() + static_cast<long>(iv.offset) + 1);
        EXPECT_NEAR(delineate(trimmed, 1.0).duration(), iv.duration(), 1.0);
    }
}

TEST(Fqrs, CanonicalAndFragmentedFixtures) {
    const auto mono = trace(monophasic), r1 = trace(rsr), r3 = trace(rsrsr);
    EXPECT_EQ(count_fqrs(mono), 0);
    EXPECT_EQ(count_fqrs(r1), 1);
    EXPECT_EQ(count_fqrs(r3), 3);
    // Extrema census minus the canonical R and S.
    EXPECT_EQ(extrema_census(r3) - 2, 3);
    EXPECT_EQ(extrema_census(r1) - 2, 1);
}

TEST(Fqrs, InitialQIsCanonical) {
    const auto qrs = trace({{20, 0}, {28, -0.2}, {45, 1.0}, {60, -0.3}, {75, 0}});
    EXPECT_EQ(count_fqrs(qrs), 0);
    const auto qrsr = trace({{20, 0}, {28, -0.2}, {40, 1.0}, {52, -0.3}, {62, 0.5}, {75, 0}});
    EXPECT_EQ(count_fqrs(qrsr), 1);
}

TEST(Fqrs, RippleBelowProminenceIsIgnored) {
    auto x = trace(monophasic);
    for (int k = 30; k < 70; k += 4) x[k] += 0.04;
    EXPECT_GT(extrema_census(x), 2);
    EXPECT_EQ(count_fqrs(x), 0);
}

TEST(Fqrs, InvariantUnderPositiveRescaling) {
    for (const auto* knots : {&monophasic, &rsr, &rsrsr}) {
        const auto x = trace(*knots);
        for (double s : {0.01, 3.7, 250.0}) {
            std::vector<double> y = x;
            for (double& v : y) v *= s;
            EXPECT_EQ(count_fqrs(y), count_fqrs(x));
        }
    }
}

TEST(LeadFeaturesTest, QRAndSAreMeasured) {
    const auto x = trace({{20, 0}, {25, -0.2}, {30, 0}, {45, 1.0}, {60, -0.3}, {75, 0}});
    const auto f = lead_features(x, 1.0);
    ASSERT_TRUE(f.has_qrs);
    EXPECT_DOUBLE_EQ(f.q_amp, -0.2);
    EXPECT_DOUBLE_EQ(f.r_amp, 1.0);
    EXPECT_DOUBLE_EQ(f.r_time, 45.0);
    EXPECT_DOUBLE_EQ(f.s_amp, -0.3);
    EXPECT_DOUBLE_EQ(f.duration, f.offset - f.onset);
    EXPECT_LT(f.onset, f.offset);
    EXPECT_NEAR(f.q_duration, 9.0, 1.0);
    EXPECT_FALSE(lead_features(std::vector<double>(30, 0.0), 1.0).has_qrs);
}

TEST(PathologicalQ, DurationClause) {
    LeadFeatures f = with_r(1.0);
    f.q_amp = -0.05;
    f.q_duration = 30.0;
    EXPECT_TRUE(detect_pathological_q(f));
    f.q_duration = 29.0;
    EXPECT_FALSE(detect_pathological_q(f));
}

TEST(PathologicalQ, AmplitudeClause) {
    LeadFeatures f = with_r(1.0);
    f.q_duration = 10.0;
    f.q_amp = -0.25;
    EXPECT_TRUE(detect_pathological_q(f));
    f.q_amp = -0.24;
    EXPECT_FALSE(detect_pathological_q(f));
}

TEST(PathologicalQ, NoQWaveIsNotPathological) {
    EXPECT_FALSE(detect_pathological_q(with_r(1.0)));
    EXPECT_FALSE(detect_pathological_q(LeadFeatures{}));
}

TEST(PathologicalQ, DetectedFromAWideQInATrace) {
    const auto x = trace({{10, 0}, {13, -0.1}, {44, -0.1}, {46, 0}, {60, 1.0}, {80, 0}});
    const auto f = lead_features(x, 1.0);
    EXPECT_GE(f.q_duration, 30.0);
    EXPECT_TRUE(detect_pathological_q(f));
}

TEST(Prwp, LowRInV3) {
    std::array<LeadFeatures, 12> f;
    const double r[6] = {0.2, 0.5, 0.15, 1.0, 1.2, 1.0}; // V3 at 1.5 mm
    for (int i = 0; i < 6; ++i) f[lead::V1 + i] = with_r(r[i]);
    EXPECT_TRUE(detect_prwp(f, 10.0));
}

TEST(Prwp, ReversedV1V2) {
    std::array<LeadFeatures, 12> f;
    const double r[6] = {0.4, 0.3, 0.6, 0.8, 1.0, 0.9};
    for (int i = 0; i < 6; ++i) f[lead::V1 + i] = with_r(r[i]);
    EXPECT_TRUE(detect_prwp(f, 10.0));
}

TEST(Prwp, ReversedV5V6) {
    std::array<LeadFeatures, 12> f;
    const double r[6] = {0.1, 0.3, 0.6, 0.8, 0.9, 1.0};
    for (int i = 0; i < 6; ++i) f[lead::V1 + i] = with_r(r[i]);
    EXPECT_TRUE(detect_prwp(f, 10.0));
}

TEST(Prwp, NormalProgressionIsNegative) {
    std::array<LeadFeatures, 12> f;
    const double r[6] = {0.1, 0.3, 0.6, 0.8, 1.0, 0.9};
    for (int i = 0; i < 6; ++i) f[lead::V1 + i] = with_r(r[i]);
    EXPECT_FALSE(detect_prwp(f, 10.0));
    f[lead::V4] = with_r(0.2); // exactly 2 mm counts
    EXPECT_TRUE(detect_prwp(f, 10.0));
}

TEST(Analyze, PathologicalQIgnoresAvr) {
    QRSRecording rec = recording_with(trace(monophasic));
    rec.leads[lead::aVR] = trace({{20, 0}, {30, -0.8}, {40, 0}, {50, 0.5}, {80, 0}});
    EXPECT_FALSE(analyze(rec).pathological_q);
    rec.leads[lead::aVL] = rec.leads[lead::aVR];
    EXPECT_TRUE(analyze(rec).pathological_q);
}

TEST(Analyze, FragmentationIsReportedPerLeadGroup) {
    QRSRecording rec = recording_with(trace(monophasic));
    auto f = analyze(rec);
    EXPECT_FALSE(f.fqrs_inferior || f.fqrs_anterior || f.fqrs_lateral);
    rec.leads[lead::V2] = trace(rsr);
    f = analyze(rec);
    EXPECT_TRUE(f.fqrs_anterior);
    EXPECT_FALSE(f.fqrs_inferior);
    EXPECT_FALSE(f.fqrs_lateral);
    rec.leads[lead::aVF] = trace(rsrsr);
    rec.leads[lead::V6] = trace(rsr);
    f = analyze(rec);
    EXPECT_TRUE(f.fqrs_inferior && f.fqrs_lateral);
    EXPECT_EQ(f.lead[lead::aVF].fqrs_count, 3);
}

TEST(Analyze, DurationIsTheLongestLead) {
    QRSRecording rec = recording_with(trace(monophasic));
    rec.leads[lead::III] = trace({{10, 0}, {50, 1.0}, {100, 0}});
    const auto f = analyze(rec);
    double longest = 0.0;
    for (const auto& l : f.lead) longest = std::max(longest, l.duration);
    EXPECT_EQ(f.duration, longest);
    EXPECT_EQ(f.duration, f.lead[lead::III].duration);
}

TEST(Analyze, FlatRecordingHasNoQrs) {
    EXPECT_THROW(analyze(recording_with(std::vector<double>(40, 0.0))), NoQrsError);
}

TEST(Analyze, DeterministicBitForBit) {
    QRSRecording rec = recording_with(trace(rsrsr));
    rec.leads[lead::V3] = trace(rsr);
    const auto a = analyze(rec), b = analyze(rec);
    for (int l = 0; l < 12; ++l) {
        EXPECT_EQ(a.lead[l].onset, b.lead[l].onset);
        EXPECT_EQ(a.lead[l].offset, b.lead[l].offset);
        EXPECT_EQ(a.lead[l].q_amp, b.lead[l].q_amp);
        EXPECT_EQ(a.lead[l].r_amp, b.lead[l].r_amp);
        EXPECT_EQ(a.lead[l].s_amp, b.lead[l].s_amp);
        EXPECT_EQ(a.lead[l].fqrs_count, b.lead[l].fqrs_count);
    }
    EXPECT_EQ(a.duration, b.duration);
    EXPECT_EQ(a.prwp, b.prwp);
}

TEST(Report, BaselineAgainstItselfIsZero) {
    const QRSRecording base = recording_with(trace(monophasic));
    const auto rep = dissimilarity_report(base, {&base});
    ASSERT_EQ(rep.rows.size(), 1u);
    for (double v : rep.rows[0].lead) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(rep.rows[0].dtw_max, 0.0);
    EXPECT_EQ(rep.pairwise[0][0], 0.0);
}

TEST(Report, PairwiseIsSymmetricWithZeroDiagonal) {
    const QRSRecording base = recording_with(trace(monophasic));
    std::vector<QRSRecording> recs{recording_with(trace(rsr)), recording_with(trace(rsrsr)),
                                   recording_with(trace({{10, 0}, {60, 0.8}, {100, 0}}))};
    recs[2].leads[lead::V5] = trace(rsr);
    std::vector<const QRSRecording*> ptr;
    for (const auto& r : recs) ptr.push_back(&r);
    const auto rep = dissimilarity_report(base, ptr);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& row = rep.rows[i];
        double sum = 0.0, mx = 0.0;
        for (int l = 0; l < 12; ++l) {
            EXPECT_GE(row.lead[l], 0.0);
            EXPECT_DOUBLE_EQ(row.lead[l], dtw_oracle(recs[i].leads[l], base.leads[l]));
            sum += row.lead[l];
            mx = std::max(mx, row.lead[l]);
        }
        EXPECT_DOUBLE_EQ(row.dtw_avg, sum / 12.0);
        EXPECT_DOUBLE_EQ(row.dtw_max, mx);
        EXPECT_LE(row.dtw_avg, row.dtw_max);
        EXPECT_EQ(rep.pairwise[i][i], 0.0);
        for (std::size_t j = 0; j < recs.size(); ++j) EXPECT_EQ(rep.pairwise[i][j], rep.pairwise[j][i]);
    }
}

TEST(Report, MismatchedSamplingIsRejected) {
    const QRSRecording a = recording_with(trace(monophasic));
    QRSRecording b = a;
    b.sample_period = 0.5;
    EXPECT_THROW(compare(a, b), ParameterError);
}
