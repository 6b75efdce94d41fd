#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "xferlab/report.hpp"

using namespace xferlab;

namespace {

TrialRecord record(const std::string& exp, const std::string& est, double axis, std::size_t trial,
                   double sin_theta, double risk) {
    TrialRecord r;
    r.experiment = exp;
    r.estimator = est;
    r.axis_value = axis;
    r.trial = trial;
    r.seed = 1000 + trial;
    r.p = 64;
    r.r = 4;
    r.T = 64;
    r.n = static_cast<std::size_t>(axis);
    r.support_size = 64;
    r.sin_theta = sin_theta;
    r.excess_risk = risk;
    r.target_accuracy = 0.9;
    return r;
}

}  // namespace

TEST(SignTest, BinomialTail) {
    // Values from scipy.stats.binom.sf.
    EXPECT_NEAR(sign_test_p_value(40, 50), 1.1930665838377763e-05, 1e-18);
    EXPECT_NEAR(sign_test_p_value(5, 10), 0.623046875, 1e-14);
    EXPECT_EQ(sign_test_p_value(0, 10), 1.0);
    EXPECT_EQ(sign_test_p_value(0, 0), 1.0);
}

TEST(SignTest, MatchesPascalTriangle) {
    for (std::size_t n = 1; n <= 60; n += 7) {
        std::vector<double> row{1.0};
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> next(row.size() + 1, 0.0);
            for (std::size_t j = 0; j < row.size(); ++j) {
                next[j] += 0.5 * row[j];
                next[j + 1] += 0.5 * row[j];
            }
            row = std::move(next);
        }
        for (std::size_t k = 0; k <= n; ++k) {
            double tail = 0.0;
            for (std::size_t j = k; j <= n; ++j) tail += row[j];
            EXPECT_NEAR(sign_test_p_value(k, n), tail, 1e-12 * std::max(1.0, tail));
        }
    }
}

TEST(Report, SyntheticPowerLawSlope) {
    std::vector<TrialRecord> recs;
    // Spread around the law with the unit factor in the middle, so each
    // cell's median sits exactly on it.
    const double spread[] = {2.0, 0.5, 1.0, 1.3, 0.8};
    for (double n : {64.0, 128.0, 256.0, 512.0, 1024.0}) {
        for (std::size_t t = 0; t < 5; ++t) {
            recs.push_back(record("synthetic", "standard", n, t, 3.0 * std::pow(n, -0.5) * spread[t],
                                  0.7 * std::pow(n, -1.0) * spread[t]));
        }
    }
    const auto cells = report_cells(recs);
    ASSERT_EQ(cells.size(), 5u);
    for (const auto& c : cells) EXPECT_NEAR(c.median_sin_theta, 3.0 * std::pow(c.axis_value, -0.5), 1e-15);
    const auto slopes = report_slopes(cells);
    ASSERT_EQ(slopes.size(), 2u);
    for (const auto& s : slopes) {
        ASSERT_TRUE(s.fit.has_value()) << s.status;
        const double truth = s.metric == "sin_theta" ? -0.5 : -1.0;
        EXPECT_NEAR(s.fit->slope, truth, 1e-6);
        EXPECT_EQ(s.reference_kind, RateKind::lemma1_n);
        ASSERT_TRUE(s.reference_slope.has_value());
        EXPECT_LT(*s.reference_slope, 0.0);
    }
}

TEST(Report, PairedCountsSumToTrials) {
    std::vector<TrialRecord> recs;
    for (double a : {4.0, 8.0}) {
        for (std::size_t t = 0; t < 10; ++t) {
            recs.push_back(record("pair", "standard", a, t, 0.5, 0.1));
            const double adv = t < 6 ? 0.3 : (t < 8 ? 0.5 : 0.7);
            recs.push_back(record("pair", "adv_l2", a, t, adv, 0.1));
        }
    }
    const auto counts = paired_sign_tests(recs);
    ASSERT_EQ(counts.size(), 2u);
    for (const auto& c : counts) {
        EXPECT_EQ(c.wins, 6u);
        EXPECT_EQ(c.ties, 2u);
        EXPECT_EQ(c.losses, 2u);
        EXPECT_EQ(c.wins + c.losses + c.ties + c.unpaired, 10u);
        EXPECT_NEAR(c.p_value, sign_test_p_value(6, 8), 1e-15);
    }
}

TEST(Report, FailedPartnerCountsAsUnpaired) {
    std::vector<TrialRecord> recs{record("x", "standard", 1.0, 0, 0.5, 0.1),
                                  record("x", "adv_linf", 1.0, 0, 0.4, 0.1)};
    recs[1].status = "error:all_suppressed";
    const auto counts = paired_sign_tests(recs);
    ASSERT_EQ(counts.size(), 1u);
    EXPECT_EQ(counts[0].unpaired, 1u);
    EXPECT_EQ(counts[0].wins, 0u);
}

TEST(Report, ReferenceKindSelection) {
    EXPECT_EQ(reference_kind_for("adv_l2", false, false), RateKind::thm1_l2);
    EXPECT_EQ(reference_kind_for("adv_linf", true, false), RateKind::thm2_linf);
    EXPECT_EQ(reference_kind_for("standard", true, false), RateKind::thm3_pseudo);
    EXPECT_EQ(reference_kind_for("standard", false, true), RateKind::lemma1_T);
    EXPECT_EQ(reference_kind_for("standard", false, false), RateKind::lemma1_n);
}

TEST(Report, TooFewPointsIsReportedNotThrown) {
    std::vector<TrialRecord> recs{record("y", "standard", 4.0, 0, 0.5, 0.1),
                                  record("y", "standard", 8.0, 0, 0.4, 0.1)};
    const auto slopes = report_slopes(report_cells(recs));
    ASSERT_EQ(slopes.size(), 2u);
    EXPECT_FALSE(slopes[0].fit.has_value());
    EXPECT_EQ(slopes[0].status, "too_few_points");
}

TEST(Report, WritesThreeFilesWithSlopeColumn) {
    std::vector<TrialRecord> recs;
    for (double n : {64.0, 128.0, 256.0})
        for (std::size_t t = 0; t < 3; ++t) recs.push_back(record("lemma1_rate_n", "standard", n, t, 1.0 / n, 0.5 / n));
    const auto dir = std::filesystem::temp_directory_path() / "xferlab_report_test";
    write_report(recs, dir);
    for (const char* f : {"slopes.csv", "overlay.csv", "paired.csv"}) EXPECT_TRUE(std::filesystem::exists(dir / f));
    std::ifstream in(dir / "slopes.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_NE(header.find("slope"), std::string::npos);
    EXPECT_EQ(row.rfind("lemma1_rate_n,standard,sin_theta,3,", 0), 0u) << row;
    std::filesystem::remove_all(dir);
}
