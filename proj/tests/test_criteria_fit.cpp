#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "criteria_tables.hpp"
#include "oracles.hpp"
#include "panelguard/criteria_fit.hpp"
#include "panelguard/errors.hpp"

using namespace panelguard;

TEST(ComputeMidpoints, Examples) {
    auto m = compute_midpoints({25000, 49999, 0.15, {}, {}});
    EXPECT_EQ(m.base, 37500.0);
    EXPECT_DOUBLE_EQ(m.eps, 5625.0);
    auto low = compute_midpoints({0, 499, 4.0, {}, {}});
    EXPECT_EQ(low.base, 250.0);
    EXPECT_EQ(low.eps, 1000.0);
    EXPECT_THROW(compute_midpoints({50000, std::nullopt, 0.05, {}, {}}), FitError);
}

TEST(ComputeMidpoints, ConventionMatchesPublishedRowsExceptOne) {
    // Every published midpoint follows (min + max + 1) / 2 except the
    // 1,000-2,499 class, printed as 1,250.
    auto t = fixtures::size_class_criteria();
    for (std::size_t i = 1; i < t.size(); ++i) {
        auto m = compute_midpoints(t[i]);
        EXPECT_NEAR(m.eps, *t[i].eps_mid, 1e-9) << i;
        if (t[i].class_min == 1000) {
            EXPECT_EQ(m.base, 1750.0);
        } else {
            EXPECT_EQ(m.base, *t[i].base_mid) << i;
        }
    }
}

TEST(ValidateSizeClassTable, PublishedTableHasExactlyTwoPeculiarities) {
    auto v = validate_size_class_table(fixtures::size_class_criteria());
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0].code, ViolationCode::EqualEpsMin);
    EXPECT_EQ(v[0].rows, (std::vector<std::size_t>{5, 6}));  // ratios 1.50 and 3.00
    EXPECT_EQ(v[1].code, ViolationCode::NonMonotoneEps);
    EXPECT_EQ(v[1].rows, (std::vector<std::size_t>{2}));  // ratio 0.40
}

TEST(ValidateSizeClassTable, CleanTableAndRatioInversion) {
    std::vector<SizeClassRow> clean{{0, 99, 3.0, {}, {}}, {100, 999, 1.0, {}, {}}, {1000, 9999, 0.5, {}, {}}};
    EXPECT_TRUE(validate_size_class_table(clean).empty());
    std::vector<SizeClassRow> inverted{{0, 99, 1.0, {}, {}}, {100, 999, 2.0, {}, {}}};
    auto v = validate_size_class_table(inverted);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].code, ViolationCode::NonMonotoneRatio);
    EXPECT_EQ(to_string(v[0].code), "NON_MONOTONE_RATIO");
}

TEST(FitLoglog, ExactPowerLaw) {
    std::vector<Point> pts;
    for (double x : {0.5, 2.0, 9.0, 300.0, 1e5}) pts.push_back({x, 7.0 * std::pow(x, 0.4)});
    auto f = fit_loglog(pts);
    EXPECT_NEAR(f.slope, 0.4, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(7.0), 1e-12);
    EXPECT_LT(f.max_abs_residual, 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(FitLoglog, TwoPointsInterpolate) {
    std::vector<Point> pts{{2.0, 3.0}, {20.0, 0.5}};
    auto f = fit_loglog(pts);
    EXPECT_NEAR(f.intercept + f.slope * std::log(2.0), std::log(3.0), 1e-14);
    EXPECT_NEAR(f.intercept + f.slope * std::log(20.0), std::log(0.5), 1e-14);
}

TEST(FitLoglog, Errors) {
    EXPECT_THROW(fit_loglog(std::vector<Point>{{1, 1}}), FitError);
    EXPECT_THROW(fit_loglog(std::vector<Point>{{3, 1}, {3, 2}}), FitError);
    EXPECT_THROW(fit_loglog(std::vector<Point>{{0, 1}, {3, 2}}), FitError);
}

TEST(FitLoglog, AgreesWithNormalEquationOracle) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ux(0.1, 1e6), un(0.5, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Point> pts;
        std::vector<std::pair<double, double>> raw;
        for (int i = 0; i < 3 + trial % 20; ++i) {
            double x = ux(rng), y = 3.0 * std::pow(x, -0.3) * un(rng);
            pts.push_back({x, y});
            raw.emplace_back(x, y);
        }
        auto f = fit_loglog(pts);
        auto o = oracle::ols_loglog(raw);
        EXPECT_NEAR(f.slope, static_cast<double>(o.slope), 1e-9);
        EXPECT_NEAR(f.intercept, static_cast<double>(o.intercept), 1e-8);
    }
}

TEST(FitSizeClassTable, PublishedTableMatchesOracle) {
    auto t = fixtures::size_class_criteria();
    auto fit = fit_size_class_table(t, resolve_exclusions(t, std::vector<std::string>{"ratio=0.40"}));
    std::vector<std::pair<double, double>> mids{{37500, 5625}, {7500, 4500}, {3750, 3750},
                                                {1250, 2625},  {750, 2250},  {250, 1000}};
    auto o = oracle::ols_loglog(mids);
    EXPECT_NEAR(fit.slope, static_cast<double>(o.slope), 1e-12);
    EXPECT_NEAR(fit.intercept, static_cast<double>(o.intercept), 1e-11);
    // Frozen from the oracle (numpy polyfit agrees to 1e-15).
    EXPECT_NEAR(fit.exponent, -0.32675017251560123, 1e-12);
    EXPECT_NEAR(fit.intercept, 5.405414601257576, 1e-11);
    EXPECT_NEAR(fit.critical, 222.60849511592684, 1e-9);
    EXPECT_EQ(fit.points_used, 6u);
    ASSERT_EQ(fit.excluded.size(), 2u);
    EXPECT_EQ(fit.excluded[0].row, 0u);
    EXPECT_EQ(fit.excluded[0].reason, "open-ended");
    EXPECT_EQ(fit.excluded[1].row, 2u);
}

TEST(FitSizeClassTable, RecoversExactLevelCurve) {
    // Midpoints eps = ratio * B_mid, so ratio = 100 * B_mid^-0.5 puts every
    // midpoint on eps * B^-0.5 = 100.
    std::vector<SizeClassRow> rows;
    const std::int64_t bounds[][2] = {{0, 499}, {500, 999}, {1000, 4999}, {5000, 19999}, {20000, 99999}};
    for (auto [lo, hi] : bounds) {
        const double mid = (lo + hi + 1) / 2.0;
        rows.push_back({lo, hi, 100.0 / std::sqrt(mid), {}, {}});
    }
    rows.push_back({100000, std::nullopt, 0.01, {}, {}});
    auto fit = fit_size_class_table(rows);
    EXPECT_NEAR(fit.exponent, -0.5, 1e-12);
    EXPECT_NEAR(fit.critical, 100.0, 1e-9);
    EXPECT_LT(fit.max_abs_log_residual, 1e-10);
}

TEST(FitSizeClassTable, RefitOfFittedLevelCurveIsFixedPoint) {
    auto t = fixtures::size_class_criteria();
    auto first = fit_size_class_table(t, {2});
    std::vector<SizeClassRow> regenerated;
    for (const auto& row : t) {
        if (!row.class_max) continue;
        const double b = *row.base_mid;
        regenerated.push_back({row.class_min, row.class_max, row.ratio, b,
                               first.critical * std::pow(b, -first.exponent)});
    }
    auto second = fit_size_class_table(regenerated);
    EXPECT_NEAR(second.exponent, first.exponent, 1e-8);
    EXPECT_NEAR(second.critical, first.critical, 1e-8 * first.critical);
}

TEST(FitSizeClassTable, InsufficientRows) {
    std::vector<SizeClassRow> rows{{50000, std::nullopt, 0.05, {}, {}}, {0, 499, 4.0, {}, {}}};
    EXPECT_THROW(fit_size_class_table(rows), FitError);
}

TEST(ResolveExclusions, Selectors) {
    auto t = fixtures::size_class_criteria();
    EXPECT_EQ(resolve_exclusions(t, std::vector<std::string>{"row=3"}), (std::set<std::size_t>{2}));
    EXPECT_EQ(resolve_exclusions(t, std::vector<std::string>{"ratio=0.4"}), (std::set<std::size_t>{2}));
    EXPECT_THROW(resolve_exclusions(t, std::vector<std::string>{"ratio=0.41"}), UsageError);
    EXPECT_THROW(resolve_exclusions(t, std::vector<std::string>{"row=9"}), UsageError);
    EXPECT_THROW(resolve_exclusions(t, std::vector<std::string>{"B=2"}), UsageError);
}

TEST(FitReferenceTable, PublishedTable) {
    auto t = fixtures::reference_criteria();
    auto fit = fit_reference_table(t);
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : t) pts.emplace_back(r.r_min, r.d_value);
    auto o = oracle::ols_loglog(pts);
    EXPECT_NEAR(fit.exponent, static_cast<double>(o.slope), 1e-12);
    EXPECT_NEAR(fit.intercept, static_cast<double>(o.intercept), 1e-11);
    EXPECT_NEAR(fit.intercept, 4.889506, 5e-7);
    EXPECT_NEAR(fit.exponent, -0.33692, 5e-6);
    EXPECT_NEAR(fit.critical, 132.8879, 5e-5);
}

TEST(FitReferenceTable, ExactPowerLawAndTwoRows) {
    std::vector<ReferenceCriteriaRow> rows;
    for (double r : {1.0, 10.0, 300.0, 5e4}) rows.push_back({r, std::nullopt, 50.0 * std::pow(r, -0.25)});
    auto fit = fit_reference_table(rows);
    EXPECT_NEAR(fit.exponent, -0.25, 1e-12);
    EXPECT_NEAR(fit.critical, 50.0, 1e-10);

    std::vector<ReferenceCriteriaRow> two{{10, 99, 4}, {100, std::nullopt, 2}};
    auto f2 = fit_reference_table(two);
    EXPECT_NEAR(reference_index(4, 10, f2.exponent), f2.critical, 1e-12);
    EXPECT_NEAR(reference_index(2, 100, f2.exponent), f2.critical, 1e-12);
    EXPECT_THROW(fit_reference_table(std::vector<ReferenceCriteriaRow>{{1, 2, 3}}), FitError);
}

TEST(EndpointCriticality, PublishedTableEndpoints) {
    auto t = fixtures::reference_criteria();
    auto fit = endpoint_criticality(t);
    EXPECT_NEAR(fit.exponent, -std::log(80.0) / std::log(500000.0), 1e-15);
    EXPECT_NEAR(fit.exponent, -0.33393, 1e-5);
    EXPECT_NEAR(fit.critical, 80.0, 1e-9);
    EXPECT_TRUE(fit.misses.empty());
    for (const auto& r : t) EXPECT_GE(reference_index(r.d_value, r.r_min, fit.exponent), fit.critical);
}

TEST(EndpointCriticality, OverrideAnchorsAtMaxDAndReportsMisses) {
    auto t = fixtures::reference_criteria();
    auto fit = endpoint_criticality(t, -1.0 / 3.0);
    EXPECT_EQ(fit.critical, 80.0);
    ASSERT_EQ(fit.misses.size(), 1u);
    EXPECT_EQ(fit.misses[0].row, 0u);
    EXPECT_NEAR(fit.misses[0].index, 79.37005259840996, 1e-9);
    EXPECT_FALSE(reference_critical(1, 500000, fit.exponent, fit.critical));
    EXPECT_TRUE(reference_critical(80, 1, fit.exponent, fit.critical));
}

TEST(EndpointCriticality, FlatEndpoints) {
    std::vector<ReferenceCriteriaRow> flat{{1, 9, 5}, {10, 99, 5}, {100, std::nullopt, 5}};
    auto fit = endpoint_criticality(flat);
    EXPECT_EQ(fit.exponent, 0.0);
    EXPECT_EQ(fit.critical, 5.0);
    EXPECT_THROW(endpoint_criticality(std::vector<ReferenceCriteriaRow>{{1, 2, 3}}), FitError);
}

TEST(EndpointCriticality, CaptureGuaranteeOnRandomTables) {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> ud(0.5, 100.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ReferenceCriteriaRow> rows;
        double r = 1.0;
        for (int i = 0; i < 2 + trial % 10; ++i) {
            rows.push_back({r, std::nullopt, ud(rng)});
            r *= 3.0 + i;
        }
        auto fit = endpoint_criticality(rows);
        bool attained = false;
        for (const auto& row : rows) {
            const double idx = reference_index(row.d_value, row.r_min, fit.exponent);
            EXPECT_GE(idx, fit.critical);
            attained = attained || idx == fit.critical;
        }
        EXPECT_TRUE(attained);
    }
}

TEST(ParseFraction, Forms) {
    EXPECT_DOUBLE_EQ(parse_fraction("-1/3"), -1.0 / 3.0);
    EXPECT_EQ(parse_fraction("0.25"), 0.25);
    EXPECT_EQ(parse_fraction("-.5"), -0.5);
    EXPECT_THROW(parse_fraction("1/0"), UsageError);
    EXPECT_THROW(parse_fraction("a/b"), UsageError);
}

TEST(TableReaders, ParseAndReject) {
    std::istringstream ok("class_min,class_max,ratio\n0,499,4\n500,,3\n");
    auto rows = read_size_class_table(ok);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_FALSE(rows[1].class_max);
    std::istringstream overlap("class_min,class_max,ratio\n0,499,4\n400,999,3\n");
    EXPECT_THROW(read_size_class_table(overlap), DataError);
    std::istringstream fractional("class_min,class_max,ratio\n0.5,499,4\n");
    EXPECT_THROW(read_size_class_table(fractional), DataError);
    std::istringstream ref("r_min,r_max,d_value\n1,249,80\n250,,30\n");
    EXPECT_EQ(read_reference_table(ref).size(), 2u);
    std::istringstream bad_ref("r_min,r_max,d_value\n0,249,80\n");
    EXPECT_THROW(read_reference_table(bad_ref), DataError);
    std::istringstream open_middle("r_min,r_max,d_value\n1,,80\n250,999,30\n");
    EXPECT_THROW(read_reference_table(open_middle), DataError);
}
