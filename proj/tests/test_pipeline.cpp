#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "criteria_tables.hpp"
#include "oracles.hpp"
#include "panelguard/csv.hpp"
#include "panelguard/errors.hpp"
#include "panelguard/pipeline.hpp"
#include "panelguard/rule_file.hpp"

using namespace panelguard;

namespace {

Panel panel_from(const std::string& text, std::optional<TimeBinding> time = std::nullopt) {
    std::istringstream in(text);
    ColumnBindings bindings;
    bindings.time = std::move(time);
    return load_panel(in, bindings, PreprocessPolicy::recode(0.5));
}

std::string distinct_panel(std::size_t n) {
    std::ostringstream out;
    out << "id,base,value\n";
    for (std::size_t i = 0; i < n; ++i) out << "u" << i << ",100," << 100 + 1 + i << "\n";
    return out.str();
}

}  // namespace

TEST(ScorePanel, LossesAndRanks) {
    auto panel = panel_from("id,base,value,region\na,100,110,n\nb,4,8,s\nc,10000,9000,n\n");
    auto scored = score_panel(panel, {{1.0, -0.5}, false});
    ASSERT_EQ(scored.records.size(), 3u);
    // Losses: a 1, b 2, c 10 ordered by rank.
    EXPECT_EQ(scored.records[0].id, "c");
    EXPECT_DOUBLE_EQ(scored.records[0].loss, 10.0);
    EXPECT_DOUBLE_EQ(scored.records[0].signed_loss, -10.0);
    EXPECT_EQ(scored.records[1].id, "b");
    EXPECT_EQ(scored.records[2].rank, 3u);
    EXPECT_EQ(scored.records[2].attributes.at("region"), "n");
    EXPECT_EQ(scored.attribute_columns, std::vector<std::string>{"region"});
}

TEST(ScorePanel, TimeInvariantNeedsTimeAndUnitPower) {
    auto plain = panel_from("id,base,value\na,1,2\n");
    EXPECT_THROW(score_panel(plain, {{1.0, -0.5}, true}), UsageError);
    auto timed = panel_from("id,base,value,t\na,100,110,1\na,100,150,2\n", TimeBinding{"t", {}});
    EXPECT_THROW(score_panel(timed, {{2.0, -0.5}, true}), UsageError);
    auto scored = score_panel(timed, {{1.0, -0.5}, true});
    ASSERT_EQ(scored.records.size(), 2u);
    // t = 1 reduces to the ordinary loss: 50 * 100^-0.5 = 5.
    EXPECT_DOUBLE_EQ(scored.records[0].loss, 5.0);
    EXPECT_EQ(*scored.records[0].t, 1.0);
    // t = 0.5: 10 * 100^(0.5 * -0.5 + 0.5 - 1) = 10 * 100^-0.75.
    EXPECT_NEAR(scored.records[1].loss, 10.0 * std::pow(100.0, -0.75), 1e-14);
}

TEST(ApplyRule, CompiledSizeClassRuleFlagsMatchDirectCriterion) {
    auto t = fixtures::size_class_criteria();
    auto fit = fit_size_class_table(t, {2});
    std::mt19937_64 rng(3);
    auto data = oracle::random_dataset(rng, 500);
    std::ostringstream csv;
    csv << "id,base,value\n";
    for (std::size_t i = 0; i < data.base.size(); ++i) {
        csv << data.ids[i] << "," << csv::format_number(data.base[i]) << "," << csv::format_number(data.future[i])
            << "\n";
    }
    auto scored = score_panel(panel_from(csv.str()), {{1.0, fit.exponent}, false});
    auto summary = apply_rule(scored, rule::Fixed{fit.critical});
    std::size_t expected = 0;
    for (const auto& r : scored.records) {
        const bool direct = std::abs(r.value - r.base) * std::pow(r.base, fit.exponent) > fit.critical;
        EXPECT_EQ(r.flagged, direct) << r.id;
        expected += direct;
    }
    EXPECT_EQ(summary.flagged, expected);
    EXPECT_EQ(summary.total, 500u);
}

TEST(ApplyRule, QuantileFlagsTopOnePercent) {
    auto scored = score_panel(panel_from(distinct_panel(1000)), {{1.0, 0.0}, false});
    auto summary = apply_rule(scored, rule::Quantile{0.99});
    EXPECT_EQ(summary.flagged, 10u);
    for (const auto& r : scored.records) EXPECT_EQ(r.flagged, r.rank <= 10) << r.id;
}

TEST(ApplyRule, SignedBoundsAndMismatch) {
    auto scored = score_panel(panel_from("id,base,value\na,100,150\nb,100,60\nc,100,101\n"),
                              {{1.0, -0.5}, false});
    auto summary = apply_rule(scored, rule::SignedFixed{-3.0, 4.0});
    EXPECT_EQ(summary.flagged, 2u);
    for (const auto& r : scored.records) EXPECT_EQ(r.flagged, r.id != "c");
    ASSERT_EQ(summary.thresholds.size(), 1u);
    EXPECT_EQ(*summary.thresholds[0].thresholds.lower, -3.0);
}

TEST(ApplyRule, PerSliceThresholds) {
    std::ostringstream text;
    text << "id,base,value,t\n";
    for (int i = 0; i < 10; ++i) {
        text << "u" << i << ",100," << 101 + i << ",1\n";
        text << "u" << i << ",100," << 200 + 10 * i << ",2\n";
    }
    auto panel = panel_from(text.str(), TimeBinding{"t", {}});
    auto pooled = score_panel(panel, {{1.0, 0.0}, false});
    auto pooled_summary = apply_rule(pooled, rule::Quantile{0.8});
    for (const auto& r : pooled.records) {
        if (r.flagged) EXPECT_EQ(*r.t, 1.0);
    }
    auto sliced = score_panel(panel, {{1.0, 0.0}, false});
    auto slice_summary = apply_rule(sliced, rule::Quantile{0.8}, Grouping::PerSlice);
    ASSERT_EQ(slice_summary.thresholds.size(), 2u);
    std::size_t early = 0, late = 0;
    for (const auto& r : sliced.records) {
        if (!r.flagged) continue;
        (*r.t == 1.0 ? late : early) += 1;
    }
    EXPECT_EQ(early, 2u);
    EXPECT_EQ(late, 2u);
    EXPECT_EQ(pooled_summary.flagged, 4u);
}

TEST(ApplyReferenceRule, InclusiveAtCritical) {
    auto t = fixtures::reference_criteria();
    auto fit = endpoint_criticality(t);
    std::ostringstream text;
    text << "id,base,value\n";
    for (std::size_t i = 0; i < t.size(); ++i) text << "r" << i << "," << t[i].r_min << "," << t[i].d_value << "\n";
    text << "below,1,79.5\n";
    auto scored = score_reference(panel_from(text.str()), fit.exponent);
    auto summary = apply_reference_rule(scored, fit.critical);
    EXPECT_EQ(summary.total, t.size() + 1);
    EXPECT_EQ(summary.flagged, t.size());
    for (const auto& r : scored.records) EXPECT_EQ(r.flagged, r.id != "below") << r.id;
}

TEST(ScoredCsv, ScoreThenFlagEqualsFusedRun) {
    std::mt19937_64 rng(11);
    auto data = oracle::random_dataset(rng, 200);
    std::ostringstream raw;
    raw << "id,base,value,grp\n";
    for (std::size_t i = 0; i < data.base.size(); ++i) {
        raw << data.ids[i] << "," << csv::format_number(data.base[i]) << "," << csv::format_number(data.future[i])
            << ",g" << i % 3 << "\n";
    }
    const ScoreOptions options{{1.0, -0.4}, false};
    const CriticalRule rule = rule::TukeyFence{1.5};

    auto fused = score_panel(panel_from(raw.str()), options);
    apply_rule(fused, rule);
    std::ostringstream fused_out;
    write_scored_csv(fused_out, fused, true);

    auto staged = score_panel(panel_from(raw.str()), options);
    std::ostringstream stage1;
    write_scored_csv(stage1, staged, false);
    std::istringstream back(stage1.str());
    auto reread = read_scored_csv(back);
    apply_rule(reread, rule);
    std::ostringstream staged_out;
    write_scored_csv(staged_out, reread, true);

    EXPECT_EQ(fused_out.str(), staged_out.str());
    auto header = csv::read_string(fused_out.str()).header;
    EXPECT_TRUE(is_scored_header(header));
}

TEST(QuantileClasses, EqualSizedClasses) {
    std::vector<double> losses;
    for (int i = 1; i <= 100; ++i) losses.push_back(i * 1.5);
    auto b = quantile_classes(losses, 5);
    ASSERT_EQ(b.breaks.size(), 4u);
    EXPECT_FALSE(b.degenerate);
    std::vector<int> counts(6, 0);
    for (auto c : b.classes) counts[c]++;
    for (int c = 1; c <= 5; ++c) EXPECT_EQ(counts[c], 20) << c;
}

TEST(QuantileClasses, QuartileBoundaries) {
    std::vector<double> losses{3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5};
    auto b = quantile_classes(losses, 4);
    ASSERT_EQ(b.breaks.size(), 3u);
    auto q = quartiles(losses);
    EXPECT_EQ(b.breaks[0], q.q1);
    EXPECT_EQ(b.breaks[1], oracle::quantile(losses, 0.5));
    EXPECT_EQ(b.breaks[2], q.q3);
}

TEST(QuantileClasses, DegenerateAndInvalid) {
    std::vector<double> flat(10, 2.0);
    auto b = quantile_classes(flat, 3);
    EXPECT_TRUE(b.degenerate);
    for (auto c : b.classes) EXPECT_EQ(c, 1u);
    EXPECT_THROW(quantile_classes(flat, 1), UsageError);
}

TEST(RuleFile, RoundTrips) {
    RuleFile rf;
    rf.params = {1.0, -0.25};
    rf.signed_scores = true;
    rf.rule = rule::SignedQuantile{0.05, 0.95};
    std::ostringstream out;
    write_rule_file(out, rf);
    std::istringstream in(out.str());
    auto back = read_rule_file(in);
    EXPECT_EQ(back.kind, RuleFile::Kind::Loss);
    EXPECT_EQ(back.params.q, -0.25);
    EXPECT_TRUE(back.signed_scores);
    ASSERT_TRUE(back.rule);
    auto* sq = std::get_if<rule::SignedQuantile>(&*back.rule);
    ASSERT_NE(sq, nullptr);
    EXPECT_EQ(sq->alpha_upper, 0.95);

    auto fit = fit_size_class_table(fixtures::size_class_criteria(), {2});
    std::ostringstream fit_out;
    write_rule_file(fit_out, rule_file_from_fit(fit));
    std::istringstream fit_in(fit_out.str());
    auto compiled = read_rule_file(fit_in);
    EXPECT_EQ(compiled.kind, RuleFile::Kind::SizeClass);
    EXPECT_EQ(compiled.params.q, fit.exponent);
    auto* fixed = std::get_if<rule::Fixed>(&*compiled.rule);
    ASSERT_NE(fixed, nullptr);
    EXPECT_EQ(fixed->critical, fit.critical);
    std::ostringstream again;
    write_rule_file(again, compiled);
    EXPECT_EQ(again.str(), fit_out.str());
}

TEST(RuleFile, RejectsMalformed) {
    std::istringstream bad_kind("kind=mystery\n");
    EXPECT_THROW(read_rule_file(bad_kind), Error);
    std::istringstream no_eq("kind=loss\nq -0.5\n");
    EXPECT_THROW(read_rule_file(no_eq), Error);
}

TEST(ComparisonCsv, UnionFlag) {
    std::vector<NominalPair> pairs{{"a", 100, 200}, {"b", 400, 200}, {"c", 50, 51}};
    auto cmp = compare_sets(pairs);
    auto flags = flag_comparison(cmp, rule::Fixed{8.0});
    // B-base: a 10, b 10, c ~0.14. F-base: a ~7.07, b ~14.1, c ~0.14.
    EXPECT_EQ(flags.b_base, (std::vector<bool>{true, true, false}));
    EXPECT_EQ(flags.f_base, (std::vector<bool>{false, true, false}));
    std::ostringstream out;
    write_comparison_csv(out, cmp, &flags);
    auto table = csv::read_string(out.str());
    const auto any = table.require_column("flag_any");
    for (const auto& row : table.rows) EXPECT_EQ(row[any], row[0] == "c" ? "0" : "1");
}
