#include "panelguard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "panelguard/criteria_fit.hpp"
#include "panelguard/csv.hpp"
#include "panelguard/errors.hpp"

namespace panelguard {

std::vector<double> ScoredSet::losses() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.loss);
    return out;
}

std::vector<double> ScoredSet::signed_losses() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.signed_loss);
    return out;
}

namespace {

void assign_ranks(ScoredSet& scored) {
    if (scored.records.empty()) throw DataError("no records to score");
    std::vector<double> losses = scored.losses();
    std::vector<std::string> ids;
    ids.reserve(scored.records.size());
    for (const auto& r : scored.records) ids.push_back(r.id);
    auto ranks = rank_descending(losses, ids);
    for (std::size_t i = 0; i < ranks.size(); ++i) scored.records[i].rank = ranks[i];
    std::stable_sort(scored.records.begin(), scored.records.end(),
                     [](const auto& a, const auto& b) { return a.rank < b.rank; });
}

double signed_from(double loss, double future, double base) {
    if (future == base) return 0.0;
    return future > base ? loss : -loss;
}

ScoredSet skeleton(const Panel& panel) {
    ScoredSet scored;
    scored.attribute_columns = panel.attribute_columns;
    scored.has_t = panel.has_time;
    return scored;
}

}  // namespace

ScoredSet score_panel(const Panel& panel, const ScoreOptions& options) {
    if (options.time_invariant && !panel.has_time) {
        throw UsageError("time-invariant scoring needs a time column");
    }
    if (options.time_invariant && options.params.p != 1.0) {
        throw UsageError("time-invariant scoring is defined for p = 1; normalise p first");
    }
    ScoredSet scored = skeleton(panel);
    TimeScale scale;
    if (panel.has_time) scale = TimeScale::from_panel(panel);

    for (const auto& record : panel.records) {
        for (const auto& obs : record.observations) {
            ScoredRecord s;
            s.id = record.id;
            s.base = record.base;
            s.value = obs.value;
            s.attributes = record.attributes;
            if (panel.has_time) s.t = scale.at(obs.time_label);
            if (options.time_invariant) {
                s.loss = eval_time_invariant(obs.value, record.base, options.params.q, *s.t);
            } else {
                s.loss = eval_unsigned(obs.value, record.base, options.params);
            }
            s.signed_loss = signed_from(s.loss, obs.value, record.base);
            scored.records.push_back(std::move(s));
        }
    }
    assign_ranks(scored);
    return scored;
}

ScoredSet score_reference(const Panel& panel, double b) {
    ScoredSet scored = skeleton(panel);
    TimeScale scale;
    if (panel.has_time) scale = TimeScale::from_panel(panel);
    for (const auto& record : panel.records) {
        for (const auto& obs : record.observations) {
            ScoredRecord s;
            s.id = record.id;
            s.base = record.base;
            s.value = obs.value;
            s.attributes = record.attributes;
            if (panel.has_time) s.t = scale.at(obs.time_label);
            s.loss = reference_index(obs.value, record.base, b);
            if (!std::isfinite(s.loss)) throw DataError("reference index overflowed double precision");
            s.signed_loss = s.loss;
            scored.records.push_back(std::move(s));
        }
    }
    assign_ranks(scored);
    return scored;
}

FlagSummary apply_rule(ScoredSet& scored, const CriticalRule& rule, Grouping grouping) {
    validate(rule);
    if (scored.records.empty()) throw DataError("no records to flag");
    const bool use_signed = is_signed(rule);

    // Slices keyed by t; a single pooled slice otherwise.
    std::map<std::optional<double>, std::vector<std::size_t>> slices;
    for (std::size_t i = 0; i < scored.records.size(); ++i) {
        std::optional<double> key;
        if (grouping == Grouping::PerSlice && scored.has_t) key = scored.records[i].t;
        slices[key].push_back(i);
    }

    FlagSummary summary;
    summary.rule = describe(rule);
    summary.total = scored.records.size();
    for (const auto& [t, members] : slices) {
        std::vector<double> values;
        values.reserve(members.size());
        for (std::size_t i : members) {
            const auto& r = scored.records[i];
            values.push_back(use_signed ? r.signed_loss : r.loss);
        }
        Thresholds th = derive_critical(values, rule);
        for (std::size_t j = 0; j < members.size(); ++j) {
            bool flag = th.exceeds(values[j]);
            scored.records[members[j]].flagged = flag;
            summary.flagged += flag ? 1 : 0;
        }
        summary.thresholds.push_back({t, th});
    }
    return summary;
}

FlagSummary apply_reference_rule(ScoredSet& scored, double critical) {
    if (!(critical > 0.0)) throw UsageError("reference critical value must be positive");
    FlagSummary summary;
    summary.rule = fmt::format("reference index D*R^-b >= {}", critical);
    summary.total = scored.records.size();
    for (auto& r : scored.records) {
        r.flagged = r.loss >= critical;
        summary.flagged += r.flagged ? 1 : 0;
    }
    summary.thresholds.push_back({std::nullopt, Thresholds{std::nullopt, critical}});
    return summary;
}

void write_scored_csv(std::ostream& out, const ScoredSet& scored, bool with_flags) {
    std::vector<std::string> header = {"id", "base", "value", "t", "loss", "signed_loss", "rank"};
    if (with_flags) header.push_back("flagged");
    for (const auto& a : scored.attribute_columns) header.push_back(a);
    csv::write_row(out, header);
    for (const auto& r : scored.records) {
        std::vector<std::string> row = {r.id,
                                        csv::format_number(r.base),
                                        csv::format_number(r.value),
                                        r.t ? csv::format_number(*r.t) : std::string(),
                                        csv::format_number(r.loss),
                                        csv::format_number(r.signed_loss),
                                        std::to_string(r.rank)};
        if (with_flags) row.push_back(r.flagged ? "1" : "0");
        for (const auto& a : scored.attribute_columns) {
            auto it = r.attributes.find(a);
            row.push_back(it == r.attributes.end() ? std::string() : it->second);
        }
        csv::write_row(out, row);
    }
}

bool is_scored_header(std::span<const std::string> header) {
    bool loss = false;
    bool signed_loss = false;
    for (const auto& h : header) {
        loss = loss || h == "loss";
        signed_loss = signed_loss || h == "signed_loss";
    }
    return loss && signed_loss;
}

ScoredSet read_scored_csv(std::istream& in, const std::string& id_col) {
    csv::Table table = csv::read(in);
    const auto id = table.require_column(id_col);
    const auto base = table.require_column("base");
    const auto value = table.require_column("value");
    const auto loss = table.require_column("loss");
    const auto signed_loss = table.require_column("signed_loss");
    const auto t = table.column("t");

    ScoredSet scored;
    std::vector<std::size_t> attr_idx;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const auto& h = table.header[c];
        if (c == id || c == base || c == value || c == loss || c == signed_loss || c == t || h == "rank" ||
            h == "flagged" || h == "class") {
            continue;
        }
        scored.attribute_columns.push_back(h);
        attr_idx.push_back(c);
    }

    auto number = [&](std::size_t row, std::size_t col) {
        auto v = csv::parse_number(table.rows[row][col]);
        if (!v) {
            throw DataError(fmt::format("line {}: column '{}': not a number: '{}'", table.line_numbers[row],
                                        table.header[col], table.rows[row][col]));
        }
        return *v;
    };

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        ScoredRecord s;
        s.id = table.rows[r][id];
        s.base = number(r, base);
        s.value = number(r, value);
        s.loss = number(r, loss);
        s.signed_loss = number(r, signed_loss);
        if (t && !table.rows[r][*t].empty()) {
            s.t = number(r, *t);
            scored.has_t = true;
        }
        for (std::size_t k = 0; k < attr_idx.size(); ++k) {
            s.attributes.emplace(scored.attribute_columns[k], table.rows[r][attr_idx[k]]);
        }
        scored.records.push_back(std::move(s));
    }
    assign_ranks(scored);
    return scored;
}

BreakAssignment quantile_classes(std::span<const double> losses, std::size_t k) {
    if (k < 2) throw UsageError(fmt::format("need at least 2 classes, got {}", k));
    if (losses.empty()) throw DataError("no losses to classify");
    BreakAssignment out;
    for (std::size_t j = 1; j < k; ++j) {
        out.breaks.push_back(quantile(losses, static_cast<double>(j) / static_cast<double>(k)));
    }
    auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
    out.degenerate = *lo == *hi;
    out.classes.reserve(losses.size());
    for (double v : losses) {
        std::size_t cls = 1;
        for (double b : out.breaks) cls += v > b ? 1 : 0;
        out.classes.push_back(cls);
    }
    return out;
}

void write_breaks_csv(std::ostream& out, const ScoredSet& scored, const BreakAssignment& breaks) {
    std::vector<std::string> header = {"id", "t", "loss", "class"};
    for (const auto& a : scored.attribute_columns) header.push_back(a);
    csv::write_row(out, header);
    for (std::size_t i = 0; i < scored.records.size(); ++i) {
        const auto& r = scored.records[i];
        std::vector<std::string> row = {r.id, r.t ? csv::format_number(*r.t) : std::string(),
                                        csv::format_number(r.loss), std::to_string(breaks.classes.at(i))};
        for (const auto& a : scored.attribute_columns) {
            auto it = r.attributes.find(a);
            row.push_back(it == r.attributes.end() ? std::string() : it->second);
        }
        csv::write_row(out, row);
    }
}

ComparisonFlags flag_comparison(const NominalComparison& cmp, const CriticalRule& rule) {
    const bool use_signed = is_signed(rule);
    ComparisonFlags flags;
    for (const DirectionScores* dir : {&cmp.b_base, &cmp.f_base}) {
        const auto& values = use_signed ? dir->signed_loss : dir->loss;
        Thresholds th = derive_critical(values, rule);
        std::vector<bool> f(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) f[i] = th.exceeds(values[i]);
        (dir == &cmp.b_base ? flags.b_base : flags.f_base) = std::move(f);
        flags.thresholds.push_back(th);
    }
    return flags;
}

void write_comparison_csv(std::ostream& out, const NominalComparison& cmp, const ComparisonFlags* flags) {
    std::vector<std::string> header = {"id",     "b_value",        "f_value", "loss_fb",
                                       "signed_loss_fb", "rank_fb", "loss_bf", "signed_loss_bf",
                                       "rank_bf"};
    if (flags) {
        header.insert(header.end(), {"flagged_fb", "flagged_bf", "flag_any"});
    }
    csv::write_row(out, header);

    std::vector<std::size_t> order(cmp.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[cmp.b_base.rank[i] - 1] = i;
    for (std::size_t i : order) {
        std::vector<std::string> row = {cmp.pairs[i].id,
                                        csv::format_number(cmp.pairs[i].b_value),
                                        csv::format_number(cmp.pairs[i].f_value),
                                        csv::format_number(cmp.b_base.loss[i]),
                                        csv::format_number(cmp.b_base.signed_loss[i]),
                                        std::to_string(cmp.b_base.rank[i]),
                                        csv::format_number(cmp.f_base.loss[i]),
                                        csv::format_number(cmp.f_base.signed_loss[i]),
                                        std::to_string(cmp.f_base.rank[i])};
        if (flags) {
            const bool fb = flags->b_base[i];
            const bool bf = flags->f_base[i];
            row.insert(row.end(), {fb ? "1" : "0", bf ? "1" : "0", (fb || bf) ? "1" : "0"});
        }
        csv::write_row(out, row);
    }
}

}  // namespace panelguard
