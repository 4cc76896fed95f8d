#include "panelguard/criteria_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "panelguard/csv.hpp"
#include "panelguard/errors.hpp"

namespace panelguard {

Midpoint compute_midpoints(const SizeClassRow& row) {
    if (!row.class_max) {
        throw FitError(fmt::format("class {}+ is open-ended and has no midpoint", row.class_min));
    }
    if (*row.class_max < row.class_min) {
        throw FitError(fmt::format("class {}-{} has max below min", row.class_min, *row.class_max));
    }
    const double lo = static_cast<double>(row.class_min);
    const double hi = static_cast<double>(*row.class_max);
    const double eps_lo = row.ratio * lo;
    const double eps_hi = row.ratio * (hi + 1.0) - 1.0;
    return {(lo + hi + 1.0) / 2.0, (eps_lo + eps_hi + 1.0) / 2.0};
}

Midpoint fitting_midpoint(const SizeClassRow& row) {
    if (row.base_mid && row.eps_mid) return {*row.base_mid, *row.eps_mid};
    Midpoint m = compute_midpoints(row);
    if (row.base_mid) m.base = *row.base_mid;
    if (row.eps_mid) m.eps = *row.eps_mid;
    return m;
}

std::string to_string(ViolationCode code) {
    switch (code) {
    case ViolationCode::EqualEpsMin: return "EQUAL_EPS_MIN";
    case ViolationCode::NonMonotoneEps: return "NON_MONOTONE_EPS";
    case ViolationCode::NonMonotoneRatio: return "NON_MONOTONE_RATIO";
    }
    return "UNKNOWN";
}

namespace {

struct EpsRange {
    double lo;
    double hi;
};

EpsRange eps_range(const SizeClassRow& row) {
    const double lo = row.ratio * static_cast<double>(row.class_min);
    if (!row.class_max) return {lo, std::numeric_limits<double>::infinity()};
    return {lo, row.ratio * (static_cast<double>(*row.class_max) + 1.0) - 1.0};
}

bool nearly_equal(double a, double b) {
    return std::fabs(a - b) <= 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

std::string class_label(const SizeClassRow& row) {
    if (!row.class_max) return fmt::format("{}+", row.class_min);
    return fmt::format("{}-{}", row.class_min, *row.class_max);
}

}  // namespace

std::vector<Violation> validate_size_class_table(std::span<const SizeClassRow> table) {
    std::vector<Violation> out;
    if (table.size() < 2) return out;

    std::vector<std::size_t> order(table.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return table[a].class_min < table[b].class_min;
    });
    std::vector<EpsRange> ranges;
    for (std::size_t i : order) ranges.push_back(eps_range(table[i]));

    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const auto& a = table[order[k]];
        const auto& b = table[order[k + 1]];
        if (nearly_equal(ranges[k].lo, ranges[k + 1].lo)) {
            out.push_back({ViolationCode::EqualEpsMin, {std::min(order[k], order[k + 1]), std::max(order[k], order[k + 1])},
                           fmt::format("classes {} and {} share minimum eps {}", class_label(a),
                                       class_label(b), ranges[k].lo)});
        }
    }
    for (std::size_t k = 1; k + 1 < order.size(); ++k) {
        const auto& mid = ranges[k];
        const auto& below = ranges[k - 1];
        const auto& above = ranges[k + 1];
        if (mid.lo > below.lo && mid.lo > above.lo && mid.hi > below.hi && mid.hi > above.hi) {
            out.push_back({ViolationCode::NonMonotoneEps, {order[k]},
                           fmt::format("class {} has eps range {}-{} above both neighbours",
                                       class_label(table[order[k]]), mid.lo, mid.hi)});
        }
    }
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const auto& a = table[order[k]];
        const auto& b = table[order[k + 1]];
        if (!(b.ratio < a.ratio)) {
            out.push_back({ViolationCode::NonMonotoneRatio, {std::min(order[k], order[k + 1]), std::max(order[k], order[k + 1])},
                           fmt::format("ratio {} for class {} does not fall below {} for class {}", b.ratio,
                                       class_label(b), a.ratio, class_label(a))});
        }
    }
    return out;
}

LineFit fit_loglog(std::span<const Point> points) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : points) {
        if (!(p.x > 0.0) || !(p.y > 0.0)) {
            throw FitError(fmt::format("log-log fit needs positive coordinates, got ({}, {})", p.x, p.y));
        }
        xs.push_back(std::log(p.x));
        ys.push_back(std::log(p.y));
    }
    const double n = static_cast<double>(xs.size());
    if (xs.size() < 2) throw FitError("log-log fit needs at least 2 points");
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw FitError("log-log fit needs at least 2 distinct x values");

    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        sse += r * r;
        fit.max_abs_residual = std::max(fit.max_abs_residual, std::fabs(r));
    }
    fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return fit;
}

std::set<std::size_t> resolve_exclusions(std::span<const SizeClassRow> table,
                                         std::span<const std::string> selectors) {
    std::set<std::size_t> out;
    for (const auto& sel : selectors) {
        auto eq = sel.find('=');
        if (eq == std::string::npos) throw UsageError(fmt::format("bad exclusion '{}'", sel));
        const std::string key = sel.substr(0, eq);
        auto value = csv::parse_number(std::string_view(sel).substr(eq + 1));
        if (!value) throw UsageError(fmt::format("bad exclusion value in '{}'", sel));
        bool matched = false;
        if (key == "row") {
            const double n = *value;
            if (n < 1 || n > static_cast<double>(table.size()) || n != std::floor(n)) {
                throw UsageError(fmt::format("exclusion '{}' is outside rows 1..{}", sel, table.size()));
            }
            out.insert(static_cast<std::size_t>(n) - 1);
            matched = true;
        } else if (key == "ratio") {
            for (std::size_t i = 0; i < table.size(); ++i) {
                if (nearly_equal(table[i].ratio, *value)) {
                    out.insert(i);
                    matched = true;
                }
            }
        } else {
            throw UsageError(fmt::format("unknown exclusion key '{}' (expected row or ratio)", key));
        }
        if (!matched) throw UsageError(fmt::format("exclusion '{}' matches no row", sel));
    }
    return out;
}

FitResult fit_size_class_table(std::span<const SizeClassRow> table,
                               const std::set<std::size_t>& exclusions) {
    FitResult result;
    result.kind = CriteriaKind::SizeClass;
    std::vector<Point> points;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (exclusions.contains(i)) {
            result.excluded.push_back({i, "excluded"});
        } else if (!table[i].class_max) {
            result.excluded.push_back({i, "open-ended"});
        } else {
            Midpoint m = fitting_midpoint(table[i]);
            points.push_back({m.base, m.eps});
        }
    }
    if (points.size() < 2) {
        throw FitError(fmt::format("size-class fit needs at least 2 usable rows, have {}", points.size()));
    }
    LineFit line = fit_loglog(points);
    result.slope = line.slope;
    result.intercept = line.intercept;
    result.exponent = -line.slope;
    result.critical = std::exp(line.intercept);
    result.points_used = points.size();
    result.r_squared = line.r_squared;
    result.max_abs_log_residual = line.max_abs_residual;
    return result;
}

double reference_index(double d, double r, double b) { return d * std::pow(r, -b); }

bool reference_critical(double d, double r, double b, double critical) {
    return reference_index(d, r, b) >= critical;
}

namespace {

void check_reference_rows(std::span<const ReferenceCriteriaRow> table) {
    if (table.size() < 2) {
        throw FitError(fmt::format("reference fit needs at least 2 rows, have {}", table.size()));
    }
    for (const auto& row : table) {
        if (!(row.r_min > 0.0) || !(row.d_value > 0.0)) {
            throw FitError(fmt::format("reference rows need r_min > 0 and D > 0, got ({}, {})", row.r_min,
                                       row.d_value));
        }
    }
}

void collect_misses(std::span<const ReferenceCriteriaRow> table, FitResult& result) {
    result.misses.clear();
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double index = reference_index(table[i].d_value, table[i].r_min, result.exponent);
        if (index < result.critical) {
            result.misses.push_back({i, table[i].r_min, table[i].d_value, index});
        }
    }
}

}  // namespace

FitResult fit_reference_table(std::span<const ReferenceCriteriaRow> table) {
    check_reference_rows(table);
    std::vector<Point> points;
    for (const auto& row : table) points.push_back({row.r_min, row.d_value});
    LineFit line = fit_loglog(points);

    FitResult result;
    result.kind = CriteriaKind::Reference;
    result.slope = line.slope;
    result.intercept = line.intercept;
    result.exponent = line.slope;
    result.critical = std::exp(line.intercept);
    result.points_used = points.size();
    result.r_squared = line.r_squared;
    result.max_abs_log_residual = line.max_abs_residual;
    collect_misses(table, result);
    return result;
}

FitResult endpoint_criticality(std::span<const ReferenceCriteriaRow> table,
                               std::optional<double> exponent_override) {
    check_reference_rows(table);
    auto [first, last] = std::minmax_element(table.begin(), table.end(), [](const auto& a, const auto& b) {
        return a.r_min < b.r_min;
    });
    if (first->r_min == last->r_min) throw FitError("endpoint method needs two distinct r_min values");

    FitResult result;
    result.kind = CriteriaKind::Reference;
    result.method = "endpoint";
    result.points_used = table.size();

    double b = (std::log(last->d_value) - std::log(first->d_value)) /
               (std::log(last->r_min) - std::log(first->r_min));
    if (first->d_value == last->d_value) b = 0.0;

    if (exponent_override) {
        if (!std::isfinite(*exponent_override)) throw UsageError("exponent override must be finite");
        b = *exponent_override;
        result.method = "endpoint-override";
        // Anchor at the class with the highest D (lowest r_min on ties).
        auto anchor = std::max_element(table.begin(), table.end(), [](const auto& x, const auto& y) {
            return x.d_value < y.d_value || (x.d_value == y.d_value && x.r_min > y.r_min);
        });
        result.critical = reference_index(anchor->d_value, anchor->r_min, b);
    } else {
        result.critical = std::numeric_limits<double>::infinity();
        for (const auto& row : table) {
            result.critical = std::min(result.critical, reference_index(row.d_value, row.r_min, b));
        }
    }
    result.exponent = b;
    result.slope = b;
    result.intercept = std::log(result.critical);

    double mean = 0.0;
    for (const auto& row : table) mean += std::log(row.d_value);
    mean /= static_cast<double>(table.size());
    double sse = 0.0;
    double sst = 0.0;
    for (const auto& row : table) {
        const double r = std::log(row.d_value) - (result.intercept + b * std::log(row.r_min));
        sse += r * r;
        sst += (std::log(row.d_value) - mean) * (std::log(row.d_value) - mean);
        result.max_abs_log_residual = std::max(result.max_abs_log_residual, std::fabs(r));
    }
    result.r_squared = sst > 0.0 ? 1.0 - sse / sst : 1.0;
    collect_misses(table, result);
    return result;
}

double parse_fraction(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos) {
        if (auto v = csv::parse_number(text)) return *v;
        throw UsageError(fmt::format("not a number: '{}'", text));
    }
    auto num = csv::parse_number(std::string_view(text).substr(0, slash));
    auto den = csv::parse_number(std::string_view(text).substr(slash + 1));
    if (!num || !den || *den == 0.0) throw UsageError(fmt::format("not a fraction: '{}'", text));
    return *num / *den;
}

namespace {

std::optional<double> optional_number(const csv::Table& t, std::size_t row, std::optional<std::size_t> col) {
    if (!col) return std::nullopt;
    const std::string& cell = t.rows[row][*col];
    if (cell.empty()) return std::nullopt;
    auto v = csv::parse_number(cell);
    if (!v) {
        throw DataError(fmt::format("line {}: column '{}': not a number: '{}'", t.line_numbers[row],
                                    t.header[*col], cell));
    }
    return v;
}

double required_number(const csv::Table& t, std::size_t row, std::size_t col) {
    auto v = optional_number(t, row, col);
    if (!v) throw DataError(fmt::format("line {}: column '{}' is empty", t.line_numbers[row], t.header[col]));
    return *v;
}

std::int64_t integer_cell(const csv::Table& t, std::size_t row, std::size_t col, double v) {
    if (v != std::floor(v) || v < 0 || v > 9e15) {
        throw DataError(fmt::format("line {}: column '{}' must be a non-negative integer", t.line_numbers[row],
                                    t.header[col]));
    }
    return static_cast<std::int64_t>(v);
}

}  // namespace

std::vector<SizeClassRow> read_size_class_table(std::istream& in) {
    csv::Table t = csv::read(in);
    const auto min_col = t.require_column("class_min");
    const auto max_col = t.require_column("class_max");
    const auto ratio_col = t.require_column("ratio");
    const auto bmid_col = t.column("b_mid");
    const auto emid_col = t.column("eps_mid");

    std::vector<SizeClassRow> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        SizeClassRow row;
        row.class_min = integer_cell(t, r, min_col, required_number(t, r, min_col));
        if (auto mx = optional_number(t, r, max_col)) row.class_max = integer_cell(t, r, max_col, *mx);
        row.ratio = required_number(t, r, ratio_col);
        if (!(row.ratio > 0.0)) {
            throw DataError(fmt::format("line {}: ratio must be positive", t.line_numbers[r]));
        }
        if (row.class_max && *row.class_max < row.class_min) {
            throw DataError(fmt::format("line {}: class_max below class_min", t.line_numbers[r]));
        }
        row.base_mid = optional_number(t, r, bmid_col);
        row.eps_mid = optional_number(t, r, emid_col);
        rows.push_back(row);
    }

    std::vector<const SizeClassRow*> sorted;
    for (const auto& row : rows) sorted.push_back(&row);
    std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->class_min < b->class_min; });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (!sorted[i]->class_max || *sorted[i]->class_max >= sorted[i + 1]->class_min) {
            throw DataError(fmt::format("size classes starting at {} and {} overlap", sorted[i]->class_min,
                                        sorted[i + 1]->class_min));
        }
    }
    return rows;
}

std::vector<ReferenceCriteriaRow> read_reference_table(std::istream& in) {
    csv::Table t = csv::read(in);
    const auto min_col = t.require_column("r_min");
    const auto max_col = t.require_column("r_max");
    const auto d_col = t.require_column("d_value");

    std::vector<ReferenceCriteriaRow> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        ReferenceCriteriaRow row;
        row.r_min = required_number(t, r, min_col);
        row.r_max = optional_number(t, r, max_col);
        row.d_value = required_number(t, r, d_col);
        if (!(row.r_min > 0.0) || !(row.d_value > 0.0)) {
            throw DataError(fmt::format("line {}: r_min and d_value must be positive", t.line_numbers[r]));
        }
        if (row.r_max && *row.r_max < row.r_min) {
            throw DataError(fmt::format("line {}: r_max below r_min", t.line_numbers[r]));
        }
        rows.push_back(row);
    }

    std::vector<const ReferenceCriteriaRow*> sorted;
    for (const auto& row : rows) sorted.push_back(&row);
    std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->r_min < b->r_min; });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (sorted[i]->r_min == sorted[i + 1]->r_min ||
            (sorted[i]->r_max && *sorted[i]->r_max >= sorted[i + 1]->r_min) || !sorted[i]->r_max) {
            throw DataError(fmt::format("reference classes starting at {} and {} overlap", sorted[i]->r_min,
                                        sorted[i + 1]->r_min));
        }
    }
    return rows;
}

}  // namespace panelguard
