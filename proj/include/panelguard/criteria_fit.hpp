#ifndef PANELGUARD_CRITERIA_FIT_HPP
#define PANELGUARD_CRITERIA_FIT_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace panelguard {

/// One size class of a legacy ratio table: pairs with B in
/// [class_min, class_max] are outliers when eps / B exceeds `ratio`.
struct SizeClassRow {
    std::int64_t class_min = 0;
    std::optional<std::int64_t> class_max;  // nullopt: open-ended ("50,000+")
    double ratio = 0.0;
    /// Published midpoints, when the source table prints them. They take
    /// precedence over compute_midpoints() in fitting.
    std::optional<double> base_mid;
    std::optional<double> eps_mid;
};

/// One class of a reference-variable table: criterion D for R in [r_min, r_max].
struct ReferenceCriteriaRow {
    double r_min = 0.0;
    std::optional<double> r_max;
    double d_value = 0.0;
};

struct Midpoint {
    double base;
    double eps;
};

/// Integer classes are half-open: [min, max + 1). The eps range is
/// [ratio * min, ratio * (max + 1) - 1]; both midpoints are (lo + hi + 1) / 2.
Midpoint compute_midpoints(const SizeClassRow& row);

/// Midpoint used for fitting: the published one when present.
Midpoint fitting_midpoint(const SizeClassRow& row);

enum class ViolationCode { EqualEpsMin, NonMonotoneEps, NonMonotoneRatio };
std::string to_string(ViolationCode code);

struct Violation {
    ViolationCode code;
    /// Indices into the input table.
    std::vector<std::size_t> rows;
    std::string detail;
};

/**
 * Checks a size-class table against the loss axioms. Rows are examined in
 * ascending class order regardless of input order.
 *
 *  - EQUAL_EPS_MIN: two adjacent classes share the same minimum eps, so a
 *    larger B is not penalised less for the same difference.
 *  - NON_MONOTONE_EPS: an interior class's whole eps range lies above both
 *    neighbours' ranges.
 *  - NON_MONOTONE_RATIO: the ratio fails to decrease as B grows.
 */
std::vector<Violation> validate_size_class_table(std::span<const SizeClassRow> table);

struct Point {
    double x;
    double y;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
    double max_abs_residual = 0.0;
};

/// Unweighted OLS of ln y on ln x.
LineFit fit_loglog(std::span<const Point> points);

enum class CriteriaKind { SizeClass, Reference };

struct ExcludedRow {
    std::size_t row;
    std::string reason;
};

/// A tabulated point whose criticality index falls below C.
struct CriterionMiss {
    std::size_t row;
    double r;
    double d;
    double index;
};

/**
 * A compiled criticality equation.
 *
 * Size-class tables compile to eps * B^q > C with q = -slope.
 * Reference tables compile to D * R^-b >= C with b = slope.
 * In both cases C = exp(intercept) unless the endpoint method chose it.
 */
struct FitResult {
    CriteriaKind kind = CriteriaKind::SizeClass;
    std::string method = "ols";
    double slope = 0.0;
    double intercept = 0.0;
    /// q for size-class tables, b for reference tables.
    double exponent = 0.0;
    double critical = 0.0;
    std::vector<ExcludedRow> excluded;
    std::size_t points_used = 0;
    double r_squared = 1.0;
    double max_abs_log_residual = 0.0;
    std::vector<CriterionMiss> misses;
};

/// Exclusion selector: "row=N" (1-based table row) or "ratio=X".
std::set<std::size_t> resolve_exclusions(std::span<const SizeClassRow> table,
                                         std::span<const std::string> selectors);

FitResult fit_size_class_table(std::span<const SizeClassRow> table,
                               const std::set<std::size_t>& exclusions = {});

/// OLS of ln D on ln R with R taken at each class's minimum.
FitResult fit_reference_table(std::span<const ReferenceCriteriaRow> table);

/**
 * Draws the log-log line through the first and last classes (by r_min) and
 * picks the largest C that still captures every tabulated point:
 * C = min_i D_i * r_min_i^-b.
 *
 * With an exponent override, b is replaced and C is anchored at the class
 * with the highest D. Points that then fall below C are reported in
 * FitResult::misses instead of lowering C.
 */
FitResult endpoint_criticality(std::span<const ReferenceCriteriaRow> table,
                               std::optional<double> exponent_override = std::nullopt);

/// D * R^-b, the left side of the reference criticality equation.
double reference_index(double d, double r, double b);
/// Reference flagging is inclusive: index >= C.
bool reference_critical(double d, double r, double b, double critical);

/// Parses "-1/3", "0.25", "-.5".
double parse_fraction(const std::string& text);

/// Table CSV readers. Size-class columns: class_min, class_max (empty for
/// open-ended), ratio, and optional b_mid, eps_mid. Reference columns:
/// r_min, r_max (empty for open-ended), d_value.
std::vector<SizeClassRow> read_size_class_table(std::istream& in);
std::vector<ReferenceCriteriaRow> read_reference_table(std::istream& in);

}  // namespace panelguard

#endif
