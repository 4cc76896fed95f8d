#ifndef PANELGUARD_LOSS_HPP
#define PANELGUARD_LOSS_HPP

#include <numbers>
#include <optional>
#include <string>

namespace panelguard {

/// Exponents of the loss family |F - B|^p * B^q.
struct LossParams {
    double p = 1.0;
    double q = -0.5;
};

/**
 * Returns a warning when q lies outside (-1, 0).
 *
 * Inside that interval the loss trades off absolute against relative
 * differences and rises in B at a fixed relative difference. Values outside
 * are legal (exploration is allowed) but the caller should be told.
 */
std::optional<std::string> q_regime_warning(double q);

/// |F - B|^p * B^q. Zero when F == B.
double eval_unsigned(double future, double base, const LossParams& params);

/// (F - B) * B^q, carrying the direction of the change.
double eval_signed(double future, double base, double q);

/// Exponent of B in the time-invariant loss, grouped as tq + (t - 1) so that
/// t = 1 yields exactly q.
inline double time_invariant_exponent(double q, double t) { return t * q + (t - 1.0); }

/**
 * |F - B| * B^(tq + t - 1) for a pair observed t units after the base date,
 * with t rescaled so the latest observation sits at 1. This puts the
 * geometric-average absolute relative change of every t on a common basis;
 * at t = 1 it reduces to eval_unsigned with p = 1.
 */
double eval_time_invariant(double future, double base, double q, double t);

/// (F - B) * B^(tq + t - 1).
double eval_signed_time_invariant(double future, double base, double q, double t);

struct NormalizedParams {
    double p;
    double q;
    double critical;
};

/**
 * Raises the criticality equation |F-B|^p B^q = C to the power 1/p, giving
 * (1, q/p, C^(1/p)). The set of pairs with loss above C is unchanged.
 */
NormalizedParams lie_normalize(double p, double q, double critical);

/// q equivalent to the product |F-B|^r (|F-B|/B)^s, i.e. -s / (r + s).
double product_form_q(double r, double s);

/**
 * Starting q of log(range)/25 - 1. The heuristic is not scale-invariant, so
 * it is only meaningful for discrete data such as counts.
 */
double bryan_initial_q(double range, double log_base = std::numbers::e);

}  // namespace panelguard

#endif
