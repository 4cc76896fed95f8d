#include "panelguard/loss.hpp"

#include <cmath>

#include <fmt/format.h>

#include "panelguard/errors.hpp"

namespace panelguard {

namespace {

void require_positive_pair(double future, double base) {
    if (!(future > 0.0) || !std::isfinite(future)) {
        throw DataError(fmt::format("future value must be positive, got {}", future));
    }
    if (!(base > 0.0) || !std::isfinite(base)) {
        throw DataError(fmt::format("base value must be positive, got {}", base));
    }
}

void require_finite_q(double q) {
    if (!std::isfinite(q)) throw UsageError("q must be finite");
}

double checked(double loss) {
    if (!std::isfinite(loss)) throw DataError("loss overflowed double precision");
    return loss;
}

void require_time(double t) {
    if (!(t > 0.0 && t <= 1.0)) {
        throw DataError(fmt::format("time must lie in (0, 1], got {}", t));
    }
}

}  // namespace

std::optional<std::string> q_regime_warning(double q) {
    if (q > -1.0 && q < 0.0) return std::nullopt;
    if (q <= -1.0) {
        return fmt::format("q = {} <= -1: loss no longer rises with B at a fixed relative difference", q);
    }
    return fmt::format("q = {} >= 0: loss no longer falls with B at a fixed absolute difference", q);
}

double eval_unsigned(double future, double base, const LossParams& params) {
    require_positive_pair(future, base);
    require_finite_q(params.q);
    if (!(params.p > 0.0) || !std::isfinite(params.p)) {
        throw UsageError(fmt::format("p must be positive, got {}", params.p));
    }
    if (future == base) return 0.0;
    const double diff = std::fabs(future - base);
    const double magnitude = params.p == 1.0 ? diff : std::pow(diff, params.p);
    return checked(magnitude * std::pow(base, params.q));
}

double eval_signed(double future, double base, double q) {
    require_positive_pair(future, base);
    require_finite_q(q);
    if (future == base) return 0.0;
    return checked((future - base) * std::pow(base, q));
}

double eval_time_invariant(double future, double base, double q, double t) {
    require_time(t);
    return eval_unsigned(future, base, {1.0, time_invariant_exponent(q, t)});
}

double eval_signed_time_invariant(double future, double base, double q, double t) {
    require_time(t);
    return eval_signed(future, base, time_invariant_exponent(q, t));
}

NormalizedParams lie_normalize(double p, double q, double critical) {
    if (!(p > 0.0) || !std::isfinite(p)) throw UsageError(fmt::format("p must be positive, got {}", p));
    if (!(critical > 0.0) || !std::isfinite(critical)) {
        throw UsageError(fmt::format("critical value must be positive, got {}", critical));
    }
    require_finite_q(q);
    if (p == 1.0) return {1.0, q, critical};
    return {1.0, q / p, std::pow(critical, 1.0 / p)};
}

double product_form_q(double r, double s) {
    if (!(r > 0.0) || !(s > 0.0)) {
        throw UsageError(fmt::format("product-form weights must be positive, got r={}, s={}", r, s));
    }
    return -s / (r + s);
}

double bryan_initial_q(double range, double log_base) {
    if (!(range > 0.0) || !std::isfinite(range)) {
        throw DataError(fmt::format("data range must be positive, got {}", range));
    }
    if (!(log_base > 1.0)) throw UsageError(fmt::format("log base must exceed 1, got {}", log_base));
    return std::log(range) / std::log(log_base) / 25.0 - 1.0;
}

}  // namespace panelguard
