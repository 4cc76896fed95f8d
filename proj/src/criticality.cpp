#include "panelguard/criticality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "panelguard/errors.hpp"

namespace panelguard {

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw UsageError(fmt::format("quantile level must lie in (0, 1), got {}", alpha));
    }
}

void require_k(double k) {
    if (!(k > 0.0) || !std::isfinite(k)) {
        throw UsageError(fmt::format("fence multiplier must be positive, got {}", k));
    }
}
}  // namespace

bool is_signed(const CriticalRule& rule) {
    return std::holds_alternative<rule::SignedFixed>(rule) ||
           std::holds_alternative<rule::SignedQuantile>(rule) ||
           std::holds_alternative<rule::SignedFence>(rule);
}

std::string describe(const CriticalRule& rule) {
    return std::visit(
        overloaded{
            [](const rule::Fixed& r) { return fmt::format("fixed C={}", r.critical); },
            [](const rule::Quantile& r) { return fmt::format("quantile alpha={}", r.alpha); },
            [](const rule::TukeyFence& r) { return fmt::format("Tukey fence Q3 + {}*IQR", r.k); },
            [](const rule::SignedFixed& r) {
                return fmt::format("signed bounds C-={} C+={}", r.lower, r.upper);
            },
            [](const rule::SignedQuantile& r) {
                return fmt::format("signed quantiles alpha-={} alpha+={}", r.alpha_lower, r.alpha_upper);
            },
            [](const rule::SignedFence& r) {
                return fmt::format("signed Tukey fences Q1 - {0}*IQR, Q3 + {0}*IQR", r.k);
            },
        },
        rule);
}

void validate(const CriticalRule& rule) {
    std::visit(overloaded{
                   [](const rule::Fixed& r) {
                       if (!(r.critical > 0.0) || !std::isfinite(r.critical)) {
                           throw UsageError(fmt::format("critical value must be positive, got {}", r.critical));
                       }
                   },
                   [](const rule::Quantile& r) { require_alpha(r.alpha); },
                   [](const rule::TukeyFence& r) { require_k(r.k); },
                   [](const rule::SignedFixed& r) {
                       if (!std::isfinite(r.lower) || !std::isfinite(r.upper)) {
                           throw UsageError("signed bounds must be finite");
                       }
                       if (!(r.lower < r.upper)) {
                           throw UsageError(fmt::format("signed bounds need C- < C+, got ({}, {})",
                                                        r.lower, r.upper));
                       }
                   },
                   [](const rule::SignedQuantile& r) {
                       require_alpha(r.alpha_lower);
                       require_alpha(r.alpha_upper);
                       if (!(r.alpha_lower < r.alpha_upper)) {
                           throw UsageError(fmt::format("signed quantiles need alpha- < alpha+, got ({}, {})",
                                                        r.alpha_lower, r.alpha_upper));
                       }
                   },
                   [](const rule::SignedFence& r) { require_k(r.k); },
               },
               rule);
}

bool Thresholds::exceeds(double value) const {
    return value > upper || (lower && value < *lower);
}

double quantile(std::span<const double> values, double alpha) {
    if (values.empty()) throw DataError("quantile of an empty set");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw UsageError(fmt::format("quantile level must lie in [0, 1], got {}", alpha));
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = static_cast<double>(sorted.size() - 1) * alpha;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size() || frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> values) {
    return {quantile(values, 0.25), quantile(values, 0.75)};
}

Thresholds derive_critical(std::span<const double> losses, const CriticalRule& rule) {
    validate(rule);
    if (losses.empty()) throw DataError("cannot derive a critical value from no losses");
    return std::visit(
        overloaded{
            [](const rule::Fixed& r) { return Thresholds{std::nullopt, r.critical}; },
            [&](const rule::Quantile& r) { return Thresholds{std::nullopt, quantile(losses, r.alpha)}; },
            // Unsigned losses are one-sided, so only the upper fence applies.
            [&](const rule::TukeyFence& r) {
                auto qs = quartiles(losses);
                return Thresholds{std::nullopt, qs.q3 + r.k * qs.iqr()};
            },
            [](const rule::SignedFixed& r) { return Thresholds{r.lower, r.upper}; },
            [&](const rule::SignedQuantile& r) {
                return Thresholds{quantile(losses, r.alpha_lower), quantile(losses, r.alpha_upper)};
            },
            [&](const rule::SignedFence& r) {
                auto qs = quartiles(losses);
                return Thresholds{qs.q1 - r.k * qs.iqr(), qs.q3 + r.k * qs.iqr()};
            },
        },
        rule);
}

std::vector<std::size_t> rank_descending(std::span<const double> losses,
                                         std::span<const std::string> ids) {
    if (losses.size() != ids.size()) throw UsageError("rank_descending: losses and ids differ in length");
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (losses[a] != losses[b]) return losses[a] > losses[b];
        return ids[a] < ids[b];
    });
    std::vector<std::size_t> ranks(losses.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
    return ranks;
}

std::vector<bool> flag_unsigned(std::span<const double> losses, double critical) {
    std::vector<bool> flags(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) flags[i] = losses[i] > critical;
    return flags;
}

std::vector<bool> flag_signed(std::span<const double> signed_losses, double lower, double upper) {
    if (!(lower < upper)) {
        throw UsageError(fmt::format("signed bounds need C- < C+, got ({}, {})", lower, upper));
    }
    std::vector<bool> flags(signed_losses.size());
    for (std::size_t i = 0; i < signed_losses.size(); ++i) {
        flags[i] = signed_losses[i] < lower || signed_losses[i] > upper;
    }
    return flags;
}

}  // namespace panelguard
