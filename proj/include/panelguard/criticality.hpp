#ifndef PANELGUARD_CRITICALITY_HPP
#define PANELGUARD_CRITICALITY_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace panelguard {

namespace rule {
struct Fixed { double critical; };
struct Quantile { double alpha; };
struct TukeyFence { double k; };
struct SignedFixed { double lower; double upper; };
struct SignedQuantile { double alpha_lower; double alpha_upper; };
struct SignedFence { double k; };
}  // namespace rule

/// How the critical value (or the signed pair C-, C+) is obtained.
using CriticalRule = std::variant<rule::Fixed, rule::Quantile, rule::TukeyFence,
                                  rule::SignedFixed, rule::SignedQuantile, rule::SignedFence>;

bool is_signed(const CriticalRule& rule);
std::string describe(const CriticalRule& rule);
/// Throws UsageError when the rule's own parameters are out of domain.
void validate(const CriticalRule& rule);

/// Threshold(s) in effect. Unsigned rules only set `upper`.
struct Thresholds {
    std::optional<double> lower;
    double upper = 0.0;

    /// Strict exceedance: value > upper, or value < lower when present.
    bool exceeds(double value) const;
};

/// Type-7 empirical quantile: linear interpolation between order statistics
/// at position 1 + (n - 1) * alpha.
double quantile(std::span<const double> values, double alpha);

struct Quartiles {
    double q1;
    double q3;
    double iqr() const { return q3 - q1; }
};
Quartiles quartiles(std::span<const double> values);

/// Resolves a rule against the losses (signed losses for signed rules).
Thresholds derive_critical(std::span<const double> losses, const CriticalRule& rule);

/// Rank of each loss, 1 = largest. Ties go to the lexicographically smaller id.
std::vector<std::size_t> rank_descending(std::span<const double> losses,
                                         std::span<const std::string> ids);

std::vector<bool> flag_unsigned(std::span<const double> losses, double critical);
std::vector<bool> flag_signed(std::span<const double> signed_losses, double lower, double upper);

}  // namespace panelguard

#endif
