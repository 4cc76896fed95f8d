#ifndef PANELGUARD_NOMINAL_HPP
#define PANELGUARD_NOMINAL_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "panelguard/panel_io.hpp"

namespace panelguard {

/// Two estimates of the same unit at the same chronological time.
struct NominalPair {
    std::string id;
    double b_value = 0.0;
    double f_value = 0.0;
};

struct DirectionScores {
    std::vector<double> loss;
    std::vector<double> signed_loss;
    std::vector<std::size_t> rank;
};

/// Scores in input order. `b_base` uses B as the base (|F-B| B^q), `f_base`
/// swaps the roles (|B-F| F^q). Neither direction is privileged.
struct NominalComparison {
    std::vector<NominalPair> pairs;
    double q = -0.5;
    DirectionScores b_base;
    DirectionScores f_base;
};

NominalComparison compare_sets(std::span<const NominalPair> pairs, double q = -0.5);

/// Reads id, b_value, f_value columns (names configurable). The zero policy
/// applies to both value columns.
std::vector<NominalPair> load_nominal_pairs(std::istream& in, const PreprocessPolicy& policy,
                                            const std::string& id_col = "id",
                                            const std::string& b_col = "b_value",
                                            const std::string& f_col = "f_value");

/**
 * Generating model for two unbiased estimate sets: E B_i = E F_i = A_i,
 * Var B_i = Var F_i = sigma2 * A_i, Corr(B_i, F_i) = rho. Under it
 * E (F - B)^2 = 2 (1 - rho) sigma2 A_i, which is what makes q = -1/2 the
 * natural exponent for comparing the two sets.
 */
struct NominalComparisonModel {
    std::vector<double> true_values;
    double sigma2 = 1.0;
    double rho = 0.0;
};

/// Correlated normal perturbations, redrawn until both values are positive.
/// Deterministic for a fixed seed.
std::vector<NominalPair> simulate_nominal(const NominalComparisonModel& model, std::uint64_t seed);

}  // namespace panelguard

#endif
