// Legacy criteria tables used across the test suites.
#ifndef PANELGUARD_TESTS_CRITERIA_TABLES_HPP
#define PANELGUARD_TESTS_CRITERIA_TABLES_HPP

#include <vector>

#include "panelguard/criteria_fit.hpp"

namespace fixtures {

/// Size-class ratio table, largest class first, with its published midpoints.
inline std::vector<panelguard::SizeClassRow> size_class_criteria() {
    return {
        {50000, std::nullopt, 0.05, std::nullopt, std::nullopt},
        {25000, 49999, 0.15, 37500, 5625},
        {10000, 24999, 0.40, 17500, 7000},
        {5000, 9999, 0.60, 7500, 4500},
        {2500, 4999, 1.00, 3750, 3750},
        {1000, 2499, 1.50, 1250, 2625},
        {500, 999, 3.00, 750, 2250},
        {0, 499, 4.00, 250, 1000},
    };
}

/// Reference-variable criteria: D by class of R, largest R first.
inline std::vector<panelguard::ReferenceCriteriaRow> reference_criteria() {
    return {
        {500000, std::nullopt, 1}, {250000, 499999, 1.5}, {100000, 249999, 2}, {75000, 99999, 3},
        {50000, 74999, 4},         {30000, 49999, 5},     {20000, 29999, 6},   {10000, 19999, 8},
        {5000, 9999, 10},          {1000, 4999, 14},      {250, 999, 30},      {1, 249, 80},
    };
}

}  // namespace fixtures

#endif
