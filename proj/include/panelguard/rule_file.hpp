#ifndef PANELGUARD_RULE_FILE_HPP
#define PANELGUARD_RULE_FILE_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelguard/criteria_fit.hpp"
#include "panelguard/criticality.hpp"
#include "panelguard/loss.hpp"

namespace panelguard {

/**
 * Flagging parameters persisted as `key=value` lines (`#` starts a comment).
 *
 *   kind=loss        p, q, signed, time_invariant, rule=<name> + rule keys
 *   kind=size-class  q, critical (compiled table; flags eps * B^q > C)
 *   kind=reference   b, critical (flags D * R^-b >= C, R = base, D = value)
 *
 * Unknown keys are preserved as diagnostics so fit reports survive a
 * read/write cycle.
 */
struct RuleFile {
    enum class Kind { Loss, SizeClass, Reference };

    Kind kind = Kind::Loss;
    LossParams params;
    bool signed_scores = false;
    bool time_invariant = false;
    std::optional<CriticalRule> rule;
    double reference_b = 0.0;
    std::vector<std::pair<std::string, std::string>> diagnostics;
};

RuleFile rule_file_from_fit(const FitResult& fit);

void write_rule_file(std::ostream& out, const RuleFile& file);
RuleFile read_rule_file(std::istream& in);

}  // namespace panelguard

#endif
