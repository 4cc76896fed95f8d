#ifndef PANELGUARD_PIPELINE_HPP
#define PANELGUARD_PIPELINE_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "panelguard/criticality.hpp"
#include "panelguard/loss.hpp"
#include "panelguard/nominal.hpp"
#include "panelguard/panel_io.hpp"

namespace panelguard {

struct ScoreOptions {
    LossParams params;
    bool time_invariant = false;
};

/// One scored observation.
struct ScoredRecord {
    std::string id;
    double base = 0.0;
    double value = 0.0;
    std::optional<double> t;
    double loss = 0.0;
    double signed_loss = 0.0;
    std::size_t rank = 0;
    bool flagged = false;
    std::map<std::string, std::string> attributes;
};

/// Records ordered by rank (1 = largest loss).
struct ScoredSet {
    std::vector<ScoredRecord> records;
    std::vector<std::string> attribute_columns;
    bool has_t = false;

    std::vector<double> losses() const;
    std::vector<double> signed_losses() const;
};

/// Scores every observation. With time_invariant, elapsed times are rescaled
/// so the maximum is 1 and the loss uses the B^(tq + t - 1) exponent.
ScoredSet score_panel(const Panel& panel, const ScoreOptions& options);

/// Reference-variable scoring: loss = D * R^-b with R = base and D = value.
ScoredSet score_reference(const Panel& panel, double b);

enum class Grouping { Pooled, PerSlice };

struct SliceThresholds {
    std::optional<double> t;
    Thresholds thresholds;
};

struct FlagSummary {
    std::string rule;
    std::vector<SliceThresholds> thresholds;
    std::size_t flagged = 0;
    std::size_t total = 0;
};

/// Derives thresholds (pooled, or per distinct t) and sets `flagged` with
/// strict exceedance. Signed rules act on signed losses.
FlagSummary apply_rule(ScoredSet& scored, const CriticalRule& rule,
                       Grouping grouping = Grouping::Pooled);

/// Inclusive flagging of reference indices: loss >= critical.
FlagSummary apply_reference_rule(ScoredSet& scored, double critical);

/// id, base, value, t, loss, signed_loss, rank[, flagged], then attributes.
void write_scored_csv(std::ostream& out, const ScoredSet& scored, bool with_flags);

/// True when a header carries the scored columns (loss, signed_loss).
bool is_scored_header(std::span<const std::string> header);

/// Reads a scored CSV back. Ranks are recomputed from the losses.
ScoredSet read_scored_csv(std::istream& in, const std::string& id_col = "id");

struct BreakAssignment {
    /// k - 1 interior break points (type-7 quantiles at j/k).
    std::vector<double> breaks;
    /// Class in 1..k per input loss: 1 + number of breaks strictly below it.
    std::vector<std::size_t> classes;
    bool degenerate = false;
};

BreakAssignment quantile_classes(std::span<const double> losses, std::size_t k);

/// id, t, loss, class, then attributes; rows in the scored order.
void write_breaks_csv(std::ostream& out, const ScoredSet& scored, const BreakAssignment& breaks);

struct ComparisonFlags {
    std::vector<bool> b_base;
    std::vector<bool> f_base;
    std::vector<Thresholds> thresholds;  // one per direction when a rule was applied
};

/// Applies the same rule to each direction independently.
ComparisonFlags flag_comparison(const NominalComparison& cmp, const CriticalRule& rule);

/// Side-by-side output ordered by the B-base rank. Flag columns are written
/// only when `flags` is provided; `flag_any` is their union.
void write_comparison_csv(std::ostream& out, const NominalComparison& cmp,
                          const ComparisonFlags* flags);

}  // namespace panelguard

#endif
