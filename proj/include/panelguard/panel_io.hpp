#ifndef PANELGUARD_PANEL_IO_HPP
#define PANELGUARD_PANEL_IO_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace panelguard {

struct Observation {
    std::string time_label;
    double value = 0.0;
    /// Elapsed time since the base date, when the panel carries a time column.
    std::optional<double> elapsed;
};

/// One cross-sectional unit: a base value B and its future values F_t.
struct PanelRecord {
    std::string id;
    double base = 0.0;
    std::vector<Observation> observations;
    /// Unbound input columns (join keys, classification labels).
    std::map<std::string, std::string> attributes;
};

enum class ZeroHandling { Recode, RecodeAuto, Omit };

/// How exact zeroes in the base and value columns are treated. Negative
/// values are always rejected.
struct PreprocessPolicy {
    ZeroHandling zero_handling = ZeroHandling::RecodeAuto;
    double recode_value = 0.0;

    static PreprocessPolicy omit() { return {ZeroHandling::Omit, 0.0}; }
    static PreprocessPolicy recode_auto() { return {ZeroHandling::RecodeAuto, 0.0}; }
    static PreprocessPolicy recode(double value);

    /// Parses the command-line spelling: "omit", "auto" or "value=X".
    static PreprocessPolicy parse(const std::string& text);
};

struct TimeBinding {
    std::string column;
    /// When set, the column holds labels rather than numbers. Labels are
    /// ordered by first appearance and the k-th label (1-based) is placed
    /// at elapsed time k * spacing.
    std::optional<double> label_spacing;
};

struct ColumnBindings {
    std::string id = "id";
    std::string base = "base";
    std::string value = "value";
    std::optional<TimeBinding> time;
};

struct PreprocessReport {
    std::size_t rows_read = 0;
    std::size_t recoded = 0;
    std::size_t omitted = 0;
    std::size_t records_dropped = 0;
    std::optional<double> recode_value;
};

struct Panel {
    std::vector<PanelRecord> records;
    PreprocessReport report;
    /// Header of the source, in input order.
    std::vector<std::string> columns;
    /// Names of the unbound columns kept as attributes, in input order.
    std::vector<std::string> attribute_columns;
    bool has_time = false;

    std::size_t observation_count() const;
    /// Smallest and largest of all base and observation values.
    std::pair<double, double> value_range() const;
};

/// Loads a long-format panel: one row per (id, time) observation. Rows that
/// share an id must agree on the base value.
Panel load_panel(std::istream& source, const ColumnBindings& bindings,
                 const PreprocessPolicy& policy);

/// Half the smallest strictly positive value.
double recode_auto_value(std::span<const double> column_values);

/// Elapsed times divided by their maximum, so the last one becomes exactly 1.
std::vector<double> rescale_times(std::span<const double> elapsed);

/// Mapping time_label -> rescaled t in (0, 1].
class TimeScale {
public:
    TimeScale() = default;
    /// Builds the scale from the distinct (label, elapsed) pairs of a panel.
    static TimeScale from_panel(const Panel& panel);

    double at(const std::string& label) const;
    const std::map<std::string, double>& mapping() const { return mapping_; }
    /// True when the source times were not already on the (0, 1] scale.
    bool rescaled() const { return rescaled_; }

private:
    std::map<std::string, double> mapping_;
    bool rescaled_ = false;
};

}  // namespace panelguard

#endif
