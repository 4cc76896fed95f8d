#include "panelguard/panel_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <fmt/format.h>

#include "panelguard/csv.hpp"
#include "panelguard/errors.hpp"

namespace panelguard {

PreprocessPolicy PreprocessPolicy::recode(double value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw UsageError(fmt::format("zero recode value must be strictly positive, got {}", value));
    }
    return {ZeroHandling::Recode, value};
}

PreprocessPolicy PreprocessPolicy::parse(const std::string& text) {
    if (text == "omit") return omit();
    if (text == "auto") return recode_auto();
    if (text.starts_with("value=")) {
        auto v = csv::parse_number(std::string_view(text).substr(6));
        if (!v) throw UsageError(fmt::format("bad zero policy value in '{}'", text));
        return recode(*v);
    }
    throw UsageError(fmt::format("unknown zero policy '{}' (expected omit, auto or value=X)", text));
}

std::size_t Panel::observation_count() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.observations.size();
    return n;
}

std::pair<double, double> Panel::value_range() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : records) {
        lo = std::min(lo, r.base);
        hi = std::max(hi, r.base);
        for (const auto& o : r.observations) {
            lo = std::min(lo, o.value);
            hi = std::max(hi, o.value);
        }
    }
    return {lo, hi};
}

double recode_auto_value(std::span<const double> column_values) {
    double smallest = std::numeric_limits<double>::infinity();
    for (double v : column_values) {
        if (v > 0.0) smallest = std::min(smallest, v);
    }
    if (!std::isfinite(smallest)) {
        throw DataError("cannot derive a zero recode value: no strictly positive values");
    }
    return smallest / 2.0;
}

std::vector<double> rescale_times(std::span<const double> elapsed) {
    if (elapsed.empty()) throw DataError("no elapsed times to rescale");
    double largest = 0.0;
    for (double t : elapsed) {
        if (!(t > 0.0) || !std::isfinite(t)) {
            throw DataError(fmt::format("elapsed time must be strictly positive, got {}", t));
        }
        largest = std::max(largest, t);
    }
    std::vector<double> out;
    out.reserve(elapsed.size());
    for (double t : elapsed) out.push_back(t == largest ? 1.0 : t / largest);
    return out;
}

namespace {

struct RawRow {
    std::size_t line;
    std::string id;
    double base;
    double value;
    std::string time_label;
    std::optional<double> elapsed;
    std::map<std::string, std::string> attributes;
};

double parse_cell(const csv::Table& table, std::size_t row, std::size_t col) {
    const std::string& cell = table.rows[row][col];
    auto v = csv::parse_number(cell);
    if (!v) {
        throw DataError(fmt::format("line {}: column '{}': not a number: '{}'",
                                    table.line_numbers[row], table.header[col], cell));
    }
    if (*v < 0.0) {
        throw DataError(fmt::format("line {}: column '{}': negative value {} (values must be >= 0)",
                                    table.line_numbers[row], table.header[col], cell));
    }
    return *v;
}

}  // namespace

Panel load_panel(std::istream& source, const ColumnBindings& bindings,
                 const PreprocessPolicy& policy) {
    if (policy.zero_handling == ZeroHandling::Recode && !(policy.recode_value > 0.0)) {
        throw UsageError("zero recode value must be strictly positive");
    }
    if (bindings.time && bindings.time->label_spacing && !(*bindings.time->label_spacing > 0.0)) {
        throw UsageError("time label spacing must be strictly positive");
    }
    csv::Table table = csv::read(source);

    const std::size_t id_col = table.require_column(bindings.id);
    const std::size_t base_col = table.require_column(bindings.base);
    const std::size_t value_col = table.require_column(bindings.value);
    std::optional<std::size_t> time_col;
    if (bindings.time) time_col = table.require_column(bindings.time->column);

    Panel panel;
    panel.columns = table.header;
    panel.has_time = time_col.has_value();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c != id_col && c != base_col && c != value_col && c != time_col) {
            panel.attribute_columns.push_back(table.header[c]);
        }
    }

    std::vector<RawRow> raw;
    raw.reserve(table.rows.size());
    std::unordered_map<std::string, double> label_position;
    bool any_zero = false;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        RawRow row;
        row.line = table.line_numbers[r];
        row.id = cells[id_col];
        if (row.id.empty()) throw DataError(fmt::format("line {}: empty id", row.line));
        row.base = parse_cell(table, r, base_col);
        row.value = parse_cell(table, r, value_col);
        any_zero = any_zero || row.base == 0.0 || row.value == 0.0;
        if (time_col) {
            row.time_label = cells[*time_col];
            if (bindings.time->label_spacing) {
                auto [it, inserted] = label_position.try_emplace(
                    row.time_label, static_cast<double>(label_position.size() + 1));
                row.elapsed = it->second * *bindings.time->label_spacing;
            } else {
                auto t = csv::parse_number(row.time_label);
                if (!t || !(*t > 0.0)) {
                    throw DataError(fmt::format("line {}: column '{}': elapsed time must be a positive number, got '{}'",
                                                row.line, bindings.time->column, row.time_label));
                }
                row.elapsed = *t;
            }
        }
        for (const auto& name : panel.attribute_columns) {
            row.attributes.emplace(name, cells[*table.column(name)]);
        }
        raw.push_back(std::move(row));
    }
    panel.report.rows_read = raw.size();

    double recode_value = policy.recode_value;
    if (any_zero && policy.zero_handling == ZeroHandling::RecodeAuto) {
        std::vector<double> cells;
        cells.reserve(raw.size() * 2);
        for (const auto& row : raw) {
            cells.push_back(row.base);
            cells.push_back(row.value);
        }
        recode_value = recode_auto_value(cells);
    }
    if (any_zero && policy.zero_handling != ZeroHandling::Omit) panel.report.recode_value = recode_value;

    std::unordered_map<std::string, std::size_t> index_of;
    std::vector<std::string> order;
    std::unordered_map<std::string, double> raw_base;
    std::unordered_map<std::string, PanelRecord> by_id;

    for (auto& row : raw) {
        auto [it, inserted] = raw_base.try_emplace(row.id, row.base);
        if (!inserted && it->second != row.base) {
            throw DataError(fmt::format("line {}: id '{}' has conflicting base values {} and {}",
                                        row.line, row.id, it->second, row.base));
        }
        if (inserted) order.push_back(row.id);

        bool drop = false;
        for (double* cell : {&row.base, &row.value}) {
            if (*cell != 0.0) continue;
            if (policy.zero_handling == ZeroHandling::Omit) {
                ++panel.report.omitted;
                drop = true;
            } else {
                *cell = recode_value;
                ++panel.report.recoded;
            }
        }

        auto& record = by_id[row.id];
        if (record.id.empty()) {
            record.id = row.id;
            record.base = row.base;
            record.attributes = row.attributes;
        }
        if (drop) continue;
        for (const auto& o : record.observations) {
            if (o.time_label == row.time_label) {
                throw DataError(row.time_label.empty()
                                    ? fmt::format("line {}: duplicate row for id '{}'", row.line, row.id)
                                    : fmt::format("line {}: duplicate time '{}' for id '{}'", row.line,
                                                  row.time_label, row.id));
            }
        }
        record.observations.push_back({row.time_label, row.value, row.elapsed});
    }

    for (const auto& id : order) {
        auto& record = by_id[id];
        if (record.observations.empty()) {
            ++panel.report.records_dropped;
            continue;
        }
        if (!(record.base > 0.0)) {
            throw DataError(fmt::format("id '{}': base must be positive after preprocessing", id));
        }
        panel.records.push_back(std::move(record));
    }
    return panel;
}

TimeScale TimeScale::from_panel(const Panel& panel) {
    std::map<std::string, double> elapsed_by_label;
    for (const auto& r : panel.records) {
        for (const auto& o : r.observations) {
            if (!o.elapsed) throw DataError("panel has no time column");
            auto [it, inserted] = elapsed_by_label.try_emplace(o.time_label, *o.elapsed);
            if (!inserted && it->second != *o.elapsed) {
                throw DataError(fmt::format("time label '{}' maps to two elapsed times", o.time_label));
            }
        }
    }
    std::vector<double> elapsed;
    for (const auto& [label, t] : elapsed_by_label) elapsed.push_back(t);
    auto scaled = rescale_times(elapsed);

    TimeScale scale;
    std::size_t i = 0;
    for (const auto& [label, t] : elapsed_by_label) {
        scale.mapping_.emplace(label, scaled[i]);
        if (scaled[i] != t) scale.rescaled_ = true;
        ++i;
    }
    return scale;
}

double TimeScale::at(const std::string& label) const {
    auto it = mapping_.find(label);
    if (it == mapping_.end()) throw DataError(fmt::format("unknown time label '{}'", label));
    return it->second;
}

}  // namespace panelguard
