#include "panelguard/nominal.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "panelguard/criticality.hpp"
#include "panelguard/csv.hpp"
#include "panelguard/errors.hpp"
#include "panelguard/loss.hpp"

namespace panelguard {

NominalComparison compare_sets(std::span<const NominalPair> pairs, double q) {
    if (pairs.empty()) throw DataError("nothing to compare: no pairs");
    NominalComparison cmp;
    cmp.pairs.assign(pairs.begin(), pairs.end());
    cmp.q = q;
    std::vector<std::string> ids;
    for (const auto& pair : pairs) {
        if (!(pair.b_value > 0.0) || !(pair.f_value > 0.0)) {
            throw DataError(fmt::format("id '{}': both estimates must be positive", pair.id));
        }
        ids.push_back(pair.id);
        cmp.b_base.loss.push_back(eval_unsigned(pair.f_value, pair.b_value, {1.0, q}));
        cmp.b_base.signed_loss.push_back(eval_signed(pair.f_value, pair.b_value, q));
        cmp.f_base.loss.push_back(eval_unsigned(pair.b_value, pair.f_value, {1.0, q}));
        cmp.f_base.signed_loss.push_back(eval_signed(pair.b_value, pair.f_value, q));
    }
    cmp.b_base.rank = rank_descending(cmp.b_base.loss, ids);
    cmp.f_base.rank = rank_descending(cmp.f_base.loss, ids);
    return cmp;
}

std::vector<NominalPair> load_nominal_pairs(std::istream& in, const PreprocessPolicy& policy,
                                            const std::string& id_col, const std::string& b_col,
                                            const std::string& f_col) {
    ColumnBindings bindings;
    bindings.id = id_col;
    bindings.base = b_col;
    bindings.value = f_col;
    Panel panel = load_panel(in, bindings, policy);
    std::vector<NominalPair> pairs;
    pairs.reserve(panel.records.size());
    for (const auto& record : panel.records) {
        pairs.push_back({record.id, record.base, record.observations.front().value});
    }
    return pairs;
}

std::vector<NominalPair> simulate_nominal(const NominalComparisonModel& model, std::uint64_t seed) {
    if (!(model.sigma2 >= 0.0) || !std::isfinite(model.sigma2)) {
        throw UsageError(fmt::format("sigma^2 must be non-negative, got {}", model.sigma2));
    }
    if (!(model.rho >= -1.0 && model.rho < 1.0)) {
        throw UsageError(fmt::format("rho must lie in [-1, 1), got {}", model.rho));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double orth = std::sqrt(1.0 - model.rho * model.rho);

    std::vector<NominalPair> out;
    out.reserve(model.true_values.size());
    const int width = static_cast<int>(std::to_string(model.true_values.size()).size());
    for (std::size_t i = 0; i < model.true_values.size(); ++i) {
        const double a = model.true_values[i];
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw UsageError(fmt::format("true value {} must be positive, got {}", i, a));
        }
        const double sd = std::sqrt(model.sigma2 * a);
        double b = a;
        double f = a;
        for (int attempt = 0;; ++attempt) {
            if (attempt == 1000) {
                throw UsageError(fmt::format("true value {} is too small for sigma^2 = {}", a, model.sigma2));
            }
            const double z1 = normal(rng);
            const double z2 = normal(rng);
            b = a + sd * z1;
            f = a + sd * (model.rho * z1 + orth * z2);
            if (b > 0.0 && f > 0.0) break;
        }
        out.push_back({fmt::format("u{:0{}}", i + 1, width), b, f});
    }
    return out;
}

}  // namespace panelguard
