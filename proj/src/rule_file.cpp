#include "panelguard/rule_file.hpp"

#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "panelguard/csv.hpp"
#include "panelguard/errors.hpp"

namespace panelguard {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::string num(double v) { return csv::format_number(v); }

const char* kind_name(RuleFile::Kind kind) {
    switch (kind) {
    case RuleFile::Kind::Loss: return "loss";
    case RuleFile::Kind::SizeClass: return "size-class";
    case RuleFile::Kind::Reference: return "reference";
    }
    return "loss";
}

bool is_rule_key(const std::string& key) {
    static const char* keys[] = {"kind", "p", "q", "signed", "time_invariant", "rule", "critical", "alpha",
                                 "k", "lower", "upper", "alpha_lower", "alpha_upper", "b"};
    for (const char* k : keys) {
        if (key == k) return true;
    }
    return false;
}

}  // namespace

RuleFile rule_file_from_fit(const FitResult& fit) {
    RuleFile file;
    file.kind = fit.kind == CriteriaKind::SizeClass ? RuleFile::Kind::SizeClass : RuleFile::Kind::Reference;
    if (fit.kind == CriteriaKind::SizeClass) {
        file.params = {1.0, fit.exponent};
    } else {
        file.reference_b = fit.exponent;
    }
    file.rule = rule::Fixed{fit.critical};

    auto& d = file.diagnostics;
    d.emplace_back("method", fit.method);
    d.emplace_back("slope", num(fit.slope));
    d.emplace_back("intercept", num(fit.intercept));
    d.emplace_back("points_used", std::to_string(fit.points_used));
    d.emplace_back("r_squared", num(fit.r_squared));
    d.emplace_back("max_abs_log_residual", num(fit.max_abs_log_residual));
    std::string excluded;
    for (const auto& e : fit.excluded) {
        if (!excluded.empty()) excluded += ';';
        excluded += fmt::format("{}:{}", e.row + 1, e.reason);
    }
    d.emplace_back("excluded", excluded);
    std::string misses;
    for (const auto& m : fit.misses) {
        if (!misses.empty()) misses += ';';
        misses += fmt::format("{}:{}", m.row + 1, num(m.index));
    }
    if (fit.kind == CriteriaKind::Reference) d.emplace_back("misses", misses);
    return file;
}

void write_rule_file(std::ostream& out, const RuleFile& file) {
    out << "# panelguard rule\n";
    out << "kind=" << kind_name(file.kind) << '\n';
    switch (file.kind) {
    case RuleFile::Kind::Loss:
        out << "p=" << num(file.params.p) << '\n';
        out << "q=" << num(file.params.q) << '\n';
        out << "signed=" << (file.signed_scores ? "true" : "false") << '\n';
        out << "time_invariant=" << (file.time_invariant ? "true" : "false") << '\n';
        break;
    case RuleFile::Kind::SizeClass:
        out << "q=" << num(file.params.q) << '\n';
        break;
    case RuleFile::Kind::Reference:
        out << "b=" << num(file.reference_b) << '\n';
        break;
    }
    if (file.rule) {
        std::visit(overloaded{
                       [&](const rule::Fixed& r) { out << "rule=fixed\ncritical=" << num(r.critical) << '\n'; },
                       [&](const rule::Quantile& r) { out << "rule=quantile\nalpha=" << num(r.alpha) << '\n'; },
                       [&](const rule::TukeyFence& r) { out << "rule=fence\nk=" << num(r.k) << '\n'; },
                       [&](const rule::SignedFixed& r) {
                           out << "rule=signed_fixed\nlower=" << num(r.lower) << "\nupper=" << num(r.upper)
                               << '\n';
                       },
                       [&](const rule::SignedQuantile& r) {
                           out << "rule=signed_quantile\nalpha_lower=" << num(r.alpha_lower)
                               << "\nalpha_upper=" << num(r.alpha_upper) << '\n';
                       },
                       [&](const rule::SignedFence& r) { out << "rule=signed_fence\nk=" << num(r.k) << '\n'; },
                   },
                   *file.rule);
    }
    for (const auto& [key, value] : file.diagnostics) out << key << '=' << value << '\n';
}

RuleFile read_rule_file(std::istream& in) {
    std::map<std::string, std::string> values;
    RuleFile file;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError(fmt::format("rule file line {}: expected key=value", line_no));
        std::string key = line.substr(first, eq - first);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::string value = line.substr(eq + 1);
        if (!values.emplace(key, value).second) {
            throw DataError(fmt::format("rule file line {}: duplicate key '{}'", line_no, key));
        }
        if (!is_rule_key(key)) file.diagnostics.emplace_back(key, value);
    }

    auto number = [&](const std::string& key) -> double {
        auto it = values.find(key);
        if (it == values.end()) throw DataError(fmt::format("rule file: missing key '{}'", key));
        auto v = csv::parse_number(it->second);
        if (!v) throw DataError(fmt::format("rule file: '{}' is not a number: '{}'", key, it->second));
        return *v;
    };
    auto boolean = [&](const std::string& key) {
        auto it = values.find(key);
        if (it == values.end()) return false;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw DataError(fmt::format("rule file: '{}' must be true or false", key));
    };

    const std::string kind = values.contains("kind") ? values["kind"] : "loss";
    if (kind == "loss") {
        file.kind = RuleFile::Kind::Loss;
        file.params.p = values.contains("p") ? number("p") : 1.0;
        file.params.q = values.contains("q") ? number("q") : -0.5;
        file.signed_scores = boolean("signed");
        file.time_invariant = boolean("time_invariant");
    } else if (kind == "size-class") {
        file.kind = RuleFile::Kind::SizeClass;
        file.params = {1.0, number("q")};
    } else if (kind == "reference") {
        file.kind = RuleFile::Kind::Reference;
        file.reference_b = number("b");
    } else {
        throw DataError(fmt::format("rule file: unknown kind '{}'", kind));
    }

    if (values.contains("rule")) {
        const std::string& name = values["rule"];
        if (name == "fixed") {
            file.rule = rule::Fixed{number("critical")};
        } else if (name == "quantile") {
            file.rule = rule::Quantile{number("alpha")};
        } else if (name == "fence") {
            file.rule = rule::TukeyFence{number("k")};
        } else if (name == "signed_fixed") {
            file.rule = rule::SignedFixed{number("lower"), number("upper")};
        } else if (name == "signed_quantile") {
            file.rule = rule::SignedQuantile{number("alpha_lower"), number("alpha_upper")};
        } else if (name == "signed_fence") {
            file.rule = rule::SignedFence{number("k")};
        } else {
            throw DataError(fmt::format("rule file: unknown rule '{}'", name));
        }
    } else if (values.contains("critical")) {
        file.rule = rule::Fixed{number("critical")};
    }
    if (file.kind != RuleFile::Kind::Loss) {
        if (!file.rule || !std::holds_alternative<rule::Fixed>(*file.rule)) {
            throw DataError(fmt::format("rule file: kind '{}' needs a fixed critical value", kind));
        }
    }
    if (file.rule) {
        try {
            validate(*file.rule);
        } catch (const UsageError& e) {
            throw DataError(fmt::format("rule file: {}", e.what()));
        }
        if (is_signed(*file.rule)) file.signed_scores = true;
    }
    return file;
}

}  // namespace panelguard
