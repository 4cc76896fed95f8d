// panelguard: loss-function outlier detection for panel data.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "panelguard/criteria_fit.hpp"
#include "panelguard/criticality.hpp"
#include "panelguard/csv.hpp"
#include "panelguard/errors.hpp"
#include "panelguard/loss.hpp"
#include "panelguard/nominal.hpp"
#include "panelguard/panel_io.hpp"
#include "panelguard/pipeline.hpp"
#include "panelguard/rule_file.hpp"
#include "panelguard/serve.hpp"

namespace pg = panelguard;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kFit = 3 };

struct InputOptions {
    std::string input = "-";
    std::string output = "-";
    std::string id_col = "id";
    std::string base_col = "base";
    std::string value_col = "value";
    std::string time_col;
    double time_spacing = 0.0;
    std::string zero_policy = "auto";
};

struct LossOptions {
    double q = -0.5;
    double p = 1.0;
    bool time_invariant = false;
    bool signed_mode = false;
    CLI::Option* q_opt = nullptr;
    CLI::Option* p_opt = nullptr;
    CLI::Option* ti_opt = nullptr;
    CLI::Option* signed_opt = nullptr;

    bool any_given() const {
        return q_opt->count() + p_opt->count() + ti_opt->count() + signed_opt->count() > 0;
    }
};

struct RuleOptions {
    double critical = 0.0;
    double quantile = 0.0;
    double fence = 0.0;
    std::string signed_bounds;
    std::string signed_quantile;
    double signed_fence = 0.0;
    std::string rule_file;
    bool per_slice = false;
    std::vector<CLI::Option*> opts;

    std::size_t given() const {
        std::size_t n = 0;
        for (auto* o : opts) n += o->count() ? 1 : 0;
        return n;
    }
};

void add_input_options(CLI::App* app, InputOptions& o, bool with_time = true) {
    app->add_option("input", o.input, "Input CSV ('-' for stdin)");
    app->add_option("-o,--output", o.output, "Output path ('-' for stdout)");
    app->add_option("--id-col", o.id_col, "Identifier column");
    app->add_option("--base-col", o.base_col, "Base value (B) column");
    app->add_option("--value-col", o.value_col, "Future value (F) column");
    if (with_time) {
        app->add_option("--time-col", o.time_col, "Numeric elapsed-time column");
        app->add_option("--time-spacing", o.time_spacing,
                        "Treat --time-col as ordered labels spaced this far apart");
    }
    app->add_option("--zero-policy", o.zero_policy, "Zero handling: omit | auto | value=X");
}

void add_loss_options(CLI::App* app, LossOptions& o) {
    o.q_opt = app->add_option("--q", o.q, "Base exponent q (default -0.5)");
    o.p_opt = app->add_option("--p", o.p, "Difference exponent p (default 1)");
    o.ti_opt = app->add_flag("--time-invariant", o.time_invariant,
                             "Use |F-B| B^(tq+t-1) with times rescaled to (0, 1]");
    o.signed_opt = app->add_flag("--signed", o.signed_mode, "Flag on signed losses (F-B) B^q");
}

void add_rule_options(CLI::App* app, RuleOptions& o) {
    o.opts = {
        app->add_option("--critical", o.critical, "Fixed critical value C (flag loss > C)"),
        app->add_option("--quantile", o.quantile, "Critical value at this loss quantile"),
        app->add_option("--fence", o.fence, "Tukey fence Q3 + k*IQR"),
        app->add_option("--signed-bounds", o.signed_bounds, "Signed bounds C-,C+ (needs --signed)"),
        app->add_option("--signed-quantile", o.signed_quantile, "Signed quantiles a-,a+ (needs --signed)"),
        app->add_option("--signed-fence", o.signed_fence, "Signed Tukey fences with multiplier k (needs --signed)"),
        app->add_option("--rule", o.rule_file, "Rule file written by `fit` or the workbench"),
    };
}

std::pair<double, double> parse_pair(const std::string& text, const char* what) {
    auto comma = text.find(',');
    if (comma == std::string::npos) throw pg::UsageError(fmt::format("{} expects two values 'a,b'", what));
    auto a = pg::csv::parse_number(std::string_view(text).substr(0, comma));
    auto b = pg::csv::parse_number(std::string_view(text).substr(comma + 1));
    if (!a || !b) throw pg::UsageError(fmt::format("{}: not numbers: '{}'", what, text));
    return {*a, *b};
}

/// The explicit rule flags, or nullopt when none were given.
std::optional<pg::CriticalRule> rule_from_flags(const RuleOptions& o) {
    if (o.opts[0]->count()) return pg::rule::Fixed{o.critical};
    if (o.opts[1]->count()) return pg::rule::Quantile{o.quantile};
    if (o.opts[2]->count()) return pg::rule::TukeyFence{o.fence};
    if (o.opts[3]->count()) {
        auto [lo, hi] = parse_pair(o.signed_bounds, "--signed-bounds");
        return pg::rule::SignedFixed{lo, hi};
    }
    if (o.opts[4]->count()) {
        auto [lo, hi] = parse_pair(o.signed_quantile, "--signed-quantile");
        return pg::rule::SignedQuantile{lo, hi};
    }
    if (o.opts[5]->count()) return pg::rule::SignedFence{o.signed_fence};
    return std::nullopt;
}

std::string slurp(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw pg::DataError(fmt::format("cannot open '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (path != "-") {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw pg::DataError(fmt::format("cannot write '{}'", path));
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    void finish() {
        stream().flush();
        if (!stream()) throw pg::DataError("write failed");
    }

private:
    std::ofstream file_;
};

void log(const std::string& msg) { std::cerr << "panelguard: " << msg << '\n'; }

pg::Panel load(const InputOptions& o, const std::string& text) {
    pg::ColumnBindings bindings;
    bindings.id = o.id_col;
    bindings.base = o.base_col;
    bindings.value = o.value_col;
    if (!o.time_col.empty()) {
        bindings.time = pg::TimeBinding{o.time_col, std::nullopt};
        if (o.time_spacing != 0.0) bindings.time->label_spacing = o.time_spacing;
    } else if (o.time_spacing != 0.0) {
        throw pg::UsageError("--time-spacing needs --time-col");
    }
    std::istringstream in(text);
    pg::Panel panel = pg::load_panel(in, bindings, pg::PreprocessPolicy::parse(o.zero_policy));
    const auto& rep = panel.report;
    log(fmt::format("read {} rows, {} units, {} observations", rep.rows_read, panel.records.size(),
                    panel.observation_count()));
    if (rep.recoded) log(fmt::format("recoded {} zero cells to {}", rep.recoded, *rep.recode_value));
    if (rep.omitted) {
        log(fmt::format("omitted {} zero cells ({} units dropped)", rep.omitted, rep.records_dropped));
    }
    if (panel.records.empty()) throw pg::DataError("no usable records after preprocessing");
    return panel;
}

void log_tuning_hints(const pg::Panel& panel, const LossOptions& loss) {
    auto [lo, hi] = panel.value_range();
    std::string start_q = hi > lo ? fmt::format("{:.4f}", pg::bryan_initial_q(hi - lo)) : "n/a";
    log(fmt::format("q={}{}; range-based starting q={} (advisory, not scale-invariant); try steps of 0.1", loss.q,
                    loss.q_opt->count() ? "" : " (default)", start_q));
    if (auto w = pg::q_regime_warning(loss.q)) log("warning: " + *w);
}

pg::ScoredSet score(const pg::Panel& panel, const LossOptions& loss) {
    log_tuning_hints(panel, loss);
    pg::ScoreOptions options;
    options.params = {loss.p, loss.q};
    options.time_invariant = loss.time_invariant;
    if (loss.time_invariant) {
        auto scale = pg::TimeScale::from_panel(panel);
        if (scale.rescaled()) log("elapsed times rescaled so the latest is t=1");
    }
    return pg::score_panel(panel, options);
}

void write_summary(std::ostream& out, const pg::FlagSummary& s) {
    out << "rule=" << s.rule << '\n';
    for (const auto& th : s.thresholds) {
        out << "threshold";
        if (th.t) out << "[t=" << pg::csv::format_number(*th.t) << ']';
        out << '=';
        if (th.thresholds.lower) out << pg::csv::format_number(*th.thresholds.lower) << ',';
        out << pg::csv::format_number(th.thresholds.upper) << '\n';
    }
    out << "flagged=" << s.flagged << '\n' << "total=" << s.total << '\n';
}

int run_score(const InputOptions& in, const LossOptions& loss) {
    if (loss.signed_opt->count()) throw pg::UsageError("--signed only applies to flag rules");
    auto panel = load(in, slurp(in.input));
    auto scored = score(panel, loss);
    Output out(in.output);
    pg::write_scored_csv(out.stream(), scored, false);
    out.finish();
    return kOk;
}

int run_flag(const InputOptions& in, const LossOptions& loss, const RuleOptions& rules,
             const std::string& summary_path) {
    if (rules.given() != 1) {
        throw pg::UsageError("flag needs exactly one of --critical, --quantile, --fence, --signed-bounds, "
                             "--signed-quantile, --signed-fence, --rule");
    }
    const std::string text = slurp(in.input);
    const bool scored_input = pg::is_scored_header(pg::csv::read_string(text).header);

    std::optional<pg::CriticalRule> rule = rule_from_flags(rules);
    LossOptions effective = loss;
    std::optional<pg::RuleFile> file;
    if (!rules.rule_file.empty()) {
        if (loss.any_given()) throw pg::UsageError("--rule carries its own q, p and mode; drop the loss flags");
        std::istringstream rs(slurp(rules.rule_file));
        file = pg::read_rule_file(rs);
        if (!file->rule) throw pg::UsageError("rule file has no critical rule");
        rule = file->rule;
        effective.q = file->params.q;
        effective.p = file->params.p;
        effective.time_invariant = file->time_invariant;
        effective.signed_mode = file->signed_scores;
    } else if (pg::is_signed(*rule) != loss.signed_mode) {
        throw pg::UsageError(loss.signed_mode ? "--signed needs --signed-bounds, --signed-quantile or --signed-fence"
                                              : "signed rules need --signed");
    }
    const auto grouping = rules.per_slice ? pg::Grouping::PerSlice : pg::Grouping::Pooled;

    pg::ScoredSet scored;
    pg::FlagSummary summary;
    if (file && file->kind == pg::RuleFile::Kind::Reference) {
        if (scored_input) throw pg::UsageError("reference rules need raw input (R = base, D = value)");
        auto panel = load(in, text);
        scored = pg::score_reference(panel, file->reference_b);
        summary = pg::apply_reference_rule(scored, std::get<pg::rule::Fixed>(*rule).critical);
    } else {
        if (scored_input) {
            if (loss.any_given()) throw pg::UsageError("input is already scored; loss flags do not apply");
            std::istringstream is(text);
            scored = pg::read_scored_csv(is, in.id_col);
        } else {
            auto panel = load(in, text);
            scored = score(panel, effective);
        }
        summary = pg::apply_rule(scored, *rule, grouping);
    }

    std::ostringstream report;
    write_summary(report, summary);
    std::cerr << report.str();
    if (!summary_path.empty()) {
        Output s(summary_path);
        s.stream() << report.str();
        s.finish();
    }
    Output out(in.output);
    pg::write_scored_csv(out.stream(), scored, true);
    out.finish();
    return kOk;
}

int run_fit(const std::string& input, const std::string& output, const std::string& mode,
            const std::vector<std::string>& excludes, bool endpoint, const std::string& round_b) {
    std::istringstream in(slurp(input));
    pg::FitResult fit;
    std::vector<pg::Violation> violations;
    if (mode == "size-class") {
        if (endpoint || !round_b.empty()) throw pg::UsageError("--endpoint/--round-b apply to --mode reference");
        auto table = pg::read_size_class_table(in);
        violations = pg::validate_size_class_table(table);
        fit = pg::fit_size_class_table(table, pg::resolve_exclusions(table, excludes));
    } else if (mode == "reference") {
        if (!excludes.empty()) throw pg::UsageError("--exclude applies to --mode size-class");
        if (!round_b.empty() && !endpoint) throw pg::UsageError("--round-b needs --endpoint");
        auto table = pg::read_reference_table(in);
        std::optional<double> b;
        if (!round_b.empty()) b = pg::parse_fraction(round_b);
        fit = endpoint ? pg::endpoint_criticality(table, b) : pg::fit_reference_table(table);
    } else {
        throw pg::UsageError(fmt::format("unknown --mode '{}' (size-class or reference)", mode));
    }

    for (const auto& v : violations) {
        std::string rows;
        for (auto r : v.rows) rows += (rows.empty() ? "" : ",") + std::to_string(r + 1);
        log(fmt::format("violation {} rows {}: {}", pg::to_string(v.code), rows, v.detail));
    }
    for (const auto& e : fit.excluded) log(fmt::format("row {} excluded: {}", e.row + 1, e.reason));
    if (fit.kind == pg::CriteriaKind::SizeClass) {
        log(fmt::format("criticality: eps * B^{:.6g} > {:.6g}  (K={:.7g}, R^2={:.4f})", fit.exponent, fit.critical,
                        fit.intercept, fit.r_squared));
    } else {
        log(fmt::format("criticality: D * R^{:.6g} >= {:.7g}  (a={:.7g}, R^2={:.4f})", -fit.exponent, fit.critical,
                        fit.intercept, fit.r_squared));
        for (const auto& m : fit.misses) {
            log(fmt::format("row {} (R={}, D={}) falls below C: D*R^-b = {:.4f}", m.row + 1, m.r, m.d, m.index));
        }
    }

    pg::RuleFile file = pg::rule_file_from_fit(fit);
    if (!violations.empty()) {
        std::string v;
        for (const auto& x : violations) {
            if (!v.empty()) v += ';';
            v += pg::to_string(x.code);
            for (std::size_t i = 0; i < x.rows.size(); ++i) v += (i ? "," : ":") + std::to_string(x.rows[i] + 1);
        }
        file.diagnostics.emplace_back("violations", v);
    }
    Output out(output);
    pg::write_rule_file(out.stream(), file);
    out.finish();
    return kOk;
}

struct CompareOptions {
    std::string input = "-";
    std::string output = "-";
    std::string id_col = "id";
    std::string b_col = "b_value";
    std::string f_col = "f_value";
    std::string zero_policy = "auto";
    double q = -0.5;
    std::size_t simulate = 0;
    double sigma2 = 1.0;
    double rho = 0.0;
    double a_min = 1e2;
    double a_max = 1e6;
    std::uint64_t seed = 1;
};

int run_compare(const CompareOptions& o, const RuleOptions& rules) {
    if (rules.given() > 1) throw pg::UsageError("give at most one critical rule");
    if (!rules.rule_file.empty()) throw pg::UsageError("compare takes explicit rule flags, not --rule");
    std::vector<pg::NominalPair> pairs;
    if (o.simulate > 0) {
        if (!(o.a_min > 0.0) || !(o.a_max >= o.a_min)) throw pg::UsageError("need 0 < --a-min <= --a-max");
        pg::NominalComparisonModel model;
        model.sigma2 = o.sigma2;
        model.rho = o.rho;
        // Log-uniform true values, evenly spaced so the fixture is seed-free.
        for (std::size_t i = 0; i < o.simulate; ++i) {
            const double u = o.simulate == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(o.simulate - 1);
            model.true_values.push_back(o.a_min * std::pow(o.a_max / o.a_min, u));
        }
        pairs = pg::simulate_nominal(model, o.seed);
    } else {
        std::istringstream in(slurp(o.input));
        pairs = pg::load_nominal_pairs(in, pg::PreprocessPolicy::parse(o.zero_policy), o.id_col, o.b_col, o.f_col);
    }
    if (auto w = pg::q_regime_warning(o.q)) log("warning: " + *w);
    auto cmp = pg::compare_sets(pairs, o.q);

    std::optional<pg::ComparisonFlags> flags;
    if (auto rule = rule_from_flags(rules)) {
        flags = pg::flag_comparison(cmp, *rule);
        log(fmt::format("rule: {}", pg::describe(*rule)));
    }
    Output out(o.output);
    pg::write_comparison_csv(out.stream(), cmp, flags ? &*flags : nullptr);
    out.finish();
    return kOk;
}

int run_breaks(const InputOptions& in, const LossOptions& loss, std::size_t k) {
    const std::string text = slurp(in.input);
    pg::ScoredSet scored;
    if (pg::is_scored_header(pg::csv::read_string(text).header)) {
        if (loss.any_given()) throw pg::UsageError("input is already scored; loss flags do not apply");
        std::istringstream is(text);
        scored = pg::read_scored_csv(is, in.id_col);
    } else {
        scored = score(load(in, text), loss);
    }
    auto breaks = pg::quantile_classes(scored.losses(), k);
    if (breaks.degenerate) log("warning: all losses are equal; every record falls in class 1");
    std::string b;
    for (double x : breaks.breaks) b += (b.empty() ? "" : ", ") + pg::csv::format_number(x);
    log(fmt::format("{} classes, breaks at {}", k, b));
    Output out(in.output);
    pg::write_breaks_csv(out.stream(), scored, breaks);
    out.finish();
    return kOk;
}

int run_serve(const InputOptions& in, const std::string& listen) {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw pg::UsageError("--listen expects host:port");
    const std::string host = listen.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
        throw pg::UsageError(fmt::format("bad port in '{}'", listen));
    }
    auto workbench = std::make_shared<const pg::Workbench>(load(in, slurp(in.input)));
    pg::ApiServer server(workbench);
    const int bound = server.bind(host, port);
    log(fmt::format("serving {} observations on http://{}:{}", workbench->panel().observation_count(), host, bound));
    server.listen();
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Loss-function outlier detection for panel data"};
    app.require_subcommand(1);

    InputOptions score_in;
    LossOptions score_loss;
    auto* score_cmd = app.add_subcommand("score", "Score every observation and rank by loss");
    add_input_options(score_cmd, score_in);
    add_loss_options(score_cmd, score_loss);

    InputOptions flag_in;
    LossOptions flag_loss;
    RuleOptions flag_rules;
    std::string summary_path;
    auto* flag_cmd = app.add_subcommand("flag", "Score (or read scores) and flag outliers");
    add_input_options(flag_cmd, flag_in);
    add_loss_options(flag_cmd, flag_loss);
    add_rule_options(flag_cmd, flag_rules);
    flag_cmd->add_flag("--per-slice", flag_rules.per_slice, "Derive data-driven thresholds per time slice");
    flag_cmd->add_option("--summary", summary_path, "Also write the flag summary to this file");

    std::string fit_input = "-";
    std::string fit_output = "-";
    std::string fit_mode = "size-class";
    std::vector<std::string> fit_excludes;
    bool fit_endpoint = false;
    std::string fit_round_b;
    auto* fit_cmd = app.add_subcommand("fit", "Compile a criteria table into a criticality equation");
    fit_cmd->add_option("input", fit_input, "Criteria-table CSV");
    fit_cmd->add_option("-o,--output,--rule-out", fit_output, "Rule file path ('-' for stdout)");
    fit_cmd->add_option("--mode", fit_mode, "size-class | reference");
    fit_cmd->add_option("--exclude", fit_excludes, "Exclude rows: row=N or ratio=X (repeatable)");
    fit_cmd->add_flag("--endpoint", fit_endpoint, "Line through the end classes instead of OLS");
    fit_cmd->add_option("--round-b", fit_round_b, "Replace b (e.g. -1/3) and anchor C at the max-D class");

    CompareOptions cmp;
    RuleOptions cmp_rules;
    auto* cmp_cmd = app.add_subcommand("compare", "Compare two estimate sets in both directions");
    cmp_cmd->add_option("input", cmp.input, "CSV with id, b_value, f_value");
    cmp_cmd->add_option("-o,--output", cmp.output, "Output path ('-' for stdout)");
    cmp_cmd->add_option("--id-col", cmp.id_col);
    cmp_cmd->add_option("--b-col", cmp.b_col);
    cmp_cmd->add_option("--f-col", cmp.f_col);
    cmp_cmd->add_option("--zero-policy", cmp.zero_policy, "Zero handling: omit | auto | value=X");
    cmp_cmd->add_option("--q", cmp.q, "Base exponent (default -0.5)");
    add_rule_options(cmp_cmd, cmp_rules);
    cmp_cmd->add_option("--simulate", cmp.simulate, "Generate N synthetic pairs instead of reading input");
    cmp_cmd->add_option("--sigma2", cmp.sigma2, "Simulation: variance scale");
    cmp_cmd->add_option("--rho", cmp.rho, "Simulation: correlation between the two sets");
    cmp_cmd->add_option("--a-min", cmp.a_min, "Simulation: smallest true value");
    cmp_cmd->add_option("--a-max", cmp.a_max, "Simulation: largest true value");
    cmp_cmd->add_option("--seed", cmp.seed, "Simulation: RNG seed");

    InputOptions breaks_in;
    LossOptions breaks_loss;
    std::size_t breaks_k = 5;
    auto* breaks_cmd = app.add_subcommand("breaks", "Assign quantile classes over the losses");
    add_input_options(breaks_cmd, breaks_in);
    add_loss_options(breaks_cmd, breaks_loss);
    breaks_cmd->add_option("-k,--classes", breaks_k, "Number of classes (>= 2)");

    InputOptions serve_in;
    std::string listen = "127.0.0.1:8080";
    auto* serve_cmd = app.add_subcommand("serve", "Serve the tuning API over a dataset");
    add_input_options(serve_cmd, serve_in);
    serve_cmd->add_option("--listen", listen, "host:port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*score_cmd) return run_score(score_in, score_loss);
        if (*flag_cmd) return run_flag(flag_in, flag_loss, flag_rules, summary_path);
        if (*fit_cmd) return run_fit(fit_input, fit_output, fit_mode, fit_excludes, fit_endpoint, fit_round_b);
        if (*cmp_cmd) return run_compare(cmp, cmp_rules);
        if (*breaks_cmd) return run_breaks(breaks_in, breaks_loss, breaks_k);
        if (*serve_cmd) return run_serve(serve_in, listen);
    } catch (const pg::UsageError& e) {
        log(fmt::format("error: {}", e.what()));
        return kUsage;
    } catch (const pg::FitError& e) {
        log(fmt::format("fit error: {}", e.what()));
        return kFit;
    } catch (const pg::Error& e) {
        log(fmt::format("error: {}", e.what()));
        return kData;
    }
    return kUsage;
}
