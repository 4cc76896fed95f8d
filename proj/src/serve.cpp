#include "panelguard/serve.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "httplib.h"
#include "panelguard/criteria_fit.hpp"
#include "panelguard/errors.hpp"
#include "panelguard/loss.hpp"
#include "panelguard/pipeline.hpp"

namespace panelguard {

using nlohmann::json;

namespace {

double number_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (!j[key].is_number()) throw UsageError(fmt::format("'{}' must be a number", key));
    return j[key].get<double>();
}

bool bool_or(const json& j, const char* key, bool fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (!j[key].is_boolean()) throw UsageError(fmt::format("'{}' must be a boolean", key));
    return j[key].get<bool>();
}

double required(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw UsageError(fmt::format("rule needs numeric '{}'", key));
    }
    return j[key].get<double>();
}

CriticalRule parse_rule(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw UsageError("rule must be an object with a 'type'");
    }
    const std::string type = j["type"];
    CriticalRule rule = rule::Fixed{1.0};
    if (type == "fixed") {
        rule = rule::Fixed{required(j, "critical")};
    } else if (type == "quantile") {
        rule = rule::Quantile{required(j, "alpha")};
    } else if (type == "fence") {
        rule = rule::TukeyFence{required(j, "k")};
    } else if (type == "signed_fixed") {
        rule = rule::SignedFixed{required(j, "lower"), required(j, "upper")};
    } else if (type == "signed_quantile") {
        rule = rule::SignedQuantile{required(j, "alpha_lower"), required(j, "alpha_upper")};
    } else if (type == "signed_fence") {
        rule = rule::SignedFence{required(j, "k")};
    } else {
        throw UsageError(fmt::format("unknown rule type '{}'", type));
    }
    validate(rule);
    return rule;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json thresholds_json(const FlagSummary& summary) {
    json out = json::array();
    for (const auto& s : summary.thresholds) {
        out.push_back({{"t", optional_number(s.t)},
                       {"lower", optional_number(s.thresholds.lower)},
                       {"upper", s.thresholds.upper}});
    }
    return out;
}

std::vector<SizeClassRow> size_class_rows(const json& table) {
    if (table.is_string()) {
        std::istringstream in(table.get<std::string>());
        return read_size_class_table(in);
    }
    if (!table.is_array()) throw UsageError("'table' must be an array of rows or CSV text");
    std::vector<SizeClassRow> rows;
    for (const auto& r : table) {
        SizeClassRow row;
        row.class_min = static_cast<std::int64_t>(required(r, "class_min"));
        if (r.contains("class_max") && !r["class_max"].is_null()) {
            row.class_max = static_cast<std::int64_t>(required(r, "class_max"));
        }
        row.ratio = required(r, "ratio");
        if (r.contains("b_mid") && !r["b_mid"].is_null()) row.base_mid = required(r, "b_mid");
        if (r.contains("eps_mid") && !r["eps_mid"].is_null()) row.eps_mid = required(r, "eps_mid");
        rows.push_back(row);
    }
    return rows;
}

std::vector<ReferenceCriteriaRow> reference_rows(const json& table) {
    if (table.is_string()) {
        std::istringstream in(table.get<std::string>());
        return read_reference_table(in);
    }
    if (!table.is_array()) throw UsageError("'table' must be an array of rows or CSV text");
    std::vector<ReferenceCriteriaRow> rows;
    for (const auto& r : table) {
        ReferenceCriteriaRow row;
        row.r_min = required(r, "r_min");
        if (r.contains("r_max") && !r["r_max"].is_null()) row.r_max = required(r, "r_max");
        row.d_value = required(r, "d_value");
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

json fit_result_json(const FitResult& fit) {
    json excluded = json::array();
    for (const auto& e : fit.excluded) excluded.push_back({{"row", e.row + 1}, {"reason", e.reason}});
    json misses = json::array();
    for (const auto& m : fit.misses) {
        misses.push_back({{"row", m.row + 1}, {"r", m.r}, {"d", m.d}, {"index", m.index}});
    }
    json out = {{"kind", fit.kind == CriteriaKind::SizeClass ? "size-class" : "reference"},
                {"method", fit.method},
                {"slope", fit.slope},
                {"intercept", fit.intercept},
                {"exponent", fit.exponent},
                {"critical", fit.critical},
                {"points_used", fit.points_used},
                {"r_squared", fit.r_squared},
                {"max_abs_log_residual", fit.max_abs_log_residual},
                {"excluded", excluded},
                {"misses", misses}};
    out[fit.kind == CriteriaKind::SizeClass ? "q" : "b"] = fit.exponent;
    return out;
}

Workbench::Workbench(Panel panel) : panel_(std::move(panel)) {
    if (panel_.records.empty()) throw DataError("dataset has no usable records");
}

json Workbench::meta() const {
    auto [lo, hi] = panel_.value_range();
    const double range = hi - lo;
    return {{"n", panel_.observation_count()},
            {"units", panel_.records.size()},
            {"columns", panel_.columns},
            {"attribute_columns", panel_.attribute_columns},
            {"has_time", panel_.has_time},
            {"min", lo},
            {"max", hi},
            {"range", range},
            {"bryan_q", range > 0.0 ? json(bryan_initial_q(range)) : json(nullptr)},
            {"q_default", -0.5},
            {"q_step", 0.1}};
}

json Workbench::score(const json& request) const {
    if (!request.is_object()) throw UsageError("request body must be a JSON object");
    ScoreOptions options;
    options.params.q = number_or(request, "q", -0.5);
    options.params.p = number_or(request, "p", 1.0);
    options.time_invariant = bool_or(request, "time_invariant", false);
    const bool signed_mode = bool_or(request, "signed", false);

    std::optional<CriticalRule> rule;
    if (request.contains("rule") && !request["rule"].is_null()) rule = parse_rule(request["rule"]);
    if (rule && is_signed(*rule) != signed_mode) {
        throw UsageError(signed_mode ? "signed mode needs a signed rule" : "signed rule requires signed=true");
    }
    Grouping grouping = Grouping::Pooled;
    if (request.contains("grouping")) {
        const auto& g = request["grouping"];
        if (g == "per_slice") {
            grouping = Grouping::PerSlice;
        } else if (g != "pooled") {
            throw UsageError("grouping must be 'pooled' or 'per_slice'");
        }
    }

    ScoredSet scored = score_panel(panel_, options);
    json out = {{"q", options.params.q},
                {"p", options.params.p},
                {"signed", signed_mode},
                {"time_invariant", options.time_invariant},
                {"n", scored.records.size()}};
    auto warning = q_regime_warning(options.params.q);
    out["warning"] = warning ? json(*warning) : json(nullptr);
    if (rule) {
        FlagSummary summary = apply_rule(scored, *rule, grouping);
        out["rule"] = summary.rule;
        out["thresholds"] = thresholds_json(summary);
        out["flagged"] = summary.flagged;
    } else {
        out["rule"] = nullptr;
        out["thresholds"] = json::array();
        out["flagged"] = 0;
    }
    json records = json::array();
    for (const auto& r : scored.records) {
        records.push_back({{"id", r.id},
                           {"base", r.base},
                           {"value", r.value},
                           {"t", optional_number(r.t)},
                           {"loss", r.loss},
                           {"signed_loss", r.signed_loss},
                           {"rank", r.rank},
                           {"flagged", r.flagged}});
    }
    out["records"] = std::move(records);
    return out;
}

json Workbench::fit(const json& request) {
    if (!request.is_object()) throw UsageError("request body must be a JSON object");
    const std::string mode = request.value("mode", "size-class");
    if (!request.contains("table")) throw UsageError("fit request needs a 'table'");
    if (mode == "size-class") {
        auto rows = size_class_rows(request["table"]);
        std::vector<std::string> selectors;
        if (request.contains("exclusions")) {
            for (const auto& e : request["exclusions"]) {
                if (e.is_number_integer()) {
                    selectors.push_back(fmt::format("row={}", e.get<long long>()));
                } else if (e.is_string()) {
                    selectors.push_back(e.get<std::string>());
                } else {
                    throw UsageError("exclusions must be row numbers or selector strings");
                }
            }
        }
        FitResult fit = fit_size_class_table(rows, resolve_exclusions(rows, selectors));
        json out = fit_result_json(fit);
        json violations = json::array();
        for (const auto& v : validate_size_class_table(rows)) {
            json rows_json = json::array();
            for (auto r : v.rows) rows_json.push_back(r + 1);
            violations.push_back({{"code", to_string(v.code)}, {"rows", rows_json}, {"detail", v.detail}});
        }
        out["violations"] = violations;
        return out;
    }
    if (mode == "reference") {
        auto rows = reference_rows(request["table"]);
        std::optional<double> round_b;
        if (request.contains("round_b") && !request["round_b"].is_null()) {
            const auto& rb = request["round_b"];
            round_b = rb.is_string() ? parse_fraction(rb.get<std::string>()) : rb.get<double>();
        }
        const bool endpoint = bool_or(request, "endpoint", false);
        if (round_b && !endpoint) throw UsageError("round_b applies to the endpoint method only");
        return fit_result_json(endpoint ? endpoint_criticality(rows, round_b) : fit_reference_table(rows));
    }
    throw UsageError(fmt::format("unknown fit mode '{}'", mode));
}

struct ApiServer::Impl {
    std::shared_ptr<const Workbench> workbench;
    httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body.dump(), "application/json");
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        reply(res, 200, fn());
    } catch (const json::exception& e) {
        reply(res, 400, {{"error", fmt::format("bad JSON: {}", e.what())}});
    } catch (const Error& e) {
        reply(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
    }
}

}  // namespace

ApiServer::ApiServer(std::shared_ptr<const Workbench> workbench) : impl_(std::make_unique<Impl>()) {
    impl_->workbench = std::move(workbench);
    auto* wb = impl_->workbench.get();
    auto& srv = impl_->server;
    srv.Get("/api/meta", [wb](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { return wb->meta(); });
    });
    srv.Post("/api/score", [wb](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { return wb->score(json::parse(req.body)); });
    });
    srv.Post("/api/fit", [](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { return Workbench::fit(json::parse(req.body)); });
    });
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error(fmt::format("cannot bind {}", host));
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) throw Error(fmt::format("cannot bind {}:{}", host, port));
    return port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace panelguard
