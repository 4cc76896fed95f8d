#ifndef PANELGUARD_SERVE_HPP
#define PANELGUARD_SERVE_HPP

#include <memory>
#include <string>

#include "json.hpp"
#include "panelguard/criteria_fit.hpp"
#include "panelguard/panel_io.hpp"

namespace panelguard {

/// FitResult as served by /api/fit. Row numbers are 1-based.
nlohmann::json fit_result_json(const FitResult& fit);

/**
 * Request handlers for the tuning API over an immutable dataset.
 *
 *   GET  /api/meta   -> {n, columns, range, bryan_q, ...}
 *   POST /api/score  {q, p, signed, time_invariant, rule, grouping}
 *                    -> {thresholds, flagged, records: [...]}
 *   POST /api/fit    {mode, table, exclusions, endpoint, round_b} -> FitResult
 *
 * Every score request is a pure function of its parameters.
 */
class Workbench {
public:
    explicit Workbench(Panel panel);

    nlohmann::json meta() const;
    nlohmann::json score(const nlohmann::json& request) const;
    static nlohmann::json fit(const nlohmann::json& request);

    const Panel& panel() const { return panel_; }

private:
    Panel panel_;
};

/// HTTP front end for a Workbench. Handlers run concurrently; the workbench
/// is shared read-only.
class ApiServer {
public:
    explicit ApiServer(std::shared_ptr<const Workbench> workbench);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds the socket; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace panelguard

#endif
