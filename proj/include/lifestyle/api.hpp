#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>

namespace lifestyle::api {

/// A request failure with the HTTP status it maps to: 400 validation,
/// 404 unknown preset, 409 missing surface, 500 internal.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {}

    int status() const noexcept { return status_; }
    const std::string& code() const noexcept { return code_; }

private:
    int status_;
    std::string code_;
};

/// Rounds to 12 significant digits, the precision of every number in a response.
double round12(double x);

/// Allocation for one strategy.
///
/// Request: {"gamma", "strategy" ∈ pi0..pi3 | optimal, "market"?, "schedule"?,
/// "grid"?, and either "alpha" or "time" + "wealth"}. pi2/pi3 need α (given or
/// W/(W + PV_t)); optimal needs (t, W) and a cached surface.
///
/// Response: {"strategy", "gamma", "alpha", "weights", "budget",
/// "effective_risk_aversion", "binding"}.
nlohmann::json allocate(const nlohmann::json& request, const std::string& cache_dir);

/// π⁽³⁾ (or another heuristic) over an α grid plus the glide-path thresholds.
/// Request: {"gamma", "strategy"? = "pi3", "market"?, "alphas"? = 0, 0.01, ..., 1}.
/// Response: {"gamma", "strategy", "points": [allocation...], "thresholds":
/// {"budget", "full_stock", "budget_rho", "full_stock_rho"}}.
nlohmann::json glidepath(const nlohmann::json& request);

/// Welfare rows. Request: {"gamma", "strategies", "method"? = "pde",
/// "market"?, "schedule"?, "grid"?, "x0"?, "monte_carlo"?}. "optimal" needs a
/// cached surface (409 otherwise). Monte Carlo is limited to 200000 paths per
/// request. Response: {"rows": [{gamma, strategy, ce, irr, method, stderr}]}.
nlohmann::json compare(const nlohmann::json& request, const std::string& cache_dir);

}  // namespace lifestyle::api
