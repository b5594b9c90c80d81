#pragma once

#include "lifestyle/hjb_solver.hpp"
#include "lifestyle/market_model.hpp"
#include "lifestyle/welfare_evaluator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lifestyle {

inline constexpr int kConfigSchemaVersion = 1;

/// Parameter lists whose Cartesian product defines a robustness sweep.
struct SweepGrid {
    std::vector<double> mu1{0.015, 0.02, 0.03};
    std::vector<double> mu2{0.07, 0.10, 0.13};
    std::vector<double> sigma1{0.03, 0.05, 0.07};
    std::vector<double> sigma2{0.20, 0.25, 0.30};
    std::vector<double> correlation{-0.20, -0.05, 0.05, 0.20};
    std::vector<double> gammas{1.0, 2.0, 5.0, 8.0};
    double rate = 0.01;
    double horizon = 40.0;
    double total_contribution = 1.0;

    /// The full 3x3x3x3x4 product: 324 markets, each solved for every γ.
    static SweepGrid full();
    /// μ₁ x σ₁ (3 x 3) with μ₂ = 10%, σ₂ = 25%, correlation -20%, γ ∈ {1, 2, 5, 8}.
    static SweepGrid desk();

    std::size_t market_count() const;
    std::size_t cell_count() const { return market_count() * gammas.size(); }
    /// Throws ConfigError for empty parameter lists, non-positive values or
    /// markets rejected by validate_market.
    void validate() const;
};

/// Everything a CLI command or service request may configure.
struct Config {
    MarketParams market = MarketParams::paper_baseline();
    ContributionSchedule schedule = ContributionSchedule::uniform(40.0);
    std::string grid_preset = "desk";
    GridSpec grid = GridSpec::desk();
    double gamma = 2.0;
    double x0 = 0.0;
    MonteCarloOptions mc;
    std::optional<SweepGrid> sweep;
};

/// "paper-baseline"; throws ConfigError for other names.
MarketParams market_preset(const std::string& name);
/// "desk" or "paper"; throws ConfigError for other names.
GridSpec grid_preset(const std::string& name, double horizon);

/// Market object: {"preset": name} or {"rate", "drifts", and either
/// "covariance" or "volatilities" + "correlation"}.
MarketParams market_from_json(const nlohmann::json& j);
nlohmann::json market_to_json(const MarketParams& m);
/// {"horizon", "total"} for a uniform schedule or {"breakpoints", "rates"}.
ContributionSchedule schedule_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const ContributionSchedule& s);
/// {"preset", ...overrides}; `horizon` sets t_max.
GridSpec grid_from_json(const nlohmann::json& j, double horizon, std::string* preset_out = nullptr);
nlohmann::json grid_to_json(const GridSpec& g, const std::string& preset);
SweepGrid sweep_from_json(const nlohmann::json& j);
nlohmann::json sweep_to_json(const SweepGrid& s);

/// Parses a full config document. Requires "schema_version" == 1; unknown
/// keys are rejected so typos do not pass silently. Throws ConfigError.
Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& c);
/// Reads and parses a JSON file; ConfigError on I/O or syntax errors.
Config load_config(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// Hex FNV-1a of the compact JSON dump (keys sorted).
std::string config_hash(const nlohmann::json& j);

/// Project version baked in at build time.
std::string_view library_version();

}  // namespace lifestyle
