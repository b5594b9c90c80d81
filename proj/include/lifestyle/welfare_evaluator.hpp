#pragma once

#include "lifestyle/cqp_allocator.hpp"
#include "lifestyle/hjb_solver.hpp"
#include "lifestyle/market_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lifestyle {

enum class StrategyKind { Pi0, Pi1, Pi2, Pi3, Optimal, FixedWeights };

std::string to_string(StrategyKind kind);
/// "pi0".."pi3", "optimal", "fixed". Throws InvalidArgument.
StrategyKind strategy_kind_from_string(const std::string& name);

/// A Markov investment rule (t, x) -> π, quoted as fractions of savings x.
struct StrategySpec {
    StrategyKind kind = StrategyKind::Pi3;
    double gamma = 2.0;
    Eigen::VectorXd fixed_weights;                       ///< FixedWeights only
    std::shared_ptr<const RiskAversionSurface> surface;  ///< Optimal only

    static StrategySpec heuristic(StrategyKind kind, double gamma);
    static StrategySpec fixed(Eigen::VectorXd weights, double gamma);
    static StrategySpec optimal(std::shared_ptr<const RiskAversionSurface> surface);

    std::string name() const { return to_string(kind); }
    /// Throws InvalidArgument / IncompatibleGrid / DimensionMismatch.
    void validate(const MarketParams& params) const;
};

/// Evaluates a StrategySpec at (t, x) for one market and schedule.
class StrategyPolicy {
public:
    StrategyPolicy(StrategySpec spec, const MarketParams& params, const ContributionSchedule& schedule);

    /// Weights at (t, x); `pv` must equal PV_t (passed in to avoid recomputing).
    void weights(double t, double x, double pv, Eigen::VectorXd& out) const;

    struct Moments {
        double mean;      ///< π(μ - r1)
        double variance;  ///< πΣπᵀ
    };
    Moments moments(double t, double x, double pv) const;

    const StrategySpec& spec() const { return spec_; }
    /// True when the weights do not depend on (t, x).
    bool is_constant() const { return constant_.has_value(); }

private:
    StrategySpec spec_;
    MarketParams params_;
    std::shared_ptr<const CqpAllocator> cqp_;
    std::shared_ptr<const UnitBudgetCurve> curve_;
    Eigen::VectorXd pi1_;
    std::optional<Eigen::VectorXd> constant_;
};

/// Ψ(0, z) on a uniform z grid with v(0, e^z) = U_γ(e^{Ψ(0, z)}): the log of
/// the certainty-equivalent terminal wealth when starting from savings e^z.
class ValueCurve {
public:
    ValueCurve(double z_min, double dz, std::vector<double> log_ce, double gamma);

    double gamma() const { return gamma_; }
    double z_min() const { return z_min_; }
    double dz() const { return dz_; }
    const std::vector<double>& log_ce() const { return psi_; }

    /// Ψ(0, ln x) by linear interpolation; OutOfDomain outside the grid.
    double log_certainty(double x) const;
    /// v(0, x).
    double value(double x) const;
    /// CE = e^{Ψ(0, ln x)} for x > 0. For x = 0: regress v(0, x) on x over
    /// e^{-10..-5}, take the intercept, invert U_γ.
    double certainty_equivalent(double x) const;

private:
    double z_min_;
    double dz_;
    std::vector<double> psi_;
    double gamma_;
};

/// Solves u_t + (y e^{-z} + r + m - v/2) u_z + ½ v u_zz = 0, u(T,z) = U_γ(e^z),
/// with m, v the mean and variance of π⁽ⁱ⁾(t, e^z), written for Ψ:
///
///     Ψ_τ = BΨ_z + ½v(Ψ_zz + (1 - γ)Ψ_z²),   τ = T - t.
///
/// Implicit in time on the grid's time nodes (BDF2 or Euler), Newton per step.
/// Central differences where |B + v(1 - γ)Ψ_z|·dz ≤ v, upwinding by its sign
/// elsewhere. Throws
/// DiffusionDegenerate when v < 1e-10 at some node.
ValueCurve value_pde(const StrategySpec& strategy, const MarketParams& params, const ContributionSchedule& schedule,
                     const GridSpec& grid);

/// U_γ⁻¹; throws SignMismatch for utilities outside the range of U_γ.
double certainty_equivalent(double expected_utility, double gamma);

/// ρ with ∫₀ᵀ e^{ρ(T-t)} y(t) dt = CE by bisection on `lo..hi` (tolerance
/// 1e-10); the bracket is widened once to [2lo, 2hi] before BracketFailure.
double irr(double ce, const ContributionSchedule& schedule, double lo = -0.5, double hi = 0.5);

/// e^{rT}x0 + ∫₀ᵀ e^{r(T-s)} y(s) ds, the terminal wealth of the riskless strategy.
double riskless_terminal_wealth(double x0, const ContributionSchedule& schedule, double r);

struct MonteCarloOptions {
    long n_paths = 1'000'000;
    double dt = 1.0 / 250.0;
    std::uint64_t seed = 20240601;
    int threads = 0;  ///< 0: hardware concurrency
};

struct MonteCarloResult {
    double ce = 0.0;
    double stderr_ce = 0.0;
    double mean_utility = 0.0;
    double stderr_utility = 0.0;
    long n_paths = 0;
    /// Terminal utilities per path (kept for paired comparisons).
    std::vector<double> utilities;
};

/// Simulates dW = (rW + y)dt + πW(dS/S - r dt) from W_0 = x0. Each step holds
/// π fixed and applies the exact lognormal factor G; contributions paid during
/// the step grow at the step's log-rate, adding y·h·(G - 1)/ln G, which is exact
/// for the riskless strategy. Path p draws its normals
/// from a generator seeded by (seed, p) only, so results do not depend on
/// thread count and strategies share random numbers. The mean utility is a
/// pairwise sum; stderr of CE by the delta method.
MonteCarloResult monte_carlo_ce(const StrategySpec& strategy, const MarketParams& params,
                                const ContributionSchedule& schedule, double x0, const MonteCarloOptions& options);

/// Relative CE gap (CE_a - CE_b)/CE_a from two runs sharing random numbers,
/// with its delta-method stderr under common random numbers and under the
/// independence assumption.
struct GapEstimate {
    double gap = 0.0;
    double stderr_common = 0.0;
    double stderr_independent = 0.0;
};
GapEstimate relative_gap(const MonteCarloResult& a, const MonteCarloResult& b, double gamma);

enum class WelfareMethod { Pde, MonteCarlo, Both };
std::string to_string(WelfareMethod method);
WelfareMethod welfare_method_from_string(const std::string& name);

struct WelfareRow {
    double gamma = 0.0;
    std::string strategy;
    double ce = 0.0;
    double irr = 0.0;
    std::string method;  ///< "pde", "mc", "characteristics" or "exact"
    double stderr_ce = 0.0;  ///< 0 for deterministic methods
    double runtime_s = 0.0;
};

struct WelfareReport {
    std::vector<WelfareRow> rows;
    /// First row for `strategy` computed by `method`; throws InvalidArgument.
    const WelfareRow& find(const std::string& strategy, const std::string& method) const;
};

struct WelfareOptions {
    GridSpec grid = GridSpec::desk();
    double x0 = 0.0;
    MonteCarloOptions mc;
};

/// One row per strategy and method. The optimal strategy evaluated by the
/// PDE method is reported twice: through the heuristic PDE with π* plugged in
/// ("pde") and through its characteristic ("characteristics").
WelfareReport compare_strategies(const std::vector<StrategySpec>& strategies, const MarketParams& params,
                                 const ContributionSchedule& schedule, WelfareMethod method,
                                 const WelfareOptions& options);

/// Columns: gamma,strategy,ce,irr,method,stderr,runtime_s.
void write_welfare_csv(std::ostream& os, const WelfareReport& report, bool include_runtime = true);

}  // namespace lifestyle
