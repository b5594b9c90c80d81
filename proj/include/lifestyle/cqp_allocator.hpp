#pragma once

#include "lifestyle/market_model.hpp"

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

namespace lifestyle {

/// Risky weights π (fractions of the wealth they are quoted against) together
/// with the budget bound α of the constraint set {π >= 0, π·1 <= α}.
struct Allocation {
    Eigen::VectorXd weights;
    double budget_bound = 1.0;

    double total() const { return weights.sum(); }
};

/// Binding constraints at a CQP optimum: π_i = 0 for i in `at_zero`, and
/// π·1 = α when `budget_full`.
struct ActiveSet {
    std::vector<int> at_zero;
    bool budget_full = false;

    std::vector<std::string> labels() const;
    std::size_t size() const { return at_zero.size() + (budget_full ? 1 : 0); }
};

struct CqpSolution {
    Allocation allocation;
    ActiveSet active;
    /// Multipliers of π_i >= 0, indexed by asset (0 for inactive constraints).
    Eigen::VectorXd zero_multipliers;
    /// Multiplier of π·1 <= α (0 when slack).
    double budget_multiplier = 0.0;
    /// max |e - ρΣπ + Σ ν_i e_i - λ1| over all coordinates.
    double kkt_residual = 0.0;
};

/// Solver for the deterministic constrained mean-variance program
///
///     π̂(α, ρ) = argmax_{π >= 0, π·1 <= α}  π(μ - r1) - (ρ/2) πΣπᵀ
///
/// by enumeration of active sets. For each candidate set of binding
/// constraints A₂π = b₂ the equality-constrained optimum is
///
///     π = A₁⁻¹b₁ + Σ⁻¹A₂ᵀ (A₂Σ⁻¹A₂ᵀ)⁻¹ (b₂ - A₂A₁⁻¹b₁),   A₁ = Lᵀ, Σ = LLᵀ,
///
/// which is affine in (1/ρ, α); the affine coefficients and those of the
/// Lagrange multipliers are tabulated once per market so that a solve costs
/// O(2^{d+1} d) flops. The unique candidate that is primal and dual feasible
/// is returned; among numerically tied candidates the smallest active set wins.
class CqpAllocator {
public:
    explicit CqpAllocator(const MarketParams& params);

    const MarketParams& params() const { return params_; }
    int dimension() const { return d_; }

    /// (μ - r1)ᵀΣ⁻¹, the unit-risk-aversion Merton weights.
    const Eigen::VectorXd& unconstrained_weights() const { return pihat_; }
    /// 1ᵀΣ⁻¹ / 1ᵀΣ⁻¹1.
    const Eigen::VectorXd& min_variance_portfolio() const { return zeta_; }

    /// rho may be +infinity (returns the zero allocation). Throws
    /// InfeasibleAlpha for alpha < 0 and InvalidArgument for rho <= 0.
    CqpSolution solve_detailed(double alpha, double rho) const;
    Allocation solve(double alpha, double rho) const { return solve_detailed(alpha, rho).allocation; }

    /// f(α, ρ): optimal mean-variance utility.
    double mv_value(double alpha, double rho) const;

    /// g(ρ) = f(1, ρ) and g'(ρ) = -½ π̂(1,ρ) Σ π̂(1,ρ)ᵀ evaluated together.
    struct GValue {
        double g;
        double g_prime;
        double mean;      ///< π(μ - r1)
        double variance;  ///< πΣπᵀ
    };
    GValue g_unit_budget(double rho) const;
    double g_prime(double rho) const { return g_unit_budget(rho).g_prime; }

    /// Affine coefficients (a, b) with π̂(1, ρ) = a/ρ + b on the active set
    /// that is optimal at `rho`.
    void unit_budget_coefficients(double rho, Eigen::VectorXd& a, Eigen::VectorXd& b) const;

    /// Mean π(μ - r1) and variance πΣπᵀ of an arbitrary weight vector.
    double portfolio_mean(const Eigen::VectorXd& w) const { return w.dot(excess_); }
    double portfolio_variance(const Eigen::VectorXd& w) const { return w.dot(params_.covariance * w); }

private:
    struct Pattern {
        unsigned zero_mask = 0;
        bool budget = false;
        int rank = 0;  ///< number of binding constraints
        // π = w_rho / ρ + w_alpha · α
        Eigen::VectorXd w_rho;
        Eigen::VectorXd w_alpha;
        // multipliers in row order of A₂: m = m_const + m_alpha_rho · (α ρ)
        Eigen::VectorXd m_const;
        Eigen::VectorXd m_alpha_rho;
        std::vector<int> zero_indices;
    };

    struct Candidate {
        const Pattern* pattern = nullptr;
        Eigen::VectorXd pi;
        Eigen::VectorXd multipliers;
        double violation = 0.0;
    };

    void evaluate(const Pattern& p, double alpha, double rho, Candidate& out) const;

    MarketParams params_;
    int d_;
    Eigen::VectorXd excess_;
    Eigen::MatrixXd sigma_inv_;
    Eigen::VectorXd pihat_;
    Eigen::VectorXd zeta_;
    std::vector<Pattern> patterns_;  ///< sorted by rank
};

/// Exact evaluator for ρ ↦ π̂(1, ρ) and g(ρ) = f(1, ρ) on hot paths.
///
/// With the budget fixed at 1 the optimal active set is piecewise constant in
/// ρ. Each piece has π̂ = a/ρ + b, hence mean and variance are polynomials in
/// 1/ρ. The breakpoints are located once (log-grid scan plus bisection against
/// CqpAllocator) so evaluation is a binary search and a few flops.
class UnitBudgetCurve {
public:
    explicit UnitBudgetCurve(const CqpAllocator& cqp, double rho_min = 1e-8, double rho_max = 1e8);

    struct Point {
        double g;
        double g_prime;
        double g_second;
        double mean;
        double variance;
    };
    Point operator()(double rho) const;
    /// π̂(1, ρ) written into `out` (resized to d).
    void weights(double rho, Eigen::VectorXd& out) const;

    const std::vector<double>& breakpoints() const { return breakpoints_; }

private:
    struct Piece {
        Eigen::VectorXd a;  // coefficient of 1/ρ
        Eigen::VectorXd b;  // constant
        double m1, m0;      // mean = m1/ρ + m0
        double v2, v1, v0;  // variance = v2/ρ² + v1/ρ + v0
    };
    const Piece& piece(double rho) const;

    std::vector<double> breakpoints_;  ///< piece k covers [breakpoints_[k-1], breakpoints_[k])
    std::vector<Piece> pieces_;
};

/// (μ - r1)ᵀΣ⁻¹ via a Cholesky solve.
Eigen::VectorXd unconstrained_weights(const MarketParams& params);
/// 1ᵀΣ⁻¹ / (1ᵀΣ⁻¹1).
Eigen::VectorXd min_variance_portfolio(const MarketParams& params);

/// π⁽⁰⁾ = π̂ / max(π̂·1, γ).
Allocation pi0(const CqpAllocator& cqp, double gamma);
/// π⁽¹⁾ = π̂(1, γ).
Allocation pi1(const CqpAllocator& cqp, double gamma);
/// π⁽²⁾(α) = π⁽¹⁾ / max(π⁽¹⁾·1, α).
Allocation pi2(const CqpAllocator& cqp, double alpha, double gamma);
/// π⁽³⁾(α) = π̂(1, αγ); at α = 0 the ρ → 0 limit, evaluated at ρ = 1e-8.
Allocation pi3(const CqpAllocator& cqp, double alpha, double gamma);

/// Closed form of π⁽¹⁾ valid while the non-negativity constraints are slack:
/// π̂/γ + ζ·min(1 - π̂·1/γ, 0).
Eigen::VectorXd pi1_closed_form(const CqpAllocator& cqp, double gamma);

/// Glide-path switch points of π⁽³⁾ for risk aversion γ.
struct GlideThresholds {
    /// Risk aversion below which π̂(1,ρ) holds a single asset (all in stocks).
    double full_stock_rho = 0.0;
    /// Risk aversion below which the budget π·1 <= 1 binds.
    double budget_rho = 0.0;
    /// The same thresholds expressed in the capital ratio, divided by γ and
    /// clipped to [0, 1].
    double full_stock_alpha = 0.0;
    double budget_alpha = 0.0;
};

/// Thresholds located by bisection on ρ against the active set of π̂(1, ρ).
GlideThresholds glide_thresholds(const CqpAllocator& cqp, double gamma);

}  // namespace lifestyle
