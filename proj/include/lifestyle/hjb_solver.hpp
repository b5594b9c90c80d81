#pragma once

#include "lifestyle/cqp_allocator.hpp"
#include "lifestyle/market_model.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace lifestyle {

/// Left (small-wealth) boundary condition for ρ at z_min.
enum class LeftBoundary {
    /// ∂_zρ = κρ·PV_t/(x + PV_t) at x = e^{z_min}. While contributions remain
    /// the value behaves like U(c + b x) as x → 0, so ρ = R(t, e^z) ~ e^z; the
    /// PV factor makes the condition exact for the riskless solution
    /// ρ = γx/(x + PV_t) and turns it into Neumann when PV_t = 0.
    Proportional,
    /// ∂_zρ = κ(γ - ρ).
    RelaxToGamma,
};

enum class TimeScheme { BackwardEuler, Bdf2 };

/// Space-time grid and solver controls for the ρ equation.
///
/// Time nodes are uniform (step ≈ dt) on [0, T - τ_g] followed by a
/// geometrically refined tail: the step adjacent to T is `first_step` and each
/// earlier step is `step_growth` times longer until dt is reached. The tail
/// resolves the layer that forms when the terminal data ρ(T,·) = γ meets the
/// boundary, which matters for probes such as t = T - 0.025.
struct GridSpec {
    double t_max = 40.0;
    double z_min = -12.0;
    double z_max = 6.0;
    double dt = 0.05;
    double dz = 0.01;

    double first_step = 1e-6;
    double step_growth = 1.03;

    /// Stored slices: every `store_t_stride`-th uniform node, every node within
    /// `dense_window` of T, and every `store_z_stride`-th z node.
    int store_t_stride = 1;
    int store_z_stride = 1;
    double dense_window = 1.0;

    LeftBoundary left_boundary = LeftBoundary::Proportional;
    double robin_kappa = 1.0;
    TimeScheme scheme = TimeScheme::Bdf2;
    int max_newton = 30;
    double newton_tol = 1e-10;

    /// Upper bound for the bytes held by stored slices.
    std::size_t memory_budget = std::size_t{2} << 30;

    /// dt = 0.05, dz = 0.01 on [0, T] x [-12, 6].
    static GridSpec desk(double horizon = 40.0);
    /// dt = 0.01, dz = 0.001 on [0, T] x [-12, 6]; stores every 5th time slice
    /// and every 10th z node.
    static GridSpec paper(double horizon = 40.0);

    /// Throws InvalidArgument.
    void validate() const;
    int z_count() const;
    double z_at(int j) const { return z_min + j * dz; }
    /// Ascending, front() == 0, back() == t_max.
    std::vector<double> time_nodes() const;
};

/// Values on a (t_k, z_j) lattice with uniform z spacing and bilinear lookup.
class GridTable {
public:
    GridTable() = default;
    GridTable(std::vector<double> times, double z_min, double dz, int nz, std::vector<double> values);

    const std::vector<double>& times() const { return times_; }
    double z_min() const { return z_min_; }
    double z_max() const { return z_min_ + (nz_ - 1) * dz_; }
    double dz() const { return dz_; }
    int nz() const { return nz_; }
    int nt() const { return static_cast<int>(times_.size()); }
    double node(int k, int j) const { return values_[static_cast<std::size_t>(k) * nz_ + j]; }
    const double* row(int k) const { return values_.data() + static_cast<std::size_t>(k) * nz_; }
    const std::vector<double>& values() const { return values_; }

    /// Bilinear interpolation. z below z_min or above z_max is clamped to the
    /// boundary node; t must lie in [times.front(), times.back()].
    double operator()(double t, double z) const;

    /// Index k with times[k] <= t <= times[k+1].
    int bracket(double t) const;

private:
    std::vector<double> times_;
    double z_min_ = 0.0;
    double dz_ = 1.0;
    int nz_ = 0;
    std::vector<double> values_;
};

struct SolveStats {
    int time_steps = 0;
    long newton_iterations = 0;
    int max_newton_per_step = 0;
    double rho_min = 0.0;
    double rho_max = 0.0;
    double runtime_s = 0.0;
};

/// ρ(t, z) = R(t, e^z), the indirect relative risk aversion of the value
/// function in the world with contributions. Immutable after construction.
class RiskAversionSurface {
public:
    RiskAversionSurface(GridTable table, double gamma, MarketParams params, ContributionSchedule schedule,
                        GridSpec grid);

    double gamma() const { return gamma_; }
    const GridTable& table() const { return table_; }
    const MarketParams& params() const { return params_; }
    const ContributionSchedule& schedule() const { return schedule_; }
    const GridSpec& grid() const { return grid_; }
    const CqpAllocator& allocator() const { return *cqp_; }
    const UnitBudgetCurve& curve() const { return *curve_; }

    /// Bilinear lookup without diagnostics (hot paths).
    double operator()(double t, double z) const { return table_(t, z); }

    SolveStats stats;

private:
    GridTable table_;
    double gamma_;
    MarketParams params_;
    ContributionSchedule schedule_;
    GridSpec grid_;
    std::shared_ptr<const CqpAllocator> cqp_;
    std::shared_ptr<const UnitBudgetCurve> curve_;
};

/// Solves ∂_tρ - ∂_z²g(ρ) + ∂_z[(y e^{-z} + r)ρ - (1 - ρ)g(ρ)] = 0 backward
/// from ρ(T, ·) = γ, with g(ρ) = f(1, ρ).
///
/// Each step is fully implicit (backward Euler or variable-step BDF2) in
/// conservative form; the flux derivative is positive, so the advective part
/// is upwinded with a forward difference in z. The nonlinear system is solved
/// by damped Newton on the tridiagonal Jacobian. Robin condition at z_min,
/// Neumann at z_max. Throws InvariantViolated if any node leaves (0, γ + 1e-6]
/// and NonConvergence if Newton stalls.
RiskAversionSurface solve_rho(const MarketParams& params, const ContributionSchedule& schedule, double gamma,
                              const GridSpec& grid);

/// Value function u(t, z) = v(t, e^z) represented through the terminal
/// log-wealth Φ(t, z) of the characteristic through (t, z): u = U_γ(e^Φ).
class ValueSurface {
public:
    ValueSurface(GridTable log_terminal, double gamma, long exits);

    double gamma() const { return gamma_; }
    const GridTable& log_terminal_wealth() const { return phi_; }
    /// Φ(t, z).
    double log_certainty(double t, double z) const { return phi_(t, z); }
    /// u(t, z) = U_γ(e^{Φ(t, z)}).
    double u(double t, double z) const;
    /// Number of characteristics that left the grid through z_max and were
    /// continued by linear extrapolation of Φ.
    long extrapolated_exits() const { return exits_; }

    /// 1 - u_zz/u_z at node (k, j) by central differences, evaluated as
    /// 1 - (1 - γ)Φ_z - Φ_zz/Φ_z.
    double implied_risk_aversion(int k, int j) const;

private:
    GridTable phi_;
    double gamma_;
    long exits_;
};

/// Transports the terminal data along dX/dt = y(t) + (r + g(ρ(t, ln X)))X.
/// On each stored time interval the characteristic from every node is
/// integrated with RK4 and Φ is read off the later slice by cubic
/// interpolation. Throws IncompatibleGrid if (params, schedule, γ) differ from
/// those the surface was solved for.
ValueSurface solve_value_u(const RiskAversionSurface& rho, const MarketParams& params,
                           const ContributionSchedule& schedule, double gamma);
ValueSurface solve_value_u(const RiskAversionSurface& rho);

/// Terminal wealth X_T of the optimally controlled certainty-equivalent path
/// started at (t0, x0); v(t0, x0) = U_γ(X_T). RK4 with step <= max_step.
double characteristic_terminal_wealth(const RiskAversionSurface& rho, double t0, double x0,
                                      double max_step = 0.01);

/// Intercept of the least-squares line through (x_i, v(0, x_i)) with
/// v(0, x) = u(0, ln x). Throws InsufficientPoints for fewer than two
/// distinct x and OutOfDomain when ln x leaves the grid.
double value_at_zero_extrapolation(const ValueSurface& u, const std::vector<double>& xs);
/// The same regression on raw data.
double ols_intercept(const std::vector<double>& xs, const std::vector<double>& vs);

/// e^{-10}, ..., e^{-5}.
std::vector<double> default_extrapolation_wealths();

/// R(t, x) = ρ(t, ln x). Queries below z_min return the boundary value with a
/// warning; queries more than one cell above z_max or outside [0, T] throw
/// OutOfDomain.
double indirect_risk_aversion(const RiskAversionSurface& rho, double t, double wealth);
/// R̄(t, W + PV_t) = R(t, W)·(W + PV_t)/W, the indirect risk aversion in the
/// world where contributions are paid up front, indexed by savings W.
double lifetime_risk_aversion(const RiskAversionSurface& rho, double t, double wealth);

/// π*(t, x) = π̂(1, R(t, x)).
Allocation optimal_policy(const RiskAversionSurface& rho, double t, double wealth);
/// π̄*(t, x̄) = π̂(α, R̄) with α = 1 - PV_t/x̄; equals (1 - PV_t/x̄)·π*(t, x̄ - PV_t).
/// Throws WealthBelowPV for x̄ <= PV_t.
Allocation optimal_policy_samuelson(const RiskAversionSurface& rho, double t, double lifetime_wealth);

}  // namespace lifestyle
