#pragma once

#include <Eigen/Dense>

#include <utility>

namespace lifestyle {

/// Holdings φ = (φ⁰, φ¹, ..., φᵈ) in units of the bank account S⁰ = e^{rt}
/// and the risky assets, with their prices at time t.
struct PortfolioState {
    double t = 0.0;
    Eigen::VectorXd holdings;
    Eigen::VectorXd prices;

    /// φ·S.
    double wealth() const { return holdings.dot(prices); }
    int risky_count() const { return static_cast<int>(holdings.size()) - 1; }
    /// Throws DimensionMismatch or InvalidArgument (non-positive price, fewer
    /// than two entries, non-finite values).
    void validate() const;
};

/// π(φ): fractions of wealth in the risky assets, with 0/0 = 0 when the
/// wealth is zero.
Eigen::VectorXd proportions(const PortfolioState& state);

/// Moves PV_t into the bank account: φ̄⁰ = φ⁰ + PV_t/S⁰, risky holdings kept.
/// Throws InvalidArgument for pv < 0.
PortfolioState to_samuelson(const PortfolioState& state, double pv);

/// Inverse of to_samuelson. Throws NegativeBankAfterInverse when the bank
/// holding would become negative, which means the input was not the image of
/// an admissible state.
PortfolioState from_samuelson(const PortfolioState& state, double pv);

/// (lhs, rhs) with lhs = [π(φ) ≥ 0, π(φ)·1 ≤ 1] and
/// rhs = [π(φ̄) ≥ 0, π(φ̄)·1 ≤ 1 - PV/(φ̄·S)]. The two always agree.
///
/// Both sides are evaluated with a relative slack of 1e-12 on the budget so
/// that states exactly on the boundary π·1 = 1 are not split by round-off.
/// With zero wealth lhs requires every position to be zero.
std::pair<bool, bool> constraint_equivalence_check(const PortfolioState& state, double pv);

/// π at savings x mapped to π̄ at x̄ = x + PV_t: π̄ = π·x/(x + PV_t).
/// Throws InvalidArgument for x <= 0 or pv < 0.
Eigen::VectorXd policy_to_samuelson(const Eigen::VectorXd& pi, double wealth, double pv);
/// π̄ at x̄ mapped back to π at x = x̄ - PV_t: π = (1 + PV_t/x)·π̄.
/// Throws WealthBelowPV for x̄ <= PV_t.
Eigen::VectorXd policy_from_samuelson(const Eigen::VectorXd& pibar, double lifetime_wealth, double pv);

}  // namespace lifestyle
