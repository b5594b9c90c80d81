#pragma once

#include <Eigen/Dense>

#include <vector>

namespace lifestyle {

/// Log-normal market: a bank account growing at `rate_riskfree` and d risky
/// assets with drift vector `drifts` and instantaneous covariance `covariance`
/// (all per annum).
struct MarketParams {
    double rate_riskfree = 0.0;
    Eigen::VectorXd drifts;
    Eigen::MatrixXd covariance;

    int dimension() const { return static_cast<int>(drifts.size()); }
    Eigen::VectorXd excess_returns() const {
        return drifts.array() - rate_riskfree;
    }

    /// Assemble Σ_ij = corr_ij · vol_i · vol_j.
    static MarketParams from_volatilities(double rate, Eigen::VectorXd drifts,
                                          const Eigen::VectorXd& vols,
                                          const Eigen::MatrixXd& correlation);

    /// r = 1%, bond (2%, 5%), stock (10%, 25%), correlation -0.05.
    static MarketParams paper_baseline();
};

/// Checks dimensions, positive definiteness (smallest eigenvalue above
/// 1e-12 times the largest) and that some drift exceeds the risk-free rate.
/// Returns the params unchanged on success, throws lifestyle::Error otherwise.
MarketParams validate_market(MarketParams params);

/// Deterministic contribution rate y(t) on [0, T], piecewise constant.
/// `breakpoints` has one more entry than `rates`; breakpoints.front() == 0 and
/// breakpoints.back() == horizon.
class ContributionSchedule {
public:
    ContributionSchedule(std::vector<double> breakpoints, std::vector<double> rates);

    /// Constant rate total/horizon, i.e. cumulative contributions Y_t = t·total/T.
    static ContributionSchedule uniform(double horizon, double total = 1.0);

    double horizon() const { return breakpoints_.back(); }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& rates() const { return rates_; }

    /// y(t); right-continuous, with y(T) taken from the last segment.
    double rate_at(double t) const;
    double total() const;

    /// Closed-form ∫_t^T e^{-r(u-t)} y(u) du.
    double present_value(double t, double r) const;

    /// Closed-form ∫_0^T e^{rho(T-t)} y(t) dt, the terminal value of the
    /// contribution stream compounded at `rho`.
    double accumulated_value(double rho) const;

    /// Schedule with every rate multiplied by c >= 0.
    ContributionSchedule scaled(double c) const;

private:
    std::vector<double> breakpoints_;
    std::vector<double> rates_;
};

/// Free-function form of ContributionSchedule::present_value with range check.
double present_value(double t, const ContributionSchedule& schedule, double r);

/// α = W / (W + PV_t); 1 when PV_t = 0.
double capital_ratio(double t, double wealth, const ContributionSchedule& schedule, double r);

/// PV_t sampled on a time grid, with the exact evaluator kept alongside.
class PvCurve {
public:
    PvCurve(const ContributionSchedule& schedule, double r, std::vector<double> times);

    double operator()(double t) const { return schedule_.present_value(t, rate_); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    ContributionSchedule schedule_;
    double rate_;
    std::vector<double> times_;
    std::vector<double> values_;
};

}  // namespace lifestyle
