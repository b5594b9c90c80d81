#include "lifestyle/market_model.hpp"

#include "lifestyle/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace lifestyle {

namespace {

// Products of decimal inputs (0.05 * 0.05) land one ulp away from the decimal
// covariance a user would type; snapping to 15 significant digits removes
// that representation noise.
double snap_decimal(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", x);
    return std::strtod(buf, nullptr);
}

}  // namespace

MarketParams MarketParams::from_volatilities(double rate, Eigen::VectorXd drifts,
                                             const Eigen::VectorXd& vols,
                                             const Eigen::MatrixXd& correlation) {
    const auto d = drifts.size();
    if (vols.size() != d || correlation.rows() != d || correlation.cols() != d) {
        throw Error(ErrorCode::DimensionMismatch, "volatilities/correlation do not match drifts");
    }
    MarketParams p;
    p.rate_riskfree = rate;
    p.drifts = std::move(drifts);
    p.covariance.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            p.covariance(i, j) = snap_decimal(correlation(i, j) * vols(i) * vols(j));
        }
    }
    return p;
}

MarketParams MarketParams::paper_baseline() {
    Eigen::Vector2d mu(0.02, 0.10);
    Eigen::Vector2d vol(0.05, 0.25);
    Eigen::Matrix2d corr;
    corr << 1.0, -0.05, -0.05, 1.0;
    return from_volatilities(0.01, mu, vol, corr);
}

MarketParams validate_market(MarketParams params) {
    const auto d = params.drifts.size();
    if (d < 1) {
        throw Error(ErrorCode::DimensionMismatch, "at least one risky asset required");
    }
    if (params.covariance.rows() != d || params.covariance.cols() != d) {
        std::ostringstream os;
        os << "covariance is " << params.covariance.rows() << "x" << params.covariance.cols()
           << " but there are " << d << " drifts";
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (!params.covariance.allFinite() || !params.drifts.allFinite() ||
        !std::isfinite(params.rate_riskfree)) {
        throw Error(ErrorCode::InvalidArgument, "market parameters must be finite");
    }
    const double asym = (params.covariance - params.covariance.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, params.covariance.cwiseAbs().maxCoeff())) {
        throw Error(ErrorCode::NotPositiveDefinite, "covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(params.covariance, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || !(lo > 1e-12 * hi)) {
        std::ostringstream os;
        os << "covariance eigenvalues range [" << lo << ", " << hi << "]";
        throw Error(ErrorCode::NotPositiveDefinite, os.str());
    }
    if (!(params.drifts.array() > params.rate_riskfree).any()) {
        throw Error(ErrorCode::NoExcessReturn, "no drift exceeds the risk-free rate");
    }
    return params;
}

ContributionSchedule::ContributionSchedule(std::vector<double> breakpoints, std::vector<double> rates)
    : breakpoints_(std::move(breakpoints)), rates_(std::move(rates)) {
    if (breakpoints_.size() < 2 || breakpoints_.size() != rates_.size() + 1) {
        throw Error(ErrorCode::InvalidSchedule, "need n+1 breakpoints for n rates (n >= 1)");
    }
    if (breakpoints_.front() != 0.0) {
        throw Error(ErrorCode::InvalidSchedule, "first breakpoint must be 0");
    }
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i] > breakpoints_[i - 1]) || !std::isfinite(breakpoints_[i])) {
            throw Error(ErrorCode::InvalidSchedule, "breakpoints must be finite and strictly increasing");
        }
    }
    for (double y : rates_) {
        if (!(y >= 0.0) || !std::isfinite(y)) {
            throw Error(ErrorCode::InvalidSchedule, "contribution rates must be finite and >= 0");
        }
    }
}

ContributionSchedule ContributionSchedule::uniform(double horizon, double total) {
    if (!(horizon > 0.0)) {
        throw Error(ErrorCode::InvalidSchedule, "horizon must be positive");
    }
    return ContributionSchedule({0.0, horizon}, {total / horizon});
}

double ContributionSchedule::rate_at(double t) const {
    if (t >= breakpoints_.back()) return rates_.back();
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    const auto k = std::max<std::ptrdiff_t>(0, (it - breakpoints_.begin()) - 1);
    return rates_[static_cast<std::size_t>(k)];
}

double ContributionSchedule::total() const {
    double s = 0.0;
    for (std::size_t k = 0; k < rates_.size(); ++k) {
        s += rates_[k] * (breakpoints_[k + 1] - breakpoints_[k]);
    }
    return s;
}

double ContributionSchedule::present_value(double t, double r) const {
    double pv = 0.0;
    for (std::size_t k = 0; k < rates_.size(); ++k) {
        const double lo = std::max(t, breakpoints_[k]);
        const double hi = breakpoints_[k + 1];
        if (hi <= lo || rates_[k] == 0.0) continue;
        const double len = hi - lo;
        // ∫_lo^hi e^{-r(u-t)} du = e^{-r(lo-t)} (1 - e^{-r len}) / r
        const double annuity = (r == 0.0) ? len : -std::expm1(-r * len) / r;
        pv += rates_[k] * std::exp(-r * (lo - t)) * annuity;
    }
    return pv;
}

double ContributionSchedule::accumulated_value(double rho) const {
    const double T = horizon();
    double acc = 0.0;
    for (std::size_t k = 0; k < rates_.size(); ++k) {
        const double a = breakpoints_[k];
        const double b = breakpoints_[k + 1];
        const double len = b - a;
        // ∫_a^b e^{rho(T-t)} dt = e^{rho(T-b)} (e^{rho len} - 1) / rho
        const double growth = (rho == 0.0) ? len : std::expm1(rho * len) / rho;
        acc += rates_[k] * std::exp(rho * (T - b)) * growth;
    }
    return acc;
}

ContributionSchedule ContributionSchedule::scaled(double c) const {
    if (!(c >= 0.0)) {
        throw Error(ErrorCode::InvalidSchedule, "scale factor must be >= 0");
    }
    std::vector<double> r = rates_;
    for (double& y : r) y *= c;
    return ContributionSchedule(breakpoints_, std::move(r));
}

double present_value(double t, const ContributionSchedule& schedule, double r) {
    if (!(t >= 0.0 && t <= schedule.horizon())) {
        throw Error(ErrorCode::TimeOutOfRange, "t must lie in [0, T]");
    }
    return schedule.present_value(t, r);
}

double capital_ratio(double t, double wealth, const ContributionSchedule& schedule, double r) {
    if (!(wealth >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "wealth must be >= 0");
    }
    const double pv = present_value(t, schedule, r);
    if (pv <= 0.0) return 1.0;
    return wealth / (wealth + pv);
}

PvCurve::PvCurve(const ContributionSchedule& schedule, double r, std::vector<double> times)
    : schedule_(schedule), rate_(r), times_(std::move(times)) {
    values_.reserve(times_.size());
    for (double t : times_) values_.push_back(present_value(t, schedule_, rate_));
}

}  // namespace lifestyle
