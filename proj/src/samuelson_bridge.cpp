#include "lifestyle/samuelson_bridge.hpp"

#include "lifestyle/errors.hpp"

#include <cmath>

namespace lifestyle {

namespace {

constexpr double kBudgetSlack = 1e-12;

void check_pv(double pv) {
    if (!(pv >= 0.0) || !std::isfinite(pv)) throw Error(ErrorCode::InvalidArgument, "pv must be finite and >= 0");
}

}  // namespace

void PortfolioState::validate() const {
    if (holdings.size() < 2) throw Error(ErrorCode::InvalidArgument, "need a bank account and one risky asset");
    if (holdings.size() != prices.size()) {
        throw Error(ErrorCode::DimensionMismatch, "holdings and prices differ in length");
    }
    if (!holdings.allFinite() || !prices.allFinite() || !std::isfinite(t)) {
        throw Error(ErrorCode::InvalidArgument, "state must be finite");
    }
    if ((prices.array() <= 0.0).any()) throw Error(ErrorCode::InvalidArgument, "prices must be > 0");
}

Eigen::VectorXd proportions(const PortfolioState& state) {
    state.validate();
    const int d = state.risky_count();
    const double w = state.wealth();
    if (w == 0.0) return Eigen::VectorXd::Zero(d);
    return state.holdings.tail(d).cwiseProduct(state.prices.tail(d)) / w;
}

PortfolioState to_samuelson(const PortfolioState& state, double pv) {
    state.validate();
    check_pv(pv);
    PortfolioState out = state;
    out.holdings(0) += pv / state.prices(0);
    return out;
}

PortfolioState from_samuelson(const PortfolioState& state, double pv) {
    state.validate();
    check_pv(pv);
    PortfolioState out = state;
    out.holdings(0) -= pv / state.prices(0);
    if (out.holdings(0) < 0.0) {
        throw Error(ErrorCode::NegativeBankAfterInverse, "bank holding below PV_t/S⁰");
    }
    return out;
}

std::pair<bool, bool> constraint_equivalence_check(const PortfolioState& state, double pv) {
    const PortfolioState bar = to_samuelson(state, pv);
    bool lhs;
    const double w = state.wealth();
    if (w > 0.0) {
        const Eigen::VectorXd pi = proportions(state);
        lhs = (pi.array() >= 0.0).all() && pi.sum() <= 1.0 + kBudgetSlack;
    } else if (w == 0.0) {
        lhs = state.holdings.isZero(0.0);
    } else {
        lhs = false;
    }

    bool rhs;
    const double wbar = bar.wealth();
    if (wbar > 0.0) {
        const Eigen::VectorXd pibar = proportions(bar);
        rhs = (pibar.array() >= 0.0).all() && pibar.sum() <= 1.0 - pv / wbar + kBudgetSlack;
    } else if (wbar == 0.0) {
        // pv = 0 and zero wealth: the same rule as the original world.
        rhs = bar.holdings.isZero(0.0);
    } else {
        rhs = false;
    }
    return {lhs, rhs};
}

Eigen::VectorXd policy_to_samuelson(const Eigen::VectorXd& pi, double wealth, double pv) {
    check_pv(pv);
    if (!(wealth > 0.0)) throw Error(ErrorCode::InvalidArgument, "wealth must be > 0");
    return pi * (wealth / (wealth + pv));
}

Eigen::VectorXd policy_from_samuelson(const Eigen::VectorXd& pibar, double lifetime_wealth, double pv) {
    check_pv(pv);
    if (!(lifetime_wealth > pv)) throw Error(ErrorCode::WealthBelowPV, "lifetime wealth must exceed PV_t");
    const double x = lifetime_wealth - pv;
    return pibar * (lifetime_wealth / x);
}

}  // namespace lifestyle
