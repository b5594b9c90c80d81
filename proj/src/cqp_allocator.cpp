#include "lifestyle/cqp_allocator.hpp"

#include "lifestyle/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lifestyle {

std::vector<std::string> ActiveSet::labels() const {
    std::vector<std::string> out;
    for (int i : at_zero) out.push_back("AtZero(" + std::to_string(i) + ")");
    if (budget_full) out.emplace_back("BudgetFull");
    return out;
}

Eigen::VectorXd unconstrained_weights(const MarketParams& params) {
    Eigen::LLT<Eigen::MatrixXd> llt(params.covariance);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorisation failed");
    }
    return llt.solve(params.excess_returns());
}

Eigen::VectorXd min_variance_portfolio(const MarketParams& params) {
    Eigen::LLT<Eigen::MatrixXd> llt(params.covariance);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorisation failed");
    }
    Eigen::VectorXd w = llt.solve(Eigen::VectorXd::Ones(params.dimension()));
    return w / w.sum();
}

CqpAllocator::CqpAllocator(const MarketParams& params)
    : params_(validate_market(params)), d_(params_.dimension()), excess_(params_.excess_returns()) {
    if (d_ > 16) {
        throw Error(ErrorCode::DimensionMismatch, "active-set enumeration supports at most 16 assets");
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(params_.covariance);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorisation failed");
    }
    // A₁ = Lᵀ, so A₁ᵀA₁ = Σ and A₁⁻¹b₁ = Σ⁻¹(μ - r1)/ρ with b₁ = L⁻¹(μ - r1)/ρ.
    const Eigen::MatrixXd L = llt.matrixL();
    sigma_inv_ = llt.solve(Eigen::MatrixXd::Identity(d_, d_));
    const Eigen::VectorXd unit_merton = L.transpose().triangularView<Eigen::Upper>().solve(
        L.triangularView<Eigen::Lower>().solve(excess_));
    pihat_ = unit_merton;
    zeta_ = lifestyle::min_variance_portfolio(params_);

    const unsigned n_masks = 1u << d_;
    for (unsigned mask = 0; mask < n_masks; ++mask) {
        for (int budget = 0; budget <= 1; ++budget) {
            Pattern p;
            p.zero_mask = mask;
            p.budget = budget != 0;
            for (int i = 0; i < d_; ++i) {
                if (mask & (1u << i)) p.zero_indices.push_back(i);
            }
            const int n_zero = static_cast<int>(p.zero_indices.size());
            p.rank = n_zero + budget;
            // With every asset pinned at zero the budget row is linearly dependent.
            if (p.rank > d_) continue;

            if (p.rank == 0) {
                p.w_rho = unit_merton;
                p.w_alpha = Eigen::VectorXd::Zero(d_);
            } else {
                Eigen::MatrixXd A2 = Eigen::MatrixXd::Zero(p.rank, d_);
                for (int k = 0; k < n_zero; ++k) A2(k, p.zero_indices[k]) = 1.0;
                if (p.budget) A2.row(p.rank - 1).setOnes();
                const Eigen::MatrixXd SA = sigma_inv_ * A2.transpose();
                const Eigen::MatrixXd M = A2 * SA;
                const Eigen::MatrixXd M_inv = M.ldlt().solve(Eigen::MatrixXd::Identity(p.rank, p.rank));
                const Eigen::MatrixXd K = SA * M_inv;
                // b₂ = α e_last when the budget row is present, zero otherwise.
                p.w_rho = unit_merton - K * (A2 * unit_merton);
                p.w_alpha = p.budget ? Eigen::VectorXd(K.col(p.rank - 1)) : Eigen::VectorXd::Zero(d_);
                if (p.budget && n_zero == d_ - 1) {
                    // One free asset carries the whole budget; drop the O(eps)
                    // remainder, which 1/ρ would amplify as ρ -> 0.
                    p.w_rho.setZero();
                    p.w_alpha.setZero();
                    for (int i = 0; i < d_; ++i) {
                        if (!(mask & (1u << i))) p.w_alpha(i) = 1.0;
                    }
                }
                p.m_const = -M_inv * (A2 * unit_merton);
                p.m_alpha_rho = p.budget ? Eigen::VectorXd(M_inv.col(p.rank - 1))
                                         : Eigen::VectorXd::Zero(p.rank);
            }
            patterns_.push_back(std::move(p));
        }
    }
    std::stable_sort(patterns_.begin(), patterns_.end(),
                     [](const Pattern& a, const Pattern& b) { return a.rank < b.rank; });
}

void CqpAllocator::evaluate(const Pattern& p, double alpha, double rho, Candidate& out) const {
    out.pattern = &p;
    out.pi = p.w_rho / rho + p.w_alpha * alpha;
    for (int i : p.zero_indices) out.pi(i) = 0.0;

    const double scale_primal = 1.0 + alpha + p.w_rho.cwiseAbs().maxCoeff() / rho;
    double violation = 0.0;
    for (int i = 0; i < d_; ++i) violation = std::max(violation, -out.pi(i) / scale_primal);
    if (!p.budget) {
        violation = std::max(violation, (out.pi.sum() - alpha) / scale_primal);
    }

    if (p.rank > 0) {
        out.multipliers = p.m_const + p.m_alpha_rho * (alpha * rho);
        const double scale_dual = 1.0 + p.m_const.cwiseAbs().maxCoeff() +
                                  p.m_alpha_rho.cwiseAbs().maxCoeff() * alpha * rho;
        const int n_zero = static_cast<int>(p.zero_indices.size());
        // e - ρΣπ = -A₂ᵀm: ν_i = m_i for π_i >= 0, λ = -m_budget for π·1 <= α.
        for (int k = 0; k < n_zero; ++k) {
            violation = std::max(violation, -out.multipliers(k) / scale_dual);
        }
        if (p.budget) {
            violation = std::max(violation, out.multipliers(p.rank - 1) / scale_dual);
        }
    } else {
        out.multipliers.resize(0);
    }
    out.violation = violation;
}

CqpSolution CqpAllocator::solve_detailed(double alpha, double rho) const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorCode::InfeasibleAlpha, "budget bound alpha must be finite and >= 0");
    }
    if (!(rho > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "risk aversion must be > 0");
    }

    CqpSolution sol;
    sol.allocation.budget_bound = alpha;
    sol.zero_multipliers = Eigen::VectorXd::Zero(d_);
    if (alpha == 0.0 || std::isinf(rho)) {
        // Only feasible point, resp. the 0·∞ = 0 convention.
        sol.allocation.weights = Eigen::VectorXd::Zero(d_);
        if (alpha == 0.0) {
            for (int i = 0; i < d_; ++i) sol.active.at_zero.push_back(i);
        }
        return sol;
    }

    constexpr double kTol = 1e-10;
    Candidate best;
    best.violation = std::numeric_limits<double>::infinity();
    Candidate cand;
    for (const Pattern& p : patterns_) {
        evaluate(p, alpha, rho, cand);
        if (cand.violation <= kTol) {
            best = cand;
            break;
        }
        if (cand.violation < best.violation) best = cand;
    }

    const Pattern& p = *best.pattern;
    sol.allocation.weights = best.pi;
    sol.active.at_zero = p.zero_indices;
    sol.active.budget_full = p.budget;
    const int n_zero = static_cast<int>(p.zero_indices.size());
    for (int k = 0; k < n_zero; ++k) sol.zero_multipliers(p.zero_indices[k]) = best.multipliers(k);
    if (p.budget) sol.budget_multiplier = -best.multipliers(p.rank - 1);

    Eigen::VectorXd resid = excess_ - rho * (params_.covariance * best.pi);
    resid += sol.zero_multipliers;
    resid.array() -= sol.budget_multiplier;
    sol.kkt_residual = resid.cwiseAbs().maxCoeff();
    return sol;
}

double CqpAllocator::mv_value(double alpha, double rho) const {
    const Allocation a = solve(alpha, rho);
    if (a.weights.isZero(0.0)) return 0.0;
    return portfolio_mean(a.weights) - 0.5 * rho * portfolio_variance(a.weights);
}

CqpAllocator::GValue CqpAllocator::g_unit_budget(double rho) const {
    const Allocation a = solve(1.0, rho);
    const double m = portfolio_mean(a.weights);
    const double v = portfolio_variance(a.weights);
    return {m - 0.5 * rho * v, -0.5 * v, m, v};
}

void CqpAllocator::unit_budget_coefficients(double rho, Eigen::VectorXd& a, Eigen::VectorXd& b) const {
    const CqpSolution s = solve_detailed(1.0, rho);
    for (const Pattern& p : patterns_) {
        if (p.zero_indices == s.active.at_zero && p.budget == s.active.budget_full) {
            a = p.w_rho;
            b = p.w_alpha;
            for (int i : p.zero_indices) a(i) = b(i) = 0.0;
            return;
        }
    }
    throw Error(ErrorCode::InvariantViolated, "active set without matching pattern");
}

UnitBudgetCurve::UnitBudgetCurve(const CqpAllocator& cqp, double rho_min, double rho_max) {
    const MarketParams& p = cqp.params();
    const Eigen::VectorXd e = p.excess_returns();
    auto make_piece = [&](double rho) {
        Piece pc;
        cqp.unit_budget_coefficients(rho, pc.a, pc.b);
        pc.m1 = e.dot(pc.a);
        pc.m0 = e.dot(pc.b);
        pc.v2 = pc.a.dot(p.covariance * pc.a);
        pc.v1 = 2.0 * pc.a.dot(p.covariance * pc.b);
        pc.v0 = pc.b.dot(p.covariance * pc.b);
        return pc;
    };
    auto same = [](const Piece& x, const Piece& y) {
        return (x.a - y.a).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + x.a.cwiseAbs().maxCoeff()) &&
               (x.b - y.b).cwiseAbs().maxCoeff() <= 1e-12;
    };

    constexpr int kScan = 4000;
    const double step = std::log(rho_max / rho_min) / kScan;
    pieces_.push_back(make_piece(rho_min));
    double prev_rho = rho_min;
    for (int k = 1; k <= kScan; ++k) {
        const double rho = rho_min * std::exp(step * k);
        Piece cur = make_piece(rho);
        if (!same(cur, pieces_.back())) {
            double lo = prev_rho, hi = rho;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (same(make_piece(mid), pieces_.back()) ? lo : hi) = mid;
            }
            breakpoints_.push_back(hi);
            pieces_.push_back(std::move(cur));
        }
        prev_rho = rho;
    }
}

const UnitBudgetCurve::Piece& UnitBudgetCurve::piece(double rho) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), rho);
    return pieces_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

UnitBudgetCurve::Point UnitBudgetCurve::operator()(double rho) const {
    const Piece& pc = piece(rho);
    const double inv = 1.0 / rho;
    const double m = pc.m1 * inv + pc.m0;
    const double v = (pc.v2 * inv + pc.v1) * inv + pc.v0;
    const double dv = -(2.0 * pc.v2 * inv + pc.v1) * inv * inv;
    return {m - 0.5 * rho * v, -0.5 * v, -0.5 * dv, m, v};
}

void UnitBudgetCurve::weights(double rho, Eigen::VectorXd& out) const {
    const Piece& pc = piece(rho);
    out = pc.a / rho + pc.b;
}

Allocation pi0(const CqpAllocator& cqp, double gamma) {
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    const Eigen::VectorXd& ph = cqp.unconstrained_weights();
    return {ph / std::max(ph.sum(), gamma), 1.0};
}

Allocation pi1(const CqpAllocator& cqp, double gamma) {
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    return cqp.solve(1.0, gamma);
}

Allocation pi2(const CqpAllocator& cqp, double alpha, double gamma) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InfeasibleAlpha, "alpha must lie in [0, 1]");
    Allocation a = pi1(cqp, gamma);
    a.weights /= std::max(a.weights.sum(), alpha);
    return a;
}

Allocation pi3(const CqpAllocator& cqp, double alpha, double gamma) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InfeasibleAlpha, "alpha must lie in [0, 1]");
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    constexpr double kZeroAlphaRho = 1e-8;
    return cqp.solve(1.0, alpha > 0.0 ? alpha * gamma : kZeroAlphaRho);
}

Eigen::VectorXd pi1_closed_form(const CqpAllocator& cqp, double gamma) {
    const Eigen::VectorXd& ph = cqp.unconstrained_weights();
    return ph / gamma + cqp.min_variance_portfolio() * std::min(1.0 - ph.sum() / gamma, 0.0);
}

namespace {

template <class Pred>
double bisect_rho(Pred below, double lo, double hi) {
    // below(lo) true, below(hi) false; returns the switch point.
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = std::sqrt(lo * hi);
        (below(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

GlideThresholds glide_thresholds(const CqpAllocator& cqp, double gamma) {
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    const int d = cqp.dimension();
    auto single_asset = [&](double rho) {
        const CqpSolution s = cqp.solve_detailed(1.0, rho);
        return static_cast<int>(s.active.at_zero.size()) == d - 1;
    };
    auto budget_binds = [&](double rho) { return cqp.solve_detailed(1.0, rho).active.budget_full; };

    constexpr double kLo = 1e-9;
    constexpr double kHi = 1e9;
    GlideThresholds th;
    th.full_stock_rho = single_asset(kHi) ? kHi : (single_asset(kLo) ? bisect_rho(single_asset, kLo, kHi) : 0.0);
    th.budget_rho = budget_binds(kHi) ? kHi : bisect_rho(budget_binds, kLo, kHi);
    th.full_stock_alpha = std::clamp(th.full_stock_rho / gamma, 0.0, 1.0);
    th.budget_alpha = std::clamp(th.budget_rho / gamma, 0.0, 1.0);
    return th;
}

}  // namespace lifestyle
