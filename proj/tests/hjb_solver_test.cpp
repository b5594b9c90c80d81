#include "lifestyle/errors.hpp"
#include "lifestyle/hjb_solver.hpp"
#include "lifestyle/utility.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

namespace lifestyle {
namespace {

const ContributionSchedule& baseline_schedule() {
    static const ContributionSchedule y = ContributionSchedule::uniform(40.0);
    return y;
}

// Desk-preset solves are shared across tests.
const RiskAversionSurface& desk_surface(double gamma) {
    static std::map<double, RiskAversionSurface> cache;
    auto it = cache.find(gamma);
    if (it == cache.end()) {
        it = cache.emplace(gamma, solve_rho(MarketParams::paper_baseline(), baseline_schedule(), gamma, GridSpec::desk()))
                 .first;
    }
    return it->second;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected lifestyle::Error";
    return ErrorCode::InvalidArgument;
}

TEST(GridSpecTest, TimeNodesAndPresets) {
    const GridSpec g = GridSpec::desk();
    const auto t = g.time_nodes();
    EXPECT_EQ(t.front(), 0.0);
    EXPECT_EQ(t.back(), 40.0);
    for (std::size_t k = 1; k < t.size(); ++k) {
        EXPECT_GT(t[k], t[k - 1]);
        EXPECT_LE(t[k] - t[k - 1], g.dt * (1.0 + 1e-9));
    }
    EXPECT_NEAR(t.back() - t[t.size() - 2], g.first_step, 1e-12);
    EXPECT_EQ(g.z_count(), 1801);
    const GridSpec p = GridSpec::paper();
    EXPECT_EQ(p.dt, 0.01);
    EXPECT_EQ(p.dz, 0.001);
    EXPECT_EQ(p.z_count(), 18001);
    EXPECT_NO_THROW(p.validate());
}

TEST(GridSpecTest, Validation) {
    GridSpec g = GridSpec::desk();
    g.dt = 0.0;
    EXPECT_EQ(code_of([&] { g.validate(); }), ErrorCode::InvalidArgument);
    g = GridSpec::desk();
    g.dz = -0.01;
    EXPECT_EQ(code_of([&] { g.validate(); }), ErrorCode::InvalidArgument);
    g = GridSpec::desk();
    g.z_max = g.z_min;
    EXPECT_EQ(code_of([&] { g.validate(); }), ErrorCode::InvalidArgument);
    g = GridSpec::desk();
    g.memory_budget = 1000;
    EXPECT_EQ(code_of([&] { g.validate(); }), ErrorCode::InvalidArgument);
    g = GridSpec::desk();
    g.t_max = 30.0;
    EXPECT_EQ(code_of([&] { solve_rho(MarketParams::paper_baseline(), baseline_schedule(), 2.0, g); }),
              ErrorCode::IncompatibleGrid);
}

TEST(GridTableTest, BilinearIsExactOnBilinearData) {
    std::vector<double> times{0.0, 0.5, 2.0};
    std::vector<double> v;
    for (double t : times)
        for (int j = 0; j < 5; ++j) v.push_back(1.0 + 2.0 * t - 0.5 * j * 0.25 + 0.3 * t * j * 0.25);
    const GridTable tab(times, 0.0, 0.25, 5, v);
    EXPECT_NEAR(tab(1.3, 0.6), 1.0 + 2.6 - 0.3 + 0.3 * 1.3 * 0.6, 1e-14);
    EXPECT_NEAR(tab(1.3, -5.0), tab(1.3, 0.0), 0.0);
    EXPECT_EQ(code_of([&] { tab(2.5, 0.1); }), ErrorCode::OutOfDomain);
}

TEST(HjbSolverTest, TerminalSliceAndInvariants) {
    for (double gamma : {2.0, 8.0}) {
        const auto& s = desk_surface(gamma);
        const GridTable& tab = s.table();
        const int last = tab.nt() - 1;
        for (int j = 0; j < tab.nz(); ++j) ASSERT_EQ(tab.node(last, j), gamma);
        EXPECT_GT(s.stats.rho_min, 0.0);
        EXPECT_LE(s.stats.rho_max, gamma + 1e-6);
        for (double v : tab.values()) {
            ASSERT_GT(v, 0.0);
            ASSERT_LE(v, gamma + 1e-8);
        }
        // Neumann consistency at z_max.
        for (int k = 0; k < tab.nt(); ++k) {
            EXPECT_LT(std::abs(tab.node(k, tab.nz() - 1) - tab.node(k, tab.nz() - 2)), 1e-4);
        }
        EXPECT_NEAR(indirect_risk_aversion(s, 40.0, 0.3), gamma, 0.0);
    }
}

TEST(HjbSolverTest, MertonClosedFormWithoutContributions) {
    // y = 0 and π̂·1/γ < 1: ρ ≡ γ and u(0, z) = U(e^{z + (r + f(1,γ))T}).
    const ContributionSchedule none({0.0, 40.0}, {0.0});
    const double gamma = 8.0;
    const auto s = solve_rho(MarketParams::paper_baseline(), none, gamma, GridSpec::desk());
    EXPECT_NEAR(s.stats.rho_min, gamma, 1e-10);
    EXPECT_NEAR(s.stats.rho_max, gamma, 1e-10);
    const CqpAllocator cqp(MarketParams::paper_baseline());
    const Eigen::VectorXd w = cqp.unconstrained_weights() / gamma;  // interior Merton weights
    const double c = 0.01 + cqp.portfolio_mean(w) - 0.5 * gamma * cqp.portfolio_variance(w);
    EXPECT_NEAR(c, 0.01 + cqp.mv_value(1.0, gamma), 1e-15);
    const auto u = solve_value_u(s);
    for (double z : {-8.0, -3.0, 0.0, 2.5}) {
        EXPECT_NEAR(u.log_certainty(0.0, z), z + c * 40.0, 1e-9) << z;
        EXPECT_NEAR(u.u(0.0, z), crra_utility(std::exp(z + c * 40.0), gamma),
                    1e-8 * std::abs(crra_utility(std::exp(z + c * 40.0), gamma)));
    }
}

TEST(HjbSolverTest, DegenerateMarketGivesLifetimeRiskAversionGamma) {
    // With μ = r1 + εe₂ the risky assets are worthless: v(t, x) = U(e^{r(T-t)}(x + PV_t)),
    // so R̄ = γ and R(t, x) = γ x / (x + PV_t).
    MarketParams p = MarketParams::paper_baseline();
    p.drifts << 0.01, 0.01 + 1e-6;
    const double gamma = 5.0;
    const auto s = solve_rho(p, baseline_schedule(), gamma, GridSpec::desk());
    for (double t : {0.0, 10.0, 30.0, 39.5}) {
        for (double w : {1e-4, 0.01, 0.3, 2.0, 20.0}) {
            EXPECT_NEAR(lifetime_risk_aversion(s, t, w), gamma, 2e-2 * gamma) << t << " " << w;
        }
    }
}

TEST(HjbSolverTest, PublishedProbePoints) {
    const auto& s8 = desk_surface(8.0);
    // Table 2 (γ = 8).
    auto a = optimal_policy(s8, 0.0, 2.0).weights;
    EXPECT_NEAR(a(0), 0.740, 0.02);
    EXPECT_NEAR(a(1), 0.260, 0.02);
    a = optimal_policy(s8, 0.0, 1e-5).weights;
    EXPECT_NEAR(a(0), 0.0, 1e-12);
    EXPECT_NEAR(a(1), 1.0, 1e-12);
    a = optimal_policy(s8, 0.0, 20.0).weights;
    EXPECT_NEAR(a(0), 0.569, 0.03);
    EXPECT_NEAR(a(1), 0.193, 0.03);
    // Table for γ = 2, near the horizon.
    a = optimal_policy(desk_surface(2.0), 39.975, 20.0).weights;
    EXPECT_NEAR(a(0), 0.349, 0.01);
    EXPECT_NEAR(a(1), 0.651, 0.01);
    // Table 6.
    EXPECT_NEAR(lifetime_risk_aversion(desk_surface(2.0), 0.0, 1e-5), 5.55, 0.1);
    EXPECT_NEAR(lifetime_risk_aversion(s8, 0.0, 2.0), 8.01, 0.05);
}

TEST(HjbSolverTest, SamuelsonPolicyIdentity) {
    const auto& s = desk_surface(8.0);
    const double r = 0.01;
    for (double t : {0.0, 5.0, 17.3, 30.0, 39.9}) {
        const double pv = present_value(t, baseline_schedule(), r);
        for (double w : {1e-3, 0.05, 0.2, 1.0, 3.0, 50.0}) {
            const double xbar = w + pv;
            const Allocation bar = optimal_policy_samuelson(s, t, xbar);
            const Allocation star = optimal_policy(s, t, w);
            const double alpha = 1.0 - pv / xbar;
            EXPECT_NEAR(bar.budget_bound, alpha, 1e-15);
            EXPECT_LT((bar.weights - alpha * star.weights).cwiseAbs().maxCoeff(), 1e-9) << t << " " << w;
        }
    }
    const double pv0 = present_value(0.0, baseline_schedule(), r);
    EXPECT_NEAR(optimal_policy_samuelson(s, 0.0, pv0 + 2.0).budget_bound, 2.0 / (2.0 + pv0), 1e-15);
    EXPECT_LT(optimal_policy_samuelson(s, 0.0, pv0 * (1.0 + 1e-9)).weights.sum(), 1e-8);
    EXPECT_EQ(code_of([&] { optimal_policy_samuelson(s, 0.0, pv0); }), ErrorCode::WealthBelowPV);
}

TEST(HjbSolverTest, QueriesOutsideTheGrid) {
    const auto& s = desk_surface(2.0);
    int warnings = 0;
    set_warning_sink([&](std::string_view) { ++warnings; });
    EXPECT_EQ(indirect_risk_aversion(s, 0.0, std::exp(-20.0)), s.table().node(0, 0));
    EXPECT_EQ(warnings, 1);
    set_warning_sink(nullptr);
    EXPECT_NO_THROW(indirect_risk_aversion(s, 0.0, std::exp(6.005)));
    EXPECT_EQ(code_of([&] { indirect_risk_aversion(s, 0.0, std::exp(7.0)); }), ErrorCode::OutOfDomain);
    EXPECT_EQ(code_of([&] { indirect_risk_aversion(s, 41.0, 1.0); }), ErrorCode::OutOfDomain);
    EXPECT_EQ(code_of([&] { indirect_risk_aversion(s, 0.0, 0.0); }), ErrorCode::InvalidArgument);
    set_warning_sink([](std::string_view m) { std::cerr << "warning: " << m << '\n'; });
}

TEST(ValueTransportTest, TerminalProfiles) {
    const auto u8 = solve_value_u(desk_surface(8.0));
    const GridTable& phi = u8.log_terminal_wealth();
    const int last = phi.nt() - 1;
    for (int j = 0; j < phi.nz(); j += 97) {
        const double z = phi.z_min() + j * phi.dz();
        EXPECT_EQ(phi.node(last, j), z);
        EXPECT_NEAR(u8.u(40.0, z), std::exp(-7.0 * z) / -7.0, 1e-13 * std::exp(-7.0 * z));
    }
    const auto s1 = solve_rho(MarketParams::paper_baseline(), baseline_schedule(), 1.0, GridSpec::desk());
    const auto u1 = solve_value_u(s1);
    EXPECT_NEAR(u1.u(40.0, 0.7), 0.7, 1e-12);
    EXPECT_NEAR(u1.u(40.0, -3.0), -3.0, 1e-12);
    EXPECT_LE(s1.stats.rho_max, 1.0 + 1e-6);
}

TEST(ValueTransportTest, ValueIncreasingAndSignConvention) {
    for (double gamma : {2.0, 8.0}) {
        const auto u = solve_value_u(desk_surface(gamma));
        const GridTable& phi = u.log_terminal_wealth();
        for (int k = 0; k < phi.nt(); k += 50) {
            for (int j = 1; j < phi.nz(); ++j) ASSERT_GT(phi.node(k, j), phi.node(k, j - 1));
            EXPECT_LT(u.u(phi.times()[k], -1.0), 0.0);
        }
    }
    GridSpec g = GridSpec::desk();
    const auto s = solve_rho(MarketParams::paper_baseline(), baseline_schedule(), 0.5, g);
    EXPECT_GT(solve_value_u(s).u(0.0, -1.0), 0.0);
}

TEST(ValueTransportTest, ImpliedRiskAversionMatchesRho) {
    // 1 - u_zz/u_z recovers ρ at interior nodes, and the error shrinks with the grid.
    auto max_error = [](double dz, double dt) {
        GridSpec g = GridSpec::desk();
        g.dz = dz;
        g.dt = dt;
        const auto s = solve_rho(MarketParams::paper_baseline(), baseline_schedule(), 8.0, g);
        const auto u = solve_value_u(s);
        const GridTable& tab = s.table();
        double err = 0.0;
        for (double t : {0.0, 10.0, 20.0, 30.0}) {
            const int k = tab.bracket(t);
            for (int j = 50; j < tab.nz() - 50; j += 5) {
                err = std::max(err, std::abs(u.implied_risk_aversion(k, j) - tab.node(k, j)));
            }
        }
        return err;
    };
    const double coarse = max_error(0.02, 0.1);
    const double fine = max_error(0.01, 0.05);
    EXPECT_LT(fine, 0.05 * 8.0);
    EXPECT_LT(fine, coarse);
}

TEST(ValueExtrapolationTest, RegressionIntercept) {
    std::vector<double> xs{0.1, 0.2, 0.4, 0.7};
    std::vector<double> vs;
    for (double x : xs) vs.push_back(-3.0 + 2.5 * x);
    EXPECT_NEAR(ols_intercept(xs, vs), -3.0, 1e-14);
    EXPECT_NEAR(ols_intercept(xs, {4.0, 4.0, 4.0, 4.0}), 4.0, 1e-15);
    EXPECT_EQ(code_of([] { ols_intercept({1.0}, {2.0}); }), ErrorCode::InsufficientPoints);
    EXPECT_EQ(code_of([] { ols_intercept({1.0, 1.0}, {2.0, 3.0}); }), ErrorCode::InsufficientPoints);
    const auto xs0 = default_extrapolation_wealths();
    ASSERT_EQ(xs0.size(), 6u);
    EXPECT_NEAR(xs0.front(), std::exp(-10.0), 1e-20);
}

TEST(ValueExtrapolationTest, AgreesWithDirectCharacteristic) {
    for (double gamma : {2.0, 8.0}) {
        const auto& s = desk_surface(gamma);
        const auto u = solve_value_u(s);
        const double v0 = value_at_zero_extrapolation(u, default_extrapolation_wealths());
        const double ce_reg = crra_inverse(v0, gamma);
        const double ce_dir = characteristic_terminal_wealth(s, 0.0, 1e-12);
        EXPECT_NEAR(ce_reg, ce_dir, 2e-4);
        EXPECT_EQ(code_of([&] { value_at_zero_extrapolation(u, {std::exp(-13.0), 1e-3}); }),
                  ErrorCode::OutOfDomain);
    }
}

// Grid sensitivity: halving dt and dz, and moving z_min one unit lower, keep
// Table-2 probes and CE well inside their tolerances.
TEST(HjbSolverTest, RefinementAndDomainExtension) {
    const double gamma = 8.0;
    const auto& base = desk_surface(gamma);
    GridSpec fine = GridSpec::desk();
    fine.dt /= 2.0;
    fine.dz /= 2.0;
    GridSpec wide = GridSpec::desk();
    wide.z_min -= 1.0;
    const auto sf = solve_rho(MarketParams::paper_baseline(), baseline_schedule(), gamma, fine);
    const auto sw = solve_rho(MarketParams::paper_baseline(), baseline_schedule(), gamma, wide);
    double d_fine = 0.0, d_wide = 0.0, r_wide = 0.0;
    for (double t : {0.0, 10.0, 20.0, 30.0, 39.975}) {
        for (double w : {1e-5, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 20.0}) {
            const auto p = optimal_policy(base, t, w).weights;
            d_fine = std::max(d_fine, (optimal_policy(sf, t, w).weights - p).cwiseAbs().maxCoeff());
            d_wide = std::max(d_wide, (optimal_policy(sw, t, w).weights - p).cwiseAbs().maxCoeff());
            r_wide = std::max(r_wide, std::abs(lifetime_risk_aversion(sw, t, w) - lifetime_risk_aversion(base, t, w)));
        }
    }
    EXPECT_LT(d_fine, 0.015);
    EXPECT_LT(d_wide, 0.003);
    EXPECT_LT(r_wide, 0.01);
    const double ce = characteristic_terminal_wealth(base, 0.0, 1e-12);
    EXPECT_LT(std::abs(characteristic_terminal_wealth(sf, 0.0, 1e-12) - ce), 0.005);
    EXPECT_LT(std::abs(characteristic_terminal_wealth(sw, 0.0, 1e-12) - ce), 0.003);
}

TEST(HjbSolverTest, LeftBoundaryChoice) {
    // ∂_zρ = κ(γ - ρ) with κ = 1 asks for a slope near γ where ρ itself is
    // O(e^{z_min}); no positive discrete solution exists and the solver says so.
    GridSpec g = GridSpec::desk();
    g.left_boundary = LeftBoundary::RelaxToGamma;
    const ErrorCode c = code_of([&] { solve_rho(MarketParams::paper_baseline(), baseline_schedule(), 8.0, g); });
    EXPECT_TRUE(c == ErrorCode::NonConvergence || c == ErrorCode::InvariantViolated);
    // κ = 0 (plain Neumann) solves, and the outputs barely notice the change of
    // boundary condition because z_min is an outflow boundary.
    g.robin_kappa = 0.0;
    const auto s = solve_rho(MarketParams::paper_baseline(), baseline_schedule(), 8.0, g);
    const auto& base = desk_surface(8.0);
    for (double t : {0.0, 20.0, 39.975}) {
        for (double w : {1e-5, 0.1, 2.0}) {
            const auto d = (optimal_policy(s, t, w).weights - optimal_policy(base, t, w).weights).cwiseAbs();
            EXPECT_LT(d.maxCoeff(), 0.003) << t << " " << w;
        }
    }
}

}  // namespace
}  // namespace lifestyle
