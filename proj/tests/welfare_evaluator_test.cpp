#include "lifestyle/errors.hpp"
#include "lifestyle/utility.hpp"
#include "lifestyle/welfare_evaluator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

namespace lifestyle {
namespace {

const ContributionSchedule& baseline_schedule() {
    static const ContributionSchedule y = ContributionSchedule::uniform(40.0);
    return y;
}

const ContributionSchedule& no_contributions() {
    static const ContributionSchedule y({0.0, 40.0}, {0.0});
    return y;
}

std::shared_ptr<const RiskAversionSurface> desk_surface(double gamma) {
    static std::map<double, std::shared_ptr<const RiskAversionSurface>> cache;
    auto& s = cache[gamma];
    if (!s) {
        s = std::make_shared<RiskAversionSurface>(
            solve_rho(MarketParams::paper_baseline(), baseline_schedule(), gamma, GridSpec::desk()));
    }
    return s;
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

Eigen::VectorXd vec2(double a, double b) { return (Eigen::VectorXd(2) << a, b).finished(); }

TEST(WelfareBasicsTest, NamesRoundTrip) {
    for (auto k : {StrategyKind::Pi0, StrategyKind::Pi1, StrategyKind::Pi2, StrategyKind::Pi3, StrategyKind::Optimal,
                   StrategyKind::FixedWeights}) {
        EXPECT_EQ(strategy_kind_from_string(to_string(k)), k);
    }
    for (auto m : {WelfareMethod::Pde, WelfareMethod::MonteCarlo, WelfareMethod::Both}) {
        EXPECT_EQ(welfare_method_from_string(to_string(m)), m);
    }
    EXPECT_EQ(code_of([] { strategy_kind_from_string("pi4"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { welfare_method_from_string("exact"); }), ErrorCode::InvalidArgument);
}

TEST(WelfareBasicsTest, StrategyValidation) {
    const MarketParams p = MarketParams::paper_baseline();
    EXPECT_EQ(code_of([&] { StrategySpec::fixed(vec2(0.7, 0.4), 2.0).validate(p); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { StrategySpec::fixed(vec2(-0.1, 0.4), 2.0).validate(p); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { StrategySpec::fixed(Eigen::VectorXd::Zero(3), 2.0).validate(p); }),
              ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { StrategySpec::optimal(nullptr).validate(p); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { StrategySpec::heuristic(StrategyKind::Pi1, 0.0).validate(p); }),
              ErrorCode::InvalidArgument);
    StrategySpec mismatched = StrategySpec::optimal(desk_surface(2.0));
    mismatched.gamma = 5.0;
    EXPECT_EQ(code_of([&] { mismatched.validate(p); }), ErrorCode::IncompatibleGrid);
}

TEST(WelfareBasicsTest, PolicyMatchesHeuristicAllocations) {
    const MarketParams p = MarketParams::paper_baseline();
    const CqpAllocator cqp(p);
    const double pv10 = baseline_schedule().present_value(10.0, p.rate_riskfree);
    Eigen::VectorXd w;
    for (double gamma : {2.0, 8.0}) {
        StrategyPolicy p1(StrategySpec::heuristic(StrategyKind::Pi1, gamma), p, baseline_schedule());
        p1.weights(10.0, 0.3, pv10, w);
        EXPECT_LT((w - pi1(cqp, gamma).weights).norm(), 1e-12);
        EXPECT_TRUE(p1.is_constant());

        StrategyPolicy p3(StrategySpec::heuristic(StrategyKind::Pi3, gamma), p, baseline_schedule());
        const double alpha = 0.3 / (0.3 + pv10);
        p3.weights(10.0, 0.3, pv10, w);
        EXPECT_LT((w - pi3(cqp, alpha, gamma).weights).norm(), 1e-9);
        const auto mv = p3.moments(10.0, 0.3, pv10);
        EXPECT_NEAR(mv.mean, cqp.portfolio_mean(w), 1e-9);
        EXPECT_NEAR(mv.variance, cqp.portfolio_variance(w), 1e-9);
        EXPECT_FALSE(p3.is_constant());

        // π⁽²⁾ = π⁽¹⁾ scaled to fit under the unit budget once α < π⁽¹⁾·1.
        StrategyPolicy p2(StrategySpec::heuristic(StrategyKind::Pi2, gamma), p, baseline_schedule());
        const Eigen::VectorXd w1 = pi1(cqp, gamma).weights;
        p2.weights(10.0, 0.3, pv10, w);
        EXPECT_LT((w - w1 / std::max(w1.sum(), alpha)).norm(), 1e-12);
        EXPECT_LE(w.sum(), 1.0 + 1e-12);
    }
}

TEST(WelfareBasicsTest, CertaintyEquivalentInvertsUtility) {
    for (double gamma : {0.5, 1.0, 2.0, 5.0, 8.0}) {
        for (double x : {0.01, 1.0, 3.6501, 250.0}) {
            EXPECT_NEAR(certainty_equivalent(crra_utility(x, gamma), gamma), x, 1e-12 * x);
        }
    }
    // U_2(2) = -0.5.
    EXPECT_NEAR(certainty_equivalent(-0.5, 2.0), 2.0, 1e-15);
    EXPECT_EQ(code_of([] { certainty_equivalent(0.5, 2.0); }), ErrorCode::SignMismatch);
    EXPECT_EQ(code_of([] { certainty_equivalent(-0.5, 0.5); }), ErrorCode::SignMismatch);
}

TEST(WelfareBasicsTest, IrrExamples) {
    const ContributionSchedule& y = baseline_schedule();
    EXPECT_NEAR(irr(3.6501, y), 0.0550, 5e-5);
    EXPECT_NEAR(irr(1.8164, y), 0.0274, 5e-5);
    EXPECT_NEAR(irr(1.0, y), 0.0, 1e-9);
    for (double rate : {-0.3, -0.02, 0.0137, 0.2}) {
        EXPECT_NEAR(irr(y.accumulated_value(rate), y), rate, 1e-9);
    }
    // Rate 0.8 needs the widened bracket; 1e9 is out of reach even then.
    EXPECT_NEAR(irr(y.accumulated_value(0.8), y), 0.8, 1e-9);
    EXPECT_EQ(code_of([&] { irr(1e30, y); }), ErrorCode::BracketFailure);
    EXPECT_EQ(code_of([&] { irr(0.0, y); }), ErrorCode::InvalidArgument);
}

TEST(ValuePdeTest, ConstantWeightsWithoutContributionsAreExact) {
    // Ψ(0, z) = z + (r + m - v/2)T + (1 - γ)vT/2 for constant weights and y = 0.
    const MarketParams p = MarketParams::paper_baseline();
    const CqpAllocator cqp(p);
    GridSpec g = GridSpec::desk();
    g.dz = 0.05;
    for (double gamma : {1.0, 2.0, 8.0}) {
        const Eigen::VectorXd w = vec2(0.3, 0.5);
        const double m = cqp.portfolio_mean(w), v = cqp.portfolio_variance(w);
        const ValueCurve vc = value_pde(StrategySpec::fixed(w, gamma), p, no_contributions(), g);
        for (double x : {0.001, 1.0, 50.0}) {
            const double expect = std::log(x) + (p.rate_riskfree + m - 0.5 * v) * 40.0 + (1.0 - gamma) * v * 20.0;
            EXPECT_NEAR(vc.log_certainty(x), expect, 1e-8) << gamma << " " << x;
        }
    }
}

TEST(ValuePdeTest, DegenerateDiffusionAndDomain) {
    const MarketParams p = MarketParams::paper_baseline();
    EXPECT_EQ(code_of([&] { value_pde(StrategySpec::fixed(vec2(0, 0), 2.0), p, baseline_schedule(), GridSpec::desk()); }),
              ErrorCode::DiffusionDegenerate);
    GridSpec g = GridSpec::desk(30.0);
    EXPECT_EQ(code_of([&] { value_pde(StrategySpec::heuristic(StrategyKind::Pi1, 2.0), p, baseline_schedule(), g); }),
              ErrorCode::IncompatibleGrid);
    const ValueCurve vc = value_pde(StrategySpec::heuristic(StrategyKind::Pi1, 2.0), p, baseline_schedule(),
                                    GridSpec::desk());
    EXPECT_EQ(code_of([&] { vc.log_certainty(std::exp(7.0)); }), ErrorCode::OutOfDomain);
    EXPECT_EQ(code_of([&] { vc.certainty_equivalent(-1.0); }), ErrorCode::OutOfDomain);
    // v(0, ·) increasing; CE above the riskless annuity.
    double last = -1e300;
    for (double z = -11.0; z < 5.5; z += 0.5) {
        const double v = vc.value(std::exp(z));
        EXPECT_GT(v, last);
        last = v;
    }
    EXPECT_GT(vc.certainty_equivalent(0.0), riskless_terminal_wealth(0.0, baseline_schedule(), p.rate_riskfree));
}

struct TableRow {
    double gamma;
    double ce0, ce1, ce2, ce3, ce_star;
};
const TableRow kTable[] = {
    {2.0, 2.2584, 3.3353, 3.3353, 3.6496, 3.6501},
    {5.0, 1.9720, 2.0153, 2.0153, 2.1774, 2.1782},
    {8.0, 1.6872, 1.6872, 1.7510, 1.8161, 1.8164},
};

TEST(ValuePdeTest, DeskPresetWelfareTables) {
    const MarketParams p = MarketParams::paper_baseline();
    for (const TableRow& row : kTable) {
        std::vector<StrategySpec> s;
        for (auto k : {StrategyKind::Pi0, StrategyKind::Pi1, StrategyKind::Pi2, StrategyKind::Pi3}) {
            s.push_back(StrategySpec::heuristic(k, row.gamma));
        }
        s.push_back(StrategySpec::optimal(desk_surface(row.gamma)));
        const WelfareReport rep = compare_strategies(s, p, baseline_schedule(), WelfareMethod::Pde, {});
        const double ce[] = {rep.find("pi0", "pde").ce, rep.find("pi1", "pde").ce, rep.find("pi2", "pde").ce,
                             rep.find("pi3", "pde").ce, rep.find("optimal", "pde").ce};
        const double published[] = {row.ce0, row.ce1, row.ce2, row.ce3, row.ce_star};
        for (int i = 0; i < 5; ++i) EXPECT_NEAR(ce[i], published[i], 0.03) << "gamma " << row.gamma << " #" << i;
        for (int i = 0; i < 4; ++i) EXPECT_LE(ce[i], ce[i + 1] + 1e-12) << "gamma " << row.gamma << " #" << i;
        EXPECT_NEAR(rep.find("optimal", "characteristics").ce, row.ce_star, 0.03);
        // The π* - π⁽³⁾ gap is tiny but positive at every γ.
        const double gap = 1.0 - ce[3] / ce[4];
        EXPECT_GT(gap, 0.0);
        EXPECT_LT(gap, 1e-3);
        for (const auto& r : rep.rows) EXPECT_NEAR(r.irr, irr(r.ce, baseline_schedule()), 1e-12);
    }
}

TEST(MonteCarloTest, LognormalClosedForm) {
    // y = 0, x0 = 1, all in stocks, γ = 2: CE = exp((r + m - v/2)T - vT/2) = e^{1.5}.
    MonteCarloOptions o;
    o.n_paths = 200000;
    const auto res = monte_carlo_ce(StrategySpec::fixed(vec2(0, 1), 2.0), MarketParams::paper_baseline(),
                                    no_contributions(), 1.0, o);
    EXPECT_NEAR(std::exp(1.5), 4.4817, 1e-4);
    EXPECT_LT(std::abs(res.ce - std::exp(1.5)), 3.0 * res.stderr_ce) << res.ce << " ± " << res.stderr_ce;
    EXPECT_GT(res.stderr_ce, 0.0);
}

TEST(MonteCarloTest, RisklessStrategyIsExactAnnuity) {
    const MarketParams p = MarketParams::paper_baseline();
    MonteCarloOptions o;
    o.n_paths = 500;
    o.dt = 0.1;
    for (double x0 : {0.0, 0.5}) {
        const auto res = monte_carlo_ce(StrategySpec::fixed(vec2(0, 0), 5.0), p, baseline_schedule(), x0, o);
        const double annuity = riskless_terminal_wealth(x0, baseline_schedule(), p.rate_riskfree);
        EXPECT_NEAR(res.ce, annuity, 1e-12 * annuity);
        EXPECT_EQ(res.stderr_utility, 0.0);
        for (double u : res.utilities) EXPECT_EQ(u, res.utilities.front());
    }
    EXPECT_NEAR(riskless_terminal_wealth(0.0, baseline_schedule(), 0.01), (std::exp(0.4) - 1.0) / 0.4, 1e-14);
    const WelfareReport rep = compare_strategies({StrategySpec::fixed(vec2(0, 0), 2.0)}, p, baseline_schedule(),
                                                 WelfareMethod::Pde, {});
    EXPECT_EQ(rep.rows.at(0).method, "exact");
    EXPECT_NEAR(rep.rows.at(0).irr, 0.01, 1e-9);
}

TEST(MonteCarloTest, ReproducibleAcrossThreadCounts) {
    MonteCarloOptions o;
    o.n_paths = 3000;
    o.dt = 0.1;
    const StrategySpec s = StrategySpec::heuristic(StrategyKind::Pi3, 5.0);
    o.threads = 1;
    const auto a = monte_carlo_ce(s, MarketParams::paper_baseline(), baseline_schedule(), 0.0, o);
    o.threads = 3;
    const auto b = monte_carlo_ce(s, MarketParams::paper_baseline(), baseline_schedule(), 0.0, o);
    EXPECT_EQ(a.ce, b.ce);
    EXPECT_EQ(a.utilities, b.utilities);
    o.seed += 1;
    const auto c = monte_carlo_ce(s, MarketParams::paper_baseline(), baseline_schedule(), 0.0, o);
    EXPECT_NE(a.ce, c.ce);
}

TEST(MonteCarloTest, AgreesWithPdeAndCommonNumbersShrinkGapError) {
    const MarketParams p = MarketParams::paper_baseline();
    MonteCarloOptions o;
    o.n_paths = 4000;
    o.dt = 0.04;
    const double gamma = 2.0;
    const auto s3 = StrategySpec::heuristic(StrategyKind::Pi3, gamma);
    const auto s1 = StrategySpec::heuristic(StrategyKind::Pi1, gamma);
    const auto m3 = monte_carlo_ce(s3, p, baseline_schedule(), 0.0, o);
    const auto m1 = monte_carlo_ce(s1, p, baseline_schedule(), 0.0, o);
    const double pde3 = value_pde(s3, p, baseline_schedule(), GridSpec::desk()).certainty_equivalent(0.0);
    const double pde1 = value_pde(s1, p, baseline_schedule(), GridSpec::desk()).certainty_equivalent(0.0);
    EXPECT_LT(std::abs(m3.ce - pde3), 3.0 * m3.stderr_ce) << m3.ce << " vs " << pde3;
    EXPECT_LT(std::abs(m1.ce - pde1), 3.0 * m1.stderr_ce) << m1.ce << " vs " << pde1;

    const GapEstimate g = relative_gap(m3, m1, gamma);
    EXPECT_NEAR(g.gap, 1.0 - m1.ce / m3.ce, 1e-15);
    EXPECT_LT(g.stderr_common, 0.5 * g.stderr_independent);
    EXPECT_LT(std::abs(g.gap - (1.0 - pde1 / pde3)), 4.0 * g.stderr_common);

    MonteCarloResult short_run = m1;
    short_run.utilities.pop_back();
    EXPECT_EQ(code_of([&] { relative_gap(m3, short_run, gamma); }), ErrorCode::DimensionMismatch);
}

TEST(MonteCarloTest, InvalidOptions) {
    const MarketParams p = MarketParams::paper_baseline();
    const auto s = StrategySpec::heuristic(StrategyKind::Pi1, 2.0);
    MonteCarloOptions o;
    o.n_paths = 1;
    EXPECT_EQ(code_of([&] { monte_carlo_ce(s, p, baseline_schedule(), 0.0, o); }), ErrorCode::InvalidArgument);
    o.n_paths = 10;
    o.dt = 0.0;
    EXPECT_EQ(code_of([&] { monte_carlo_ce(s, p, baseline_schedule(), 0.0, o); }), ErrorCode::InvalidArgument);
    o.dt = 0.1;
    EXPECT_EQ(code_of([&] { monte_carlo_ce(s, p, baseline_schedule(), -1.0, o); }), ErrorCode::InvalidArgument);
}

TEST(WelfareReportTest, CsvLayout) {
    WelfareReport rep;
    rep.rows.push_back({2.0, "pi3", 3.6496, 0.05497, "pde", 0.0, 0.25});
    rep.rows.push_back({2.0, "pi3", 3.66, 0.0551, "mc", 0.02, 3.5});
    std::ostringstream a, b;
    write_welfare_csv(a, rep);
    write_welfare_csv(b, rep, false);
    EXPECT_EQ(a.str(),
              "gamma,strategy,ce,irr,method,stderr,runtime_s\n2,pi3,3.6496,0.05497,pde,0,0.25\n"
              "2,pi3,3.66,0.0551,mc,0.02,3.5\n");
    EXPECT_EQ(b.str(),
              "gamma,strategy,ce,irr,method,stderr,runtime_s\n2,pi3,3.6496,0.05497,pde,0,\n"
              "2,pi3,3.66,0.0551,mc,0.02,\n");
    EXPECT_EQ(rep.find("pi3", "mc").ce, 3.66);
    EXPECT_EQ(code_of([&] { rep.find("pi1", "mc"); }), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace lifestyle
