#include "lifestyle/errors.hpp"
#include "lifestyle/market_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace lifestyle {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected lifestyle::Error";
    return ErrorCode::InvalidArgument;
}

TEST(MarketModelTest, BaselineCovarianceAssembledExactly) {
    const MarketParams p = MarketParams::paper_baseline();
    EXPECT_EQ(p.covariance(0, 0), 0.0025);
    EXPECT_EQ(p.covariance(0, 1), -0.000625);
    EXPECT_EQ(p.covariance(1, 0), -0.000625);
    EXPECT_EQ(p.covariance(1, 1), 0.0625);
    EXPECT_NO_THROW(validate_market(p));
}

TEST(MarketModelTest, ValidateRejectsNoExcessReturn) {
    MarketParams p = MarketParams::paper_baseline();
    p.drifts << 0.01, 0.01;
    EXPECT_EQ(code_of([&] { validate_market(p); }), ErrorCode::NoExcessReturn);
}

TEST(MarketModelTest, ValidateRejectsIndefiniteCovariance) {
    MarketParams p = MarketParams::paper_baseline();
    p.covariance << 1.0, 2.0, 2.0, 1.0;
    EXPECT_EQ(code_of([&] { validate_market(p); }), ErrorCode::NotPositiveDefinite);
}

TEST(MarketModelTest, ValidateRejectsDimensionMismatch) {
    MarketParams p = MarketParams::paper_baseline();
    p.covariance = Eigen::MatrixXd::Identity(3, 3) * 0.01;
    EXPECT_EQ(code_of([&] { validate_market(p); }), ErrorCode::DimensionMismatch);
    p.drifts.resize(0);
    p.covariance.resize(0, 0);
    EXPECT_EQ(code_of([&] { validate_market(p); }), ErrorCode::DimensionMismatch);
}

TEST(MarketModelTest, PresentValueOfBaselineSchedule) {
    const auto y = ContributionSchedule::uniform(40.0);
    // PV_0 = (1 - e^{-0.4}) / (0.01 · 40)
    EXPECT_NEAR(present_value(0.0, y, 0.01), (1.0 - std::exp(-0.4)) / 0.4, 1e-15);
    EXPECT_NEAR(present_value(0.0, y, 0.01), 0.82, 0.005);
    EXPECT_EQ(present_value(40.0, y, 0.01), 0.0);
    EXPECT_NEAR(present_value(15.0, y, 0.0), 25.0 / 40.0, 1e-15);
    EXPECT_EQ(code_of([&] { present_value(41.0, y, 0.01); }), ErrorCode::TimeOutOfRange);
    EXPECT_EQ(code_of([&] { present_value(-1.0, y, 0.01); }), ErrorCode::TimeOutOfRange);
}

TEST(MarketModelTest, PresentValueOfStepScheduleMatchesQuadrature) {
    const ContributionSchedule y({0.0, 5.0, 12.5, 30.0}, {0.02, 0.0, 0.05});
    const double r = 0.03;
    for (double t : {0.0, 2.0, 5.0, 7.0, 12.5, 20.0, 29.9}) {
        // Midpoint rule with 2e5 cells is accurate to ~1e-10 here.
        const int n = 200000;
        const double h = (30.0 - t) / n;
        double q = 0.0;
        for (int k = 0; k < n; ++k) {
            const double u = t + (k + 0.5) * h;
            q += y.rate_at(u) * std::exp(-r * (u - t)) * h;
        }
        EXPECT_NEAR(y.present_value(t, r), q, 2e-6) << "t=" << t;
    }
}

TEST(MarketModelTest, PresentValueIsLinearAndNonIncreasing) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> bp{0.0};
        std::vector<double> rates;
        const int n = 1 + static_cast<int>(u(rng) * 5);
        for (int k = 0; k < n; ++k) {
            bp.push_back(bp.back() + 0.5 + 10.0 * u(rng));
            rates.push_back(u(rng) < 0.2 ? 0.0 : u(rng));
        }
        const ContributionSchedule y(bp, rates);
        // With r > 0, PV rises across zero-contribution segments (dPV/dt = rPV - y),
        // so monotonicity is only checked for r = 0 here.
        const double r = (trial % 2 == 0) ? 0.0 : 0.05 * u(rng);
        const double c = 3.0 * u(rng);
        const auto yc = y.scaled(c);
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 50; ++k) {
            const double t = y.horizon() * k / 50.0;
            const double pv = y.present_value(t, r);
            EXPECT_NEAR(yc.present_value(t, r), c * pv, 1e-12 * (1.0 + c * pv));
            EXPECT_GE(pv, 0.0);
            if (r == 0.0) EXPECT_LE(pv, prev + 1e-14);
            prev = pv;
        }
        EXPECT_EQ(y.present_value(y.horizon(), r), 0.0);
    }
    // Constant rate: y >= r·PV_t always holds, so PV is non-increasing for any r >= 0.
    for (double r : {0.0, 0.01, 0.05, 0.2}) {
        const auto y = ContributionSchedule::uniform(30.0, 2.0);
        for (int k = 1; k <= 300; ++k) {
            EXPECT_LE(y.present_value(0.1 * k, r), y.present_value(0.1 * (k - 1), r) + 1e-15);
        }
    }
}

TEST(MarketModelTest, CapitalRatio) {
    const auto y = ContributionSchedule::uniform(40.0);
    const double pv0 = present_value(0.0, y, 0.01);
    EXPECT_NEAR(capital_ratio(0.0, 0.2, y, 0.01), 0.2 / (0.2 + pv0), 1e-15);
    EXPECT_NEAR(capital_ratio(0.0, 0.2, y, 0.01), 0.196, 0.001);
    EXPECT_EQ(capital_ratio(0.0, 0.0, y, 0.01), 0.0);
    EXPECT_EQ(capital_ratio(40.0, 0.3, y, 0.01), 1.0);
    double prev = 0.0;
    for (double w = 0.0; w < 5.0; w += 0.01) {
        const double a = capital_ratio(12.0, w, y, 0.01);
        EXPECT_GE(a, prev);
        prev = a;
    }
    EXPECT_EQ(code_of([&] { capital_ratio(0.0, -1.0, y, 0.01); }), ErrorCode::InvalidArgument);
}

TEST(MarketModelTest, ScheduleValidation) {
    EXPECT_EQ(code_of([] { ContributionSchedule({0.0, 1.0}, {-0.1}); }), ErrorCode::InvalidSchedule);
    EXPECT_EQ(code_of([] { ContributionSchedule({0.5, 1.0}, {0.1}); }), ErrorCode::InvalidSchedule);
    EXPECT_EQ(code_of([] { ContributionSchedule({0.0, 1.0, 1.0}, {0.1, 0.2}); }), ErrorCode::InvalidSchedule);
    EXPECT_EQ(code_of([] { ContributionSchedule::uniform(0.0); }), ErrorCode::InvalidSchedule);
}

TEST(MarketModelTest, AccumulatedValue) {
    const auto y = ContributionSchedule::uniform(40.0);
    EXPECT_NEAR(y.accumulated_value(0.0), 1.0, 1e-15);
    EXPECT_NEAR(y.accumulated_value(0.05), (std::exp(2.0) - 1.0) / 0.05 / 40.0, 1e-12);
}

TEST(MarketModelTest, PvCurveSamples) {
    const auto y = ContributionSchedule::uniform(40.0);
    const PvCurve pv(y, 0.01, {0.0, 10.0, 40.0});
    ASSERT_EQ(pv.values().size(), 3u);
    EXPECT_EQ(pv.values()[2], 0.0);
    EXPECT_DOUBLE_EQ(pv(10.0), pv.values()[1]);
}

}  // namespace
}  // namespace lifestyle
