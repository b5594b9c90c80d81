#include "lifestyle/welfare_evaluator.hpp"

#include "lifestyle/errors.hpp"
#include "lifestyle/utility.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace lifestyle {

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Pi0: return "pi0";
        case StrategyKind::Pi1: return "pi1";
        case StrategyKind::Pi2: return "pi2";
        case StrategyKind::Pi3: return "pi3";
        case StrategyKind::Optimal: return "optimal";
        case StrategyKind::FixedWeights: return "fixed";
    }
    return "unknown";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
    for (StrategyKind k : {StrategyKind::Pi0, StrategyKind::Pi1, StrategyKind::Pi2, StrategyKind::Pi3,
                           StrategyKind::Optimal, StrategyKind::FixedWeights}) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + name + "'");
}

StrategySpec StrategySpec::heuristic(StrategyKind kind, double gamma) {
    StrategySpec s;
    s.kind = kind;
    s.gamma = gamma;
    return s;
}

StrategySpec StrategySpec::fixed(Eigen::VectorXd weights, double gamma) {
    StrategySpec s;
    s.kind = StrategyKind::FixedWeights;
    s.gamma = gamma;
    s.fixed_weights = std::move(weights);
    return s;
}

StrategySpec StrategySpec::optimal(std::shared_ptr<const RiskAversionSurface> surface) {
    StrategySpec s;
    s.kind = StrategyKind::Optimal;
    s.gamma = surface ? surface->gamma() : 0.0;
    s.surface = std::move(surface);
    return s;
}

void StrategySpec::validate(const MarketParams& params) const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    if (kind == StrategyKind::FixedWeights) {
        if (fixed_weights.size() != params.dimension()) {
            throw Error(ErrorCode::DimensionMismatch, "fixed weights do not match the number of assets");
        }
        if ((fixed_weights.array() < 0.0).any() || fixed_weights.sum() > 1.0 + 1e-12) {
            throw Error(ErrorCode::InvalidArgument, "fixed weights must satisfy w >= 0 and sum(w) <= 1");
        }
    }
    if (kind == StrategyKind::Optimal) {
        if (!surface) throw Error(ErrorCode::InvalidArgument, "optimal strategy needs a risk-aversion surface");
        if (surface->gamma() != gamma) throw Error(ErrorCode::IncompatibleGrid, "surface gamma differs from strategy");
    }
}

StrategyPolicy::StrategyPolicy(StrategySpec spec, const MarketParams& params, const ContributionSchedule&)
    : spec_(std::move(spec)), params_(validate_market(params)) {
    spec_.validate(params_);
    cqp_ = std::make_shared<CqpAllocator>(params_);
    switch (spec_.kind) {
        case StrategyKind::Pi0: constant_ = pi0(*cqp_, spec_.gamma).weights; break;
        case StrategyKind::Pi1: constant_ = pi1(*cqp_, spec_.gamma).weights; break;
        case StrategyKind::FixedWeights: constant_ = spec_.fixed_weights; break;
        case StrategyKind::Pi2: pi1_ = pi1(*cqp_, spec_.gamma).weights; break;
        case StrategyKind::Pi3: curve_ = std::make_shared<UnitBudgetCurve>(*cqp_); break;
        case StrategyKind::Optimal: {
            const MarketParams& sp = spec_.surface->params();
            if (sp.drifts != params_.drifts || sp.covariance != params_.covariance ||
                sp.rate_riskfree != params_.rate_riskfree) {
                throw Error(ErrorCode::IncompatibleGrid, "surface was solved for a different market");
            }
            break;
        }
    }
}

namespace {

double capital_ratio_from_pv(double x, double pv) { return pv <= 0.0 ? 1.0 : x / (x + pv); }

constexpr double kRhoFloor = 1e-8;  // π̂(1, ρ) at α = 0, as in pi3()

}  // namespace

void StrategyPolicy::weights(double t, double x, double pv, Eigen::VectorXd& out) const {
    if (constant_) {
        out = *constant_;
        return;
    }
    switch (spec_.kind) {
        case StrategyKind::Pi2: {
            const double alpha = capital_ratio_from_pv(x, pv);
            out = pi1_ / std::max(pi1_.sum(), alpha);
            return;
        }
        case StrategyKind::Pi3: {
            const double alpha = capital_ratio_from_pv(x, pv);
            curve_->weights(std::max(alpha * spec_.gamma, kRhoFloor), out);
            return;
        }
        case StrategyKind::Optimal: {
            const double z = x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
            spec_.surface->curve().weights((*spec_.surface)(t, z), out);
            return;
        }
        default: break;
    }
    throw Error(ErrorCode::InvariantViolated, "unhandled strategy kind");
}

StrategyPolicy::Moments StrategyPolicy::moments(double t, double x, double pv) const {
    if (spec_.kind == StrategyKind::Pi3 || spec_.kind == StrategyKind::Optimal) {
        double rho;
        if (spec_.kind == StrategyKind::Pi3) {
            rho = std::max(capital_ratio_from_pv(x, pv) * spec_.gamma, kRhoFloor);
            const auto p = (*curve_)(rho);
            return {p.mean, p.variance};
        }
        const double z = x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
        rho = (*spec_.surface)(t, z);
        const auto p = spec_.surface->curve()(rho);
        return {p.mean, p.variance};
    }
    Eigen::VectorXd w;
    weights(t, x, pv, w);
    return {cqp_->portfolio_mean(w), cqp_->portfolio_variance(w)};
}

ValueCurve::ValueCurve(double z_min, double dz, std::vector<double> log_ce, double gamma)
    : z_min_(z_min), dz_(dz), psi_(std::move(log_ce)), gamma_(gamma) {
    if (psi_.size() < 2) throw Error(ErrorCode::InsufficientPoints, "value curve needs two nodes");
}

double ValueCurve::log_certainty(double x) const {
    if (!(x > 0.0)) throw Error(ErrorCode::OutOfDomain, "wealth must be > 0");
    const double s = (std::log(x) - z_min_) / dz_;
    const double n = static_cast<double>(psi_.size() - 1);
    if (s < -1e-9 || s > n + 1e-9) throw Error(ErrorCode::OutOfDomain, "ln x outside the value grid");
    const double sc = std::clamp(s, 0.0, n);
    const std::size_t j = std::min(static_cast<std::size_t>(sc), psi_.size() - 2);
    const double w = sc - j;
    return psi_[j] + w * (psi_[j + 1] - psi_[j]);
}

double ValueCurve::value(double x) const { return crra_utility_of_log(log_certainty(x), gamma_); }

double ValueCurve::certainty_equivalent(double x) const {
    if (x > 0.0) return std::exp(log_certainty(x));
    if (x < 0.0) throw Error(ErrorCode::OutOfDomain, "wealth must be >= 0");
    const auto xs = default_extrapolation_wealths();
    std::vector<double> vs;
    for (double xi : xs) vs.push_back(value(xi));
    return crra_inverse(ols_intercept(xs, vs), gamma_);
}

ValueCurve value_pde(const StrategySpec& strategy, const MarketParams& params_in,
                     const ContributionSchedule& schedule, const GridSpec& grid) {
    const MarketParams params = validate_market(params_in);
    grid.validate();
    const StrategyPolicy policy(strategy, params, schedule);
    if (std::abs(schedule.horizon() - grid.t_max) > 1e-9 * grid.t_max) {
        throw Error(ErrorCode::IncompatibleGrid, "grid t_max differs from the schedule horizon");
    }
    const double gamma = strategy.gamma;
    const double q = 1.0 - gamma;
    const double r = params.rate_riskfree;
    const int N = grid.z_count();
    const double dz = grid.dz;
    const double idz = 1.0 / dz;
    const double idz2 = idz * idz;
    const std::vector<double> t = grid.time_nodes();
    const int K = static_cast<int>(t.size()) - 1;

    std::vector<double> xz(N), emz(N);
    for (int j = 0; j < N; ++j) {
        xz[j] = std::exp(grid.z_at(j));
        emz[j] = 1.0 / xz[j];
    }
    std::vector<double> psi(N), prev(N), prev2(N), hist(N), B(N), V(N);
    for (int j = 0; j < N; ++j) psi[j] = grid.z_at(j);
    prev = psi;
    std::vector<double> lo(N), di(N), up(N), res(N);
    double h_prev = 0.0;

    for (int k = K - 1; k >= 0; --k) {
        const double h = t[k + 1] - t[k];
        const double y = schedule.rate_at(0.5 * (t[k] + t[k + 1]));
        const double pv = schedule.present_value(t[k], r);
        for (int j = 0; j < N; ++j) {
            const auto mv = policy.moments(t[k], xz[j], pv);
            if (!(mv.variance >= 1e-10)) {
                std::ostringstream os;
                os << "diffusion coefficient " << mv.variance << " at t = " << t[k] << ", z = " << grid.z_at(j);
                throw Error(ErrorCode::DiffusionDegenerate, os.str());
            }
            B[j] = y * emz[j] + r + mv.mean - 0.5 * mv.variance;
            V[j] = mv.variance;
        }
        double c0 = 1.0;
        if (grid.scheme == TimeScheme::Bdf2 && k < K - 1) {
            const double w = h / h_prev;
            c0 = (1.0 + 2.0 * w) / (1.0 + w);
            for (int j = 0; j < N; ++j) hist[j] = (1.0 + w) * prev[j] - w * w / (1.0 + w) * prev2[j];
        } else {
            hist = prev;
        }

        bool converged = false;
        int it = 0;
        for (; it < grid.max_newton && !converged; ++it) {
            for (int j = 0; j < N; ++j) {
                // Linear extrapolation at both ends: Ψ_zz = 0 there.
                const double pf = j < N - 1 ? (psi[j + 1] - psi[j]) * idz : (psi[j] - psi[j - 1]) * idz;
                const double pb = j > 0 ? (psi[j] - psi[j - 1]) * idz : pf;
                const bool interior = j > 0 && j < N - 1;
                const double pc = 0.5 * (pf + pb);
                const double speed = B[j] + V[j] * q * pc;
                // Central differences where diffusion controls the cell (monotone for
                // |speed| dz <= v); upwind elsewhere.
                const bool central = interior && std::abs(speed) * dz <= V[j];
                const bool forward = !central && ((j == 0) || (j < N - 1 && speed >= 0.0));
                const double p = central ? pc : (forward ? pf : pb);
                const double hp = B[j] + V[j] * q * p;
                const double d2 = interior ? (psi[j + 1] - 2.0 * psi[j] + psi[j - 1]) * idz2 : 0.0;
                res[j] = c0 * psi[j] - hist[j] - h * (B[j] * p + 0.5 * V[j] * q * p * p + 0.5 * V[j] * d2);
                lo[j] = up[j] = 0.0;
                di[j] = c0;
                // ∂p/∂Ψ
                if (central) {
                    up[j] -= 0.5 * h * hp * idz;
                    lo[j] += 0.5 * h * hp * idz;
                } else if (forward && j < N - 1) {
                    up[j] -= h * hp * idz;
                    di[j] += h * hp * idz;
                } else {
                    di[j] -= h * hp * idz;
                    lo[j] += h * hp * idz;
                }
                if (interior) {
                    lo[j] -= h * 0.5 * V[j] * idz2;
                    up[j] -= h * 0.5 * V[j] * idz2;
                    di[j] += h * V[j] * idz2;
                }
            }
            // thomas
            for (int j = 1; j < N; ++j) {
                const double m = lo[j] / di[j - 1];
                di[j] -= m * up[j - 1];
                res[j] -= m * res[j - 1];
            }
            res[N - 1] /= di[N - 1];
            for (int j = N - 2; j >= 0; --j) res[j] = (res[j] - up[j] * res[j + 1]) / di[j];
            double worst = 0.0;
            for (int j = 0; j < N; ++j) {
                psi[j] -= res[j];
                worst = std::max(worst, std::abs(res[j]));
            }
            if (!std::isfinite(worst)) break;
            converged = worst <= grid.newton_tol;
        }
        if (!converged) {
            std::ostringstream os;
            os << "value PDE Newton did not converge at t = " << t[k];
            throw Error(ErrorCode::NonConvergence, os.str());
        }
        prev2.swap(prev);
        prev = psi;
        h_prev = h;
    }
    return ValueCurve(grid.z_min, dz, std::move(psi), gamma);
}

double certainty_equivalent(double expected_utility, double gamma) { return crra_inverse(expected_utility, gamma); }

double irr(double ce, const ContributionSchedule& schedule, double lo, double hi) {
    if (!(ce > 0.0)) throw Error(ErrorCode::InvalidArgument, "CE must be > 0");
    if (!(schedule.total() > 0.0)) throw Error(ErrorCode::InvalidArgument, "schedule has no contributions");
    auto F = [&](double rho) { return schedule.accumulated_value(rho) - ce; };
    if (!(F(lo) <= 0.0 && F(hi) >= 0.0)) {
        lo *= 2.0;
        hi *= 2.0;
        if (!(F(lo) <= 0.0 && F(hi) >= 0.0)) {
            std::ostringstream os;
            os << "CE " << ce << " not attainable with a rate in [" << lo << ", " << hi << "]";
            throw Error(ErrorCode::BracketFailure, os.str());
        }
    }
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (F(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double riskless_terminal_wealth(double x0, const ContributionSchedule& schedule, double r) {
    const double T = schedule.horizon();
    return std::exp(r * T) * (x0 + schedule.present_value(0.0, r));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Pairwise (cascade) summation; the split points depend only on n, so the
// result is independent of how the values were produced.
double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 64) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double phi1(double g) { return g == 0.0 ? 1.0 : std::expm1(g) / g; }

}  // namespace

MonteCarloResult monte_carlo_ce(const StrategySpec& strategy, const MarketParams& params_in,
                                const ContributionSchedule& schedule, double x0, const MonteCarloOptions& options) {
    const MarketParams params = validate_market(params_in);
    if (options.n_paths < 2) throw Error(ErrorCode::InvalidArgument, "n_paths must be >= 2");
    if (!(options.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
    if (!(x0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "x0 must be >= 0");
    const StrategyPolicy policy(strategy, params, schedule);
    const double gamma = strategy.gamma;
    const double r = params.rate_riskfree;
    const double T = schedule.horizon();
    const int d = static_cast<int>(params.dimension());
    const Eigen::MatrixXd L = params.covariance.llt().matrixL();
    const Eigen::VectorXd excess = params.excess_returns();

    bool no_contributions = true;
    for (double y : schedule.rates()) no_contributions = no_contributions && y == 0.0;
    // Constant weights without contributions: wealth is exactly lognormal.
    const int n_steps = (policy.is_constant() && no_contributions)
                            ? 1
                            : std::max(1, static_cast<int>(std::ceil(T / options.dt - 1e-9)));
    const double h = T / n_steps;
    const double sqh = std::sqrt(h);
    std::vector<double> rate(n_steps), pv(n_steps);
    for (int i = 0; i < n_steps; ++i) {
        rate[i] = schedule.rate_at((i + 0.5) * h);
        pv[i] = schedule.present_value(i * h, r);
    }

    MonteCarloResult out;
    out.n_paths = options.n_paths;
    out.utilities.assign(static_cast<std::size_t>(options.n_paths), 0.0);
    bool negative = false;

    auto run = [&](long begin, long end) {
        Eigen::VectorXd w(d), lw(d), eps(d);
        std::normal_distribution<double> normal(0.0, 1.0);
        double drift_c = 0.0;
        if (policy.is_constant()) {
            policy.weights(0.0, x0, pv[0], w);
            lw = L.transpose() * w;
            drift_c = (r + excess.dot(w) - 0.5 * lw.squaredNorm()) * h;
        }
        for (long p = begin; p < end; ++p) {
            std::mt19937_64 rng(splitmix64(options.seed ^ splitmix64(static_cast<std::uint64_t>(p))));
            double W = x0;
            for (int i = 0; i < n_steps; ++i) {
                double drift = drift_c;
                if (!policy.is_constant()) {
                    policy.weights(i * h, W, pv[i], w);
                    lw.noalias() = L.transpose() * w;
                    drift = (r + excess.dot(w) - 0.5 * lw.squaredNorm()) * h;
                }
                for (int a = 0; a < d; ++a) eps(a) = normal(rng);
                const double g = drift + sqh * lw.dot(eps);
                // Contributions earn the step's growth rate: ∫₀ʰ y e^{g(h-s)/h} ds = y h φ₁(g).
                W = W * std::exp(g) + rate[i] * h * phi1(g);
            }
            if (!(W > 0.0) && !(W == 0.0 && x0 == 0.0 && no_contributions)) negative = true;
            out.utilities[static_cast<std::size_t>(p)] = crra_utility(W, gamma);
        }
    };

    int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, 64);
    if (threads == 1 || options.n_paths < 1000) {
        run(0, options.n_paths);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (options.n_paths + threads - 1) / threads;
        for (int k = 0; k < threads; ++k) {
            const long b = k * chunk;
            const long e = std::min(options.n_paths, b + chunk);
            if (b < e) pool.emplace_back(run, b, e);
        }
        for (auto& th : pool) th.join();
    }
    if (negative) {
        throw Error(ErrorCode::NegativeWealth, "non-positive terminal wealth; dt_sim is too coarse");
    }

    // Shifted by the first sample so identical utilities give exactly zero variance.
    const std::size_t n = out.utilities.size();
    const double u0 = out.utilities.front();
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = out.utilities[i] - u0;
    const double shift = pairwise_sum(dev.data(), n) / n;
    const double mean = u0 + shift;
    for (std::size_t i = 0; i < n; ++i) dev[i] = (dev[i] - shift) * (dev[i] - shift);
    const double var = pairwise_sum(dev.data(), n) / (n - 1);
    out.mean_utility = mean;
    out.stderr_utility = std::sqrt(var / n);
    out.ce = certainty_equivalent(mean, gamma);
    out.stderr_ce = out.stderr_utility * std::pow(out.ce, gamma);  // 1/U'(CE)
    return out;
}

GapEstimate relative_gap(const MonteCarloResult& a, const MonteCarloResult& b, double gamma) {
    if (a.utilities.size() != b.utilities.size() || a.utilities.size() < 2) {
        throw Error(ErrorCode::DimensionMismatch, "runs must have the same number of paths");
    }
    const std::size_t n = a.utilities.size();
    std::vector<double> caa(n), cbb(n), cab(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a.utilities[i] - a.mean_utility;
        const double db = b.utilities[i] - b.mean_utility;
        caa[i] = da * da;
        cbb[i] = db * db;
        cab[i] = da * db;
    }
    const double vaa = pairwise_sum(caa.data(), n) / (n - 1);
    const double vbb = pairwise_sum(cbb.data(), n) / (n - 1);
    const double vab = pairwise_sum(cab.data(), n) / (n - 1);
    // gap = 1 - CE_b/CE_a, dCE/dEU = CE^γ
    const double ga = b.ce / (a.ce * a.ce) * std::pow(a.ce, gamma);
    const double gb = -1.0 / a.ce * std::pow(b.ce, gamma);
    GapEstimate g;
    g.gap = 1.0 - b.ce / a.ce;
    g.stderr_common = std::sqrt(std::max(0.0, ga * ga * vaa + gb * gb * vbb + 2.0 * ga * gb * vab) / n);
    g.stderr_independent = std::sqrt((ga * ga * vaa + gb * gb * vbb) / n);
    return g;
}

std::string to_string(WelfareMethod method) {
    switch (method) {
        case WelfareMethod::Pde: return "pde";
        case WelfareMethod::MonteCarlo: return "mc";
        case WelfareMethod::Both: return "both";
    }
    return "unknown";
}

WelfareMethod welfare_method_from_string(const std::string& name) {
    if (name == "pde") return WelfareMethod::Pde;
    if (name == "mc") return WelfareMethod::MonteCarlo;
    if (name == "both") return WelfareMethod::Both;
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "' (pde, mc, both)");
}

const WelfareRow& WelfareReport::find(const std::string& strategy, const std::string& method) const {
    for (const auto& row : rows) {
        if (row.strategy == strategy && row.method == method) return row;
    }
    throw Error(ErrorCode::InvalidArgument, "no row for " + strategy + "/" + method);
}

WelfareReport compare_strategies(const std::vector<StrategySpec>& strategies, const MarketParams& params,
                                 const ContributionSchedule& schedule, WelfareMethod method,
                                 const WelfareOptions& options) {
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point s) {
        return std::chrono::duration<double>(clock::now() - s).count();
    };
    WelfareReport report;
    auto add = [&](const StrategySpec& s, double ce, const std::string& m, double se, double rt) {
        report.rows.push_back({s.gamma, s.name(), ce, irr(ce, schedule), m, se, rt});
    };
    const bool pde = method != WelfareMethod::MonteCarlo;
    const bool mc = method != WelfareMethod::Pde;
    for (const StrategySpec& s : strategies) {
        s.validate(params);
        const bool riskless = s.kind == StrategyKind::FixedWeights && s.fixed_weights.isZero(0.0);
        if (pde) {
            const auto start = clock::now();
            if (riskless) {
                add(s, riskless_terminal_wealth(options.x0, schedule, params.rate_riskfree), "exact", 0.0,
                    seconds_since(start));
            } else {
                const ValueCurve vc = value_pde(s, params, schedule, options.grid);
                add(s, vc.certainty_equivalent(options.x0), "pde", 0.0, seconds_since(start));
            }
            if (s.kind == StrategyKind::Optimal) {
                const auto start2 = clock::now();
                double ce;
                if (options.x0 > 0.0) {
                    ce = characteristic_terminal_wealth(*s.surface, 0.0, options.x0);
                } else {
                    const ValueSurface u = solve_value_u(*s.surface);
                    ce = crra_inverse(value_at_zero_extrapolation(u, default_extrapolation_wealths()), s.gamma);
                }
                add(s, ce, "characteristics", 0.0, seconds_since(start2));
            }
        }
        if (mc) {
            const auto start = clock::now();
            const MonteCarloResult res = monte_carlo_ce(s, params, schedule, options.x0, options.mc);
            add(s, res.ce, "mc", res.stderr_ce, seconds_since(start));
        }
    }
    return report;
}

void write_welfare_csv(std::ostream& os, const WelfareReport& report, bool include_runtime) {
    os << "gamma,strategy,ce,irr,method,stderr,runtime_s\n";
    for (const auto& r : report.rows) {
        std::ostringstream line;
        line << std::setprecision(12) << r.gamma << ',' << r.strategy << ',' << r.ce << ',' << r.irr << ','
             << r.method << ',' << r.stderr_ce << ',';
        if (include_runtime) line << std::setprecision(4) << r.runtime_s;
        os << line.str() << '\n';
    }
}

}  // namespace lifestyle
