#include "lifestyle/hjb_solver.hpp"

#include "lifestyle/errors.hpp"
#include "lifestyle/utility.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace lifestyle {

GridSpec GridSpec::desk(double horizon) {
    GridSpec g;
    g.t_max = horizon;
    return g;
}

GridSpec GridSpec::paper(double horizon) {
    GridSpec g;
    g.t_max = horizon;
    g.dt = 0.01;
    g.dz = 0.001;
    g.store_t_stride = 5;
    g.store_z_stride = 10;
    return g;
}

void GridSpec::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "grid: " + m); };
    if (!(t_max > 0.0) || !std::isfinite(t_max)) fail("t_max must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
    if (!(dz > 0.0) || !std::isfinite(dz)) fail("dz must be positive");
    if (!(z_min < z_max) || !std::isfinite(z_min) || !std::isfinite(z_max)) fail("need z_min < z_max");
    if (!(first_step > 0.0) || first_step > dt) fail("first_step must lie in (0, dt]");
    if (!(step_growth > 1.0)) fail("step_growth must exceed 1");
    if (store_t_stride < 1 || store_z_stride < 1) fail("strides must be >= 1");
    if (!(robin_kappa >= 0.0)) fail("robin_kappa must be >= 0");
    if (max_newton < 1 || !(newton_tol > 0.0)) fail("invalid Newton controls");
    const double cells = (z_max - z_min) / dz;
    if (std::abs(cells - std::round(cells)) > 1e-6 * cells) fail("(z_max - z_min)/dz must be an integer");
    if ((z_count() - 1) % store_z_stride != 0) fail("store_z_stride must divide the number of z cells");
    const double slices = t_max / (dt * store_t_stride) + dense_window / first_step;
    const double bytes = 8.0 * (std::min(slices, t_max / dt + 200.0) + 2.0) *
                         ((z_count() - 1) / store_z_stride + 1);
    if (bytes > static_cast<double>(memory_budget)) fail("stored surface exceeds the memory budget");
}

int GridSpec::z_count() const { return static_cast<int>(std::lround((z_max - z_min) / dz)) + 1; }

std::vector<double> GridSpec::time_nodes() const {
    std::vector<double> tail;  // step lengths from T backwards
    double h = first_step;
    double tail_len = 0.0;
    while (h < dt && tail_len + h < t_max) {
        tail.push_back(h);
        tail_len += h;
        h *= step_growth;
    }
    const double uniform_len = t_max - tail_len;
    const int n = std::max(1, static_cast<int>(std::ceil(uniform_len / dt - 1e-9)));
    std::vector<double> t;
    t.reserve(n + tail.size() + 1);
    for (int k = 0; k <= n; ++k) t.push_back(uniform_len * k / n);
    double cur = uniform_len;
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) {
        cur += *it;
        t.push_back(cur);
    }
    t.back() = t_max;
    return t;
}

GridTable::GridTable(std::vector<double> times, double z_min, double dz, int nz, std::vector<double> values)
    : times_(std::move(times)), z_min_(z_min), dz_(dz), nz_(nz), values_(std::move(values)) {
    if (times_.size() < 2 || nz_ < 2 || values_.size() != times_.size() * static_cast<std::size_t>(nz_)) {
        throw Error(ErrorCode::IncompatibleGrid, "table dimensions do not match its values");
    }
}

int GridTable::bracket(double t) const {
    const double eps = 1e-9 * (1.0 + std::abs(times_.back()));
    if (!(t >= times_.front() - eps && t <= times_.back() + eps)) {
        std::ostringstream os;
        os << "t = " << t << " outside [" << times_.front() << ", " << times_.back() << "]";
        throw Error(ErrorCode::OutOfDomain, os.str());
    }
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    int k = static_cast<int>(it - times_.begin()) - 1;
    return std::clamp(k, 0, nt() - 2);
}

double GridTable::operator()(double t, double z) const {
    const int k = bracket(t);
    const double wt = std::clamp((t - times_[k]) / (times_[k + 1] - times_[k]), 0.0, 1.0);
    double s = (z - z_min_) / dz_;
    s = std::clamp(s, 0.0, static_cast<double>(nz_ - 1));
    int j = std::min(static_cast<int>(s), nz_ - 2);
    const double wz = s - j;
    const double* a = row(k);
    const double* b = row(k + 1);
    const double lo = a[j] + wz * (a[j + 1] - a[j]);
    const double hi = b[j] + wz * (b[j + 1] - b[j]);
    return lo + wt * (hi - lo);
}

RiskAversionSurface::RiskAversionSurface(GridTable table, double gamma, MarketParams params,
                                         ContributionSchedule schedule, GridSpec grid)
    : table_(std::move(table)),
      gamma_(gamma),
      params_(std::move(params)),
      schedule_(std::move(schedule)),
      grid_(grid),
      cqp_(std::make_shared<CqpAllocator>(params_)),
      curve_(std::make_shared<UnitBudgetCurve>(*cqp_)) {}

namespace {

// Solves the tridiagonal system (l, d, u) x = b in place (b <- x).
void thomas(const std::vector<double>& l, std::vector<double>& d, const std::vector<double>& u,
            std::vector<double>& b) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = l[i] / d[i - 1];
        d[i] -= m * u[i - 1];
        b[i] -= m * b[i - 1];
    }
    b[n - 1] /= d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) b[i] = (b[i] - u[i] * b[i + 1]) / d[i];
}

struct NodeEval {
    double G, Gp, Gpp, F, Fp;
};

}  // namespace

RiskAversionSurface solve_rho(const MarketParams& params_in, const ContributionSchedule& schedule, double gamma,
                              const GridSpec& grid) {
    const auto start = std::chrono::steady_clock::now();
    const MarketParams params = validate_market(params_in);
    grid.validate();
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    if (std::abs(schedule.horizon() - grid.t_max) > 1e-9 * grid.t_max) {
        throw Error(ErrorCode::IncompatibleGrid, "grid t_max differs from the schedule horizon");
    }

    const CqpAllocator cqp(params);
    const UnitBudgetCurve curve(cqp);
    const double r = params.rate_riskfree;
    const int N = grid.z_count();
    const double dz = grid.dz;
    const double idz = 1.0 / dz;
    const double idz2 = idz * idz;
    const std::vector<double> t = grid.time_nodes();
    const int K = static_cast<int>(t.size()) - 1;

    std::vector<double> emz(N + 1);
    for (int j = 0; j <= N; ++j) emz[j] = std::exp(-grid.z_at(j));

    // Stored slices.
    std::vector<char> keep(t.size(), 0);
    for (int k = 0; k <= K; ++k) {
        keep[k] = (k == 0 || k == K || k % grid.store_t_stride == 0 || t[K] - t[k] <= grid.dense_window + 1e-12);
    }
    const int zs = grid.store_z_stride;
    const int nz_store = (N - 1) / zs + 1;
    std::vector<std::vector<double>> slices(t.size());
    auto store = [&](int k, const std::vector<double>& rho) {
        if (!keep[k]) return;
        std::vector<double> s(nz_store);
        for (int j = 0; j < nz_store; ++j) s[j] = rho[j * zs];
        slices[k] = std::move(s);
    };

    std::vector<double> rho(N, gamma), prev(N, gamma), prev2(N, gamma), hist(N);
    std::vector<double> a(N + 1), lo(N), di(N), up(N), res(N);
    std::vector<NodeEval> ev(N);
    store(K, rho);

    SolveStats stats;
    stats.rho_min = stats.rho_max = gamma;
    const double kappa = grid.robin_kappa;
    const bool relax = grid.left_boundary == LeftBoundary::RelaxToGamma;
    double h_prev = 0.0;

    for (int k = K - 1; k >= 0; --k) {
        const double h = t[k + 1] - t[k];
        const double y = schedule.rate_at(0.5 * (t[k] + t[k + 1]));
        for (int j = 0; j <= N; ++j) a[j] = y * emz[j] + r;
        // Proportional Robin coefficient κ·PV/(x + PV): exact for the riskless
        // solution ρ = γx/(x + PV), and Neumann once no contributions remain.
        const double pv = schedule.present_value(t[k], r);
        const double kappa_eff = relax ? kappa : kappa * pv / (std::exp(grid.z_min) + pv);

        // History term: c0 ρ^{n+1} - hist = h L(ρ^{n+1}).
        double c0 = 1.0;
        const bool bdf2 = grid.scheme == TimeScheme::Bdf2 && k < K - 1;
        if (bdf2) {
            const double w = h / h_prev;
            c0 = (1.0 + 2.0 * w) / (1.0 + w);
            for (int j = 0; j < N; ++j) hist[j] = (1.0 + w) * prev[j] - w * w / (1.0 + w) * prev2[j];
        } else {
            hist = prev;
        }

        int it = 0;
        bool converged = false;
        for (; it < grid.max_newton && !converged; ++it) {
            for (int j = 0; j < N; ++j) {
                const auto p = curve(rho[j]);
                NodeEval& e = ev[j];
                e.G = p.g;
                e.Gp = p.g_prime;
                e.Gpp = p.g_second;
                e.F = a[j] * rho[j] - (1.0 - rho[j]) * p.g;
                e.Fp = a[j] + p.g - (1.0 - rho[j]) * p.g_prime;
            }
            // Left boundary via the ghost value G_{-1} = G_1 - 2 dz g'(ρ_0) β(ρ_0).
            {
                const double beta = relax ? kappa * (gamma - rho[0]) : kappa_eff * rho[0];
                const double dbeta = relax ? -kappa : kappa_eff;
                const double D = (2.0 * ev[1].G - 2.0 * ev[0].G - 2.0 * dz * ev[0].Gp * beta) * idz2;
                const double dD0 = (-2.0 * ev[0].Gp - 2.0 * dz * (ev[0].Gpp * beta + ev[0].Gp * dbeta)) * idz2;
                const double dD1 = 2.0 * ev[1].Gp * idz2;
                const double A = (ev[1].F - ev[0].F) * idz;
                res[0] = c0 * rho[0] - hist[0] - h * (-D + A);
                lo[0] = 0.0;
                di[0] = c0 - h * (-dD0 - ev[0].Fp * idz);
                up[0] = -h * (-dD1 + ev[1].Fp * idz);
            }
            for (int j = 1; j < N - 1; ++j) {
                const double D = (ev[j + 1].G - 2.0 * ev[j].G + ev[j - 1].G) * idz2;
                const double A = (ev[j + 1].F - ev[j].F) * idz;
                res[j] = c0 * rho[j] - hist[j] - h * (-D + A);
                lo[j] = h * ev[j - 1].Gp * idz2;
                di[j] = c0 - 2.0 * h * ev[j].Gp * idz2 + h * ev[j].Fp * idz;
                up[j] = h * ev[j + 1].Gp * idz2 - h * ev[j + 1].Fp * idz;
            }
            // Right boundary: reflected ghost for diffusion, zero-gradient inflow for advection.
            {
                const int j = N - 1;
                const double D = 2.0 * (ev[j - 1].G - ev[j].G) * idz2;
                const double A = (a[j + 1] - a[j]) * rho[j] * idz;
                res[j] = c0 * rho[j] - hist[j] - h * (-D + A);
                lo[j] = 2.0 * h * ev[j - 1].Gp * idz2;
                di[j] = c0 - 2.0 * h * ev[j].Gp * idz2 - h * (a[j + 1] - a[j]) * idz;
                up[j] = 0.0;
            }
            thomas(lo, di, up, res);  // res <- Newton step δ (J δ = R)

            double lambda = 1.0;
            for (int j = 0; j < N; ++j) {
                const double next = rho[j] - res[j];
                if (next < 0.1 * rho[j]) lambda = std::min(lambda, 0.9 * rho[j] / res[j]);
            }
            double worst = 0.0;
            for (int j = 0; j < N; ++j) {
                rho[j] -= lambda * res[j];
                worst = std::max(worst, std::abs(res[j]) / rho[j]);
            }
            if (!std::isfinite(worst)) break;
            converged = lambda == 1.0 && worst <= grid.newton_tol;
        }
        if (!converged) {
            std::ostringstream os;
            os << "Newton did not converge at t = " << t[k] << " after " << it << " iterations";
            throw Error(ErrorCode::NonConvergence, os.str());
        }
        stats.newton_iterations += it;
        stats.max_newton_per_step = std::max(stats.max_newton_per_step, it);
        for (int j = 0; j < N; ++j) {
            stats.rho_min = std::min(stats.rho_min, rho[j]);
            stats.rho_max = std::max(stats.rho_max, rho[j]);
        }
        if (!(stats.rho_min > 0.0) || !(stats.rho_max <= gamma + 1e-6)) {
            std::ostringstream os;
            os << "rho left (0, gamma] at t = " << t[k] << ": range [" << stats.rho_min << ", " << stats.rho_max
               << "]";
            throw Error(ErrorCode::InvariantViolated, os.str());
        }
        store(k, rho);
        prev2.swap(prev);
        prev = rho;
        h_prev = h;
    }
    stats.time_steps = K;

    std::vector<double> times;
    std::vector<double> values;
    for (int k = 0; k <= K; ++k) {
        if (!keep[k]) continue;
        times.push_back(t[k]);
        values.insert(values.end(), slices[k].begin(), slices[k].end());
    }
    RiskAversionSurface out(GridTable(std::move(times), grid.z_min, dz * zs, nz_store, std::move(values)), gamma,
                            params, schedule, grid);
    stats.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.stats = stats;
    return out;
}

namespace {

// X(t_b) for dX/dt = y(t) + (r + g(ρ(t, ln X)))X from X(t_a) = x, RK4 split at
// schedule breakpoints.
double advance_characteristic(const RiskAversionSurface& s, double ta, double tb, double x, double max_step) {
    const double r = s.params().rate_riskfree;
    const auto& bp = s.schedule().breakpoints();
    const auto& curve = s.curve();
    const auto& tab = s.table();
    auto rhs = [&](double tt, double xx, double y) {
        const double rho = tab(tt, std::log(xx));
        return y + (r + curve(rho).g) * xx;
    };
    double t0 = ta;
    while (t0 < tb) {
        double t1 = tb;
        auto it = std::upper_bound(bp.begin(), bp.end(), t0 + 1e-12);
        if (it != bp.end() && *it < t1) t1 = *it;
        const double y = s.schedule().rate_at(0.5 * (t0 + t1));
        const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / max_step - 1e-9)));
        const double h = (t1 - t0) / n;
        for (int i = 0; i < n; ++i) {
            const double tt = t0 + i * h;
            const double k1 = rhs(tt, x, y);
            const double k2 = rhs(tt + 0.5 * h, x + 0.5 * h * k1, y);
            const double k3 = rhs(tt + 0.5 * h, x + 0.5 * h * k2, y);
            const double k4 = rhs(tt + h, x + h * k3, y);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t0 = t1;
    }
    return x;
}

// Cubic Lagrange interpolation on a uniform row; linear extrapolation past
// the right end (flagged through `exited`).
double interp_row(const double* f, int n, double z0, double dz, double z, bool& exited) {
    double s = (z - z0) / dz;
    exited = false;
    if (s >= n - 1) {
        exited = s > n;  // more than one cell past the last node
        return f[n - 1] + (s - (n - 1)) * (f[n - 1] - f[n - 2]);
    }
    if (s <= 0.0) return f[0];
    int i = static_cast<int>(s) - 1;
    i = std::clamp(i, 0, n - 4);
    const double u = s - i;  // position relative to node i, in [0, 3]
    const double l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    const double l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    const double l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    const double l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    return l0 * f[i] + l1 * f[i + 1] + l2 * f[i + 2] + l3 * f[i + 3];
}

bool same_params(const MarketParams& a, const MarketParams& b) {
    return a.rate_riskfree == b.rate_riskfree && a.drifts.size() == b.drifts.size() && a.drifts == b.drifts &&
           a.covariance == b.covariance;
}

}  // namespace

ValueSurface::ValueSurface(GridTable log_terminal, double gamma, long exits)
    : phi_(std::move(log_terminal)), gamma_(gamma), exits_(exits) {}

double ValueSurface::u(double t, double z) const { return crra_utility_of_log(phi_(t, z), gamma_); }

double ValueSurface::implied_risk_aversion(int k, int j) const {
    if (j < 1 || j > phi_.nz() - 2) throw Error(ErrorCode::OutOfDomain, "central differences need interior nodes");
    const double* f = phi_.row(k);
    const double dz = phi_.dz();
    const double p1 = (f[j + 1] - f[j - 1]) / (2.0 * dz);
    const double p2 = (f[j + 1] - 2.0 * f[j] + f[j - 1]) / (dz * dz);
    return 1.0 - (1.0 - gamma_) * p1 - p2 / p1;
}

ValueSurface solve_value_u(const RiskAversionSurface& rho, const MarketParams& params,
                           const ContributionSchedule& schedule, double gamma) {
    if (gamma != rho.gamma() || !same_params(params, rho.params()) ||
        schedule.breakpoints() != rho.schedule().breakpoints() || schedule.rates() != rho.schedule().rates()) {
        throw Error(ErrorCode::IncompatibleGrid, "value transport inputs differ from the risk-aversion solve");
    }
    return solve_value_u(rho);
}

ValueSurface solve_value_u(const RiskAversionSurface& rho) {
    const GridTable& tab = rho.table();
    const int nt = tab.nt();
    const int nz = tab.nz();
    const double max_step = rho.grid().dt;
    std::vector<double> phi(static_cast<std::size_t>(nt) * nz);
    double* last = phi.data() + static_cast<std::size_t>(nt - 1) * nz;
    for (int j = 0; j < nz; ++j) last[j] = tab.z_min() + j * tab.dz();
    long exits = 0;
    for (int k = nt - 2; k >= 0; --k) {
        const double ta = tab.times()[k];
        const double tb = tab.times()[k + 1];
        const double* next = phi.data() + static_cast<std::size_t>(k + 1) * nz;
        double* cur = phi.data() + static_cast<std::size_t>(k) * nz;
        for (int j = 0; j < nz; ++j) {
            const double z = tab.z_min() + j * tab.dz();
            const double x = advance_characteristic(rho, ta, tb, std::exp(z), max_step);
            bool exited = false;
            cur[j] = interp_row(next, nz, tab.z_min(), tab.dz(), std::log(x), exited);
            exits += exited ? 1 : 0;
        }
    }
    if (exits > 0) {
        std::ostringstream os;
        os << exits << " characteristics left through z_max; continued by linear extrapolation";
        warn(os.str());
    }
    return ValueSurface(GridTable(tab.times(), tab.z_min(), tab.dz(), nz, std::move(phi)), rho.gamma(), exits);
}

double characteristic_terminal_wealth(const RiskAversionSurface& rho, double t0, double x0, double max_step) {
    if (!(x0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "x0 must be > 0");
    if (!(max_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_step must be > 0");
    const double T = rho.schedule().horizon();
    if (!(t0 >= 0.0 && t0 <= T)) throw Error(ErrorCode::OutOfDomain, "t0 outside [0, T]");
    return advance_characteristic(rho, t0, T, x0, max_step);
}

double ols_intercept(const std::vector<double>& xs, const std::vector<double>& vs) {
    if (xs.size() != vs.size()) throw Error(ErrorCode::DimensionMismatch, "xs and values differ in length");
    const std::size_t n = xs.size();
    if (n < 2) throw Error(ErrorCode::InsufficientPoints, "need at least two points");
    double mx = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        mv += vs[i];
    }
    mx /= n;
    mv /= n;
    double sxx = 0.0, sxv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxv += (xs[i] - mx) * (vs[i] - mv);
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::InsufficientPoints, "need at least two distinct x");
    return mv - (sxv / sxx) * mx;
}

std::vector<double> default_extrapolation_wealths() {
    std::vector<double> xs;
    for (int e = -10; e <= -5; ++e) xs.push_back(std::exp(static_cast<double>(e)));
    return xs;
}

double value_at_zero_extrapolation(const ValueSurface& u, const std::vector<double>& xs) {
    const GridTable& tab = u.log_terminal_wealth();
    std::vector<double> vs;
    vs.reserve(xs.size());
    for (double x : xs) {
        if (!(x > 0.0)) throw Error(ErrorCode::OutOfDomain, "wealth must be > 0");
        const double z = std::log(x);
        if (z < tab.z_min() || z > tab.z_max()) throw Error(ErrorCode::OutOfDomain, "ln x outside the grid");
        vs.push_back(u.u(tab.times().front(), z));
    }
    return ols_intercept(xs, vs);
}

double indirect_risk_aversion(const RiskAversionSurface& rho, double t, double wealth) {
    if (!(wealth > 0.0)) throw Error(ErrorCode::InvalidArgument, "wealth must be > 0");
    const GridTable& tab = rho.table();
    const double z = std::log(wealth);
    if (z > tab.z_max() + tab.dz()) {
        std::ostringstream os;
        os << "ln W = " << z << " beyond z_max = " << tab.z_max();
        throw Error(ErrorCode::OutOfDomain, os.str());
    }
    if (z < tab.z_min()) {
        std::ostringstream os;
        os << "ln W = " << z << " below z_min = " << tab.z_min() << "; using the boundary value";
        warn(os.str());
    }
    return tab(t, z);
}

double lifetime_risk_aversion(const RiskAversionSurface& rho, double t, double wealth) {
    const double R = indirect_risk_aversion(rho, t, wealth);
    const double pv = present_value(t, rho.schedule(), rho.params().rate_riskfree);
    return R * (wealth + pv) / wealth;
}

Allocation optimal_policy(const RiskAversionSurface& rho, double t, double wealth) {
    const double R = indirect_risk_aversion(rho, t, wealth);
    Allocation a;
    rho.curve().weights(R, a.weights);
    a.budget_bound = 1.0;
    return a;
}

Allocation optimal_policy_samuelson(const RiskAversionSurface& rho, double t, double lifetime_wealth) {
    const double pv = present_value(t, rho.schedule(), rho.params().rate_riskfree);
    if (!(lifetime_wealth > pv)) throw Error(ErrorCode::WealthBelowPV, "lifetime wealth must exceed PV_t");
    const double w = lifetime_wealth - pv;
    const double alpha = w / lifetime_wealth;
    const double Rbar = lifetime_risk_aversion(rho, t, w);
    return rho.allocator().solve(alpha, Rbar);
}

}  // namespace lifestyle
