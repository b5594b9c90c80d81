#include "lifestyle/api.hpp"

#include "lifestyle/config.hpp"
#include "lifestyle/cqp_allocator.hpp"
#include "lifestyle/errors.hpp"
#include "lifestyle/hjb_solver.hpp"
#include "lifestyle/surface_cache.hpp"
#include "lifestyle/welfare_evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>

namespace lifestyle::api {

using nlohmann::json;

namespace {

constexpr long kMaxServicePaths = 200000;
constexpr long kDefaultServicePaths = 20000;

[[noreturn]] void bad_request(const std::string& message) { throw ApiError(400, "invalid_request", message); }

json rounded(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(round12(v(i)));
    return a;
}

double number_field(const json& j, const char* key) {
    if (!j.contains(key)) bad_request(std::string("missing field '") + key + "'");
    if (!j[key].is_number() || !std::isfinite(j[key].get<double>())) {
        bad_request(std::string("field '") + key + "' must be a finite number");
    }
    return j[key].get<double>();
}

double gamma_of(const json& req) {
    const double g = number_field(req, "gamma");
    if (!(g > 0.0)) bad_request("gamma must be > 0");
    return g;
}

MarketParams market_of(const json& req) {
    if (!req.contains("market")) return MarketParams::paper_baseline();
    const json& m = req["market"];
    if (m.is_object() && m.contains("preset") && m["preset"].is_string()) {
        const std::string name = m["preset"].get<std::string>();
        if (name != "paper-baseline") throw ApiError(404, "unknown_preset", "unknown market preset '" + name + "'");
    }
    return market_from_json(m);
}

ContributionSchedule schedule_of(const json& req) {
    return req.contains("schedule") ? schedule_from_json(req["schedule"]) : ContributionSchedule::uniform(40.0);
}

GridSpec grid_of(const json& req, double horizon) {
    if (!req.contains("grid")) return GridSpec::desk(horizon);
    const json& g = req["grid"];
    if (g.is_object() && g.contains("preset") && g["preset"].is_string()) {
        const std::string name = g["preset"].get<std::string>();
        if (name != "desk" && name != "paper") throw ApiError(404, "unknown_preset", "unknown grid preset '" + name + "'");
    }
    return grid_from_json(g, horizon);
}

json binding_labels(const Eigen::VectorXd& w) {
    json labels = json::array();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (std::abs(w(i)) <= 1e-12) labels.push_back("AtZero(" + std::to_string(i) + ")");
    }
    if (std::abs(w.sum() - 1.0) <= 1e-9) labels.push_back("BudgetFull");
    return labels;
}

std::shared_ptr<const RiskAversionSurface> require_surface(const std::string& dir, const MarketParams& m,
                                                           const ContributionSchedule& y, double gamma,
                                                           const GridSpec& grid) {
    auto s = find_cached_surface(dir, m, y, gamma, grid);
    if (!s) {
        char g[32];
        std::snprintf(g, sizeof g, "%g", gamma);
        throw ApiError(409, "surface_missing",
                       std::string("no cached risk-aversion surface for gamma ") + g +
                           " with this market, schedule and grid; run `lifestyle solve-hjb --gamma " + g +
                           "` with the same config first");
    }
    return s;
}

json allocation_json(const std::string& strategy, double gamma, std::optional<double> alpha, const Eigen::VectorXd& w,
                     double effective) {
    return {{"strategy", strategy},
            {"gamma", round12(gamma)},
            {"alpha", alpha ? json(round12(*alpha)) : json(nullptr)},
            {"weights", rounded(w)},
            {"budget", round12(w.sum())},
            {"effective_risk_aversion", round12(effective)},
            {"binding", binding_labels(w)}};
}

template <class F>
json translate(F&& body) {
    try {
        return body();
    } catch (const ApiError&) {
        throw;
    } catch (const Error& e) {
        switch (e.code()) {
            case ErrorCode::NonConvergence:
            case ErrorCode::InvariantViolated:
            case ErrorCode::CacheError: throw ApiError(500, std::string(to_string(e.code())), e.what());
            default: throw ApiError(400, std::string(to_string(e.code())), e.what());
        }
    } catch (const json::exception& e) {
        throw ApiError(400, "invalid_request", e.what());
    }
}

}  // namespace

double round12(double x) {
    if (!std::isfinite(x) || x == 0.0) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return std::strtod(buf, nullptr);
}

json allocate(const json& req, const std::string& cache_dir) {
    return translate([&]() -> json {
        if (!req.is_object()) bad_request("request body must be a JSON object");
        const double gamma = gamma_of(req);
        if (!req.contains("strategy") || !req["strategy"].is_string()) bad_request("missing field 'strategy'");
        const std::string name = req["strategy"].get<std::string>();
        const StrategyKind kind = strategy_kind_from_string(name);
        const MarketParams market = market_of(req);
        const ContributionSchedule schedule = schedule_of(req);
        const CqpAllocator cqp(market);

        std::optional<double> alpha, t, wealth;
        if (req.contains("alpha")) alpha = number_field(req, "alpha");
        if (req.contains("time") || req.contains("wealth")) {
            t = number_field(req, "time");
            wealth = number_field(req, "wealth");
            if (!(*t >= 0.0 && *t <= schedule.horizon())) bad_request("time must lie in [0, T]");
            if (!(*wealth >= 0.0)) bad_request("wealth must be >= 0");
            if (!alpha) alpha = capital_ratio(*t, *wealth, schedule, market.rate_riskfree);
        }
        auto need_alpha = [&] {
            if (!alpha) bad_request("strategy '" + name + "' needs 'alpha' or 'time' and 'wealth'");
            if (!(*alpha >= 0.0 && *alpha <= 1.0)) bad_request("alpha must lie in [0, 1]");
            return *alpha;
        };
        switch (kind) {
            case StrategyKind::Pi0: return allocation_json(name, gamma, alpha, pi0(cqp, gamma).weights, gamma);
            case StrategyKind::Pi1: return allocation_json(name, gamma, alpha, pi1(cqp, gamma).weights, gamma);
            case StrategyKind::Pi2: {
                const double a = need_alpha();
                return allocation_json(name, gamma, a, pi2(cqp, a, gamma).weights, a * gamma);
            }
            case StrategyKind::Pi3: {
                const double a = need_alpha();
                return allocation_json(name, gamma, a, pi3(cqp, a, gamma).weights, a * gamma);
            }
            case StrategyKind::Optimal: {
                if (!t || !(*wealth > 0.0)) bad_request("strategy 'optimal' needs 'time' and 'wealth' > 0");
                const auto surface = require_surface(cache_dir, market, schedule, gamma, grid_of(req, schedule.horizon()));
                const double R = indirect_risk_aversion(*surface, *t, *wealth);
                return allocation_json(name, gamma, alpha, optimal_policy(*surface, *t, *wealth).weights, R);
            }
            case StrategyKind::FixedWeights: break;
        }
        bad_request("strategy 'fixed' is not an allocation rule");
    });
}

json glidepath(const json& req) {
    return translate([&]() -> json {
        if (!req.is_object()) bad_request("request body must be a JSON object");
        const double gamma = gamma_of(req);
        std::string name = "pi3";
        if (req.contains("strategy")) {
            if (!req["strategy"].is_string()) bad_request("'strategy' must be a string");
            name = req["strategy"].get<std::string>();
        }
        const StrategyKind kind = strategy_kind_from_string(name);
        if (kind == StrategyKind::Optimal || kind == StrategyKind::FixedWeights) {
            bad_request("glide paths are available for pi0..pi3");
        }
        std::vector<double> alphas;
        if (req.contains("alphas")) {
            if (!req["alphas"].is_array() || req["alphas"].empty()) bad_request("'alphas' must be a non-empty array");
            for (const auto& a : req["alphas"]) {
                if (!a.is_number()) bad_request("'alphas' must contain numbers");
                alphas.push_back(a.get<double>());
            }
            for (std::size_t i = 0; i < alphas.size(); ++i) {
                if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0)) bad_request("alphas must lie in [0, 1]");
                if (i > 0 && !(alphas[i] > alphas[i - 1])) bad_request("alphas must be strictly increasing");
            }
        } else {
            for (int i = 0; i <= 100; ++i) alphas.push_back(i / 100.0);
        }
        const CqpAllocator cqp(market_of(req));
        json points = json::array();
        for (double a : alphas) {
            Eigen::VectorXd w;
            switch (kind) {
                case StrategyKind::Pi0: w = pi0(cqp, gamma).weights; break;
                case StrategyKind::Pi1: w = pi1(cqp, gamma).weights; break;
                case StrategyKind::Pi2: w = pi2(cqp, a, gamma).weights; break;
                default: w = pi3(cqp, a, gamma).weights; break;
            }
            points.push_back(allocation_json(name, gamma, a, w, a * gamma));
        }
        const GlideThresholds th = glide_thresholds(cqp, gamma);
        return {{"gamma", round12(gamma)},
                {"strategy", name},
                {"points", points},
                {"thresholds",
                 {{"budget", round12(th.budget_alpha)},
                  {"full_stock", round12(th.full_stock_alpha)},
                  {"budget_rho", round12(th.budget_rho)},
                  {"full_stock_rho", round12(th.full_stock_rho)}}}};
    });
}

json compare(const json& req, const std::string& cache_dir) {
    return translate([&]() -> json {
        if (!req.is_object()) bad_request("request body must be a JSON object");
        const double gamma = gamma_of(req);
        const MarketParams market = market_of(req);
        const ContributionSchedule schedule = schedule_of(req);
        WelfareOptions options;
        options.grid = grid_of(req, schedule.horizon());
        if (req.contains("x0")) {
            options.x0 = number_field(req, "x0");
            if (!(options.x0 >= 0.0)) bad_request("x0 must be >= 0");
        }
        WelfareMethod method = WelfareMethod::Pde;
        if (req.contains("method")) {
            if (!req["method"].is_string()) bad_request("'method' must be a string");
            method = welfare_method_from_string(req["method"].get<std::string>());
        }
        options.mc.n_paths = kDefaultServicePaths;
        if (req.contains("monte_carlo")) {
            const json cfg = {{"schema_version", kConfigSchemaVersion}, {"monte_carlo", req["monte_carlo"]}};
            const Config c = config_from_json(cfg);
            const json& m = req["monte_carlo"];
            options.mc.n_paths = m.contains("n_paths") ? c.mc.n_paths : kDefaultServicePaths;
            options.mc.dt = c.mc.dt;
            options.mc.seed = c.mc.seed;
            options.mc.threads = c.mc.threads;
        }
        if (method != WelfareMethod::Pde && options.mc.n_paths > kMaxServicePaths) {
            bad_request("monte_carlo.n_paths is limited to 200000 per request");
        }
        if (!req.contains("strategies") || !req["strategies"].is_array() || req["strategies"].empty()) {
            bad_request("'strategies' must be a non-empty array");
        }
        std::vector<StrategySpec> specs;
        for (const auto& s : req["strategies"]) {
            if (!s.is_string()) bad_request("'strategies' must contain names");
            const StrategyKind kind = strategy_kind_from_string(s.get<std::string>());
            if (kind == StrategyKind::Optimal) {
                specs.push_back(
                    StrategySpec::optimal(require_surface(cache_dir, market, schedule, gamma, options.grid)));
            } else if (kind == StrategyKind::FixedWeights) {
                bad_request("use pi0..pi3 or optimal in 'strategies'");
            } else {
                specs.push_back(StrategySpec::heuristic(kind, gamma));
            }
        }
        const WelfareReport report = compare_strategies(specs, market, schedule, method, options);
        json rows = json::array();
        for (const auto& r : report.rows) {
            rows.push_back({{"gamma", round12(r.gamma)},
                            {"strategy", r.strategy},
                            {"ce", round12(r.ce)},
                            {"irr", round12(r.irr)},
                            {"method", r.method},
                            {"stderr", round12(r.stderr_ce)}});
        }
        return {{"rows", rows}};
    });
}

}  // namespace lifestyle::api
