#include "lifestyle/config.hpp"

#include "lifestyle/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>

namespace lifestyle {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorCode::ConfigError, message); }

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where + " must be a JSON object");
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) fail(where + ": unknown key '" + k + "'");
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(where + " must be finite");
    return v;
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where + " must be an integer");
    return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Eigen::VectorXd vector_of(const json& j, const std::string& where) {
    const auto v = numbers(j, where);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_of(const json& j, const std::string& where, Eigen::Index n) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) fail(where + " must be a " + std::to_string(n) + "x" + std::to_string(n) + " array");
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = numbers(j[i], where + "[" + std::to_string(i) + "]");
        if (static_cast<Eigen::Index>(row.size()) != n) fail(where + " must be square");
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[k];
    }
    return m;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

}  // namespace

SweepGrid SweepGrid::full() { return SweepGrid{}; }

SweepGrid SweepGrid::desk() {
    SweepGrid g;
    g.mu2 = {0.10};
    g.sigma2 = {0.25};
    g.correlation = {-0.20};
    return g;
}

std::size_t SweepGrid::market_count() const {
    return mu1.size() * mu2.size() * sigma1.size() * sigma2.size() * correlation.size();
}

void SweepGrid::validate() const {
    auto nonempty_positive = [](const std::vector<double>& v, const char* name) {
        if (v.empty()) fail(std::string("sweep.") + name + " must not be empty");
        for (double x : v) {
            if (!(x > 0.0) || !std::isfinite(x)) fail(std::string("sweep.") + name + " entries must be > 0");
        }
    };
    nonempty_positive(mu1, "mu1");
    nonempty_positive(mu2, "mu2");
    nonempty_positive(sigma1, "sigma1");
    nonempty_positive(sigma2, "sigma2");
    if (correlation.empty()) fail("sweep.correlation must not be empty");
    for (double c : correlation) {
        if (!(c > -1.0 && c < 1.0)) fail("sweep.correlation entries must lie in (-1, 1)");
    }
    for (double g : gammas) {
        if (!(g > 0.0) || !std::isfinite(g)) fail("sweep.gammas entries must be > 0");
    }
    if (!(horizon > 0.0) || !(total_contribution > 0.0)) fail("sweep horizon and total must be > 0");
    for (double a : mu1)
        for (double b : mu2)
            for (double s1 : sigma1)
                for (double s2 : sigma2)
                    for (double c : correlation) {
                        Eigen::Matrix2d corr;
                        corr << 1.0, c, c, 1.0;
                        try {
                            validate_market(MarketParams::from_volatilities(rate, Eigen::Vector2d(a, b),
                                                                            Eigen::Vector2d(s1, s2), corr));
                        } catch (const Error& e) {
                            fail(std::string("sweep market rejected: ") + e.what());
                        }
                    }
}

MarketParams market_preset(const std::string& name) {
    if (name == "paper-baseline") return MarketParams::paper_baseline();
    fail("unknown market preset '" + name + "' (available: paper-baseline)");
}

GridSpec grid_preset(const std::string& name, double horizon) {
    if (name == "desk") return GridSpec::desk(horizon);
    if (name == "paper") return GridSpec::paper(horizon);
    fail("unknown grid preset '" + name + "' (available: desk, paper)");
}

MarketParams market_from_json(const json& j) {
    require_object(j, "market");
    if (j.contains("preset")) {
        allow_keys(j, "market", {"preset"});
        if (!j["preset"].is_string()) fail("market.preset must be a string");
        return market_preset(j["preset"].get<std::string>());
    }
    allow_keys(j, "market", {"rate", "drifts", "covariance", "volatilities", "correlation"});
    if (!j.contains("rate") || !j.contains("drifts")) fail("market needs 'rate' and 'drifts' (or 'preset')");
    MarketParams m;
    m.rate_riskfree = number(j["rate"], "market.rate");
    m.drifts = vector_of(j["drifts"], "market.drifts");
    const auto n = m.drifts.size();
    if (j.contains("covariance")) {
        if (j.contains("volatilities") || j.contains("correlation")) {
            fail("market: give either 'covariance' or 'volatilities' + 'correlation'");
        }
        m.covariance = matrix_of(j["covariance"], "market.covariance", n);
    } else {
        if (!j.contains("volatilities") || !j.contains("correlation")) {
            fail("market needs 'covariance' or 'volatilities' + 'correlation'");
        }
        const Eigen::VectorXd vol = vector_of(j["volatilities"], "market.volatilities");
        if (vol.size() != n) fail("market.volatilities must match market.drifts");
        m = MarketParams::from_volatilities(m.rate_riskfree, m.drifts, vol,
                                            matrix_of(j["correlation"], "market.correlation", n));
    }
    try {
        return validate_market(m);
    } catch (const Error& e) {
        fail(std::string("market: ") + e.what());
    }
}

json market_to_json(const MarketParams& m) {
    return {{"rate", m.rate_riskfree}, {"drifts", vec_json(m.drifts)}, {"covariance", mat_json(m.covariance)}};
}

ContributionSchedule schedule_from_json(const json& j) {
    require_object(j, "schedule");
    try {
        if (j.contains("breakpoints")) {
            allow_keys(j, "schedule", {"breakpoints", "rates"});
            if (!j.contains("rates")) fail("schedule needs 'rates' with 'breakpoints'");
            return ContributionSchedule(numbers(j["breakpoints"], "schedule.breakpoints"),
                                        numbers(j["rates"], "schedule.rates"));
        }
        allow_keys(j, "schedule", {"horizon", "total"});
        const double horizon = j.contains("horizon") ? number(j["horizon"], "schedule.horizon") : 40.0;
        const double total = j.contains("total") ? number(j["total"], "schedule.total") : 1.0;
        if (!(total >= 0.0)) fail("schedule.total must be >= 0");
        return ContributionSchedule::uniform(horizon, total);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        fail(std::string("schedule: ") + e.what());
    }
}

json schedule_to_json(const ContributionSchedule& s) {
    return {{"breakpoints", s.breakpoints()}, {"rates", s.rates()}};
}

GridSpec grid_from_json(const json& j, double horizon, std::string* preset_out) {
    require_object(j, "grid");
    allow_keys(j, "grid",
               {"preset", "dt", "dz", "z_min", "z_max", "first_step", "step_growth", "store_t_stride",
                "store_z_stride", "dense_window", "left_boundary", "robin_kappa", "scheme", "max_newton",
                "newton_tol"});
    std::string preset = "desk";
    if (j.contains("preset")) {
        if (!j["preset"].is_string()) fail("grid.preset must be a string");
        preset = j["preset"].get<std::string>();
    }
    GridSpec g = grid_preset(preset, horizon);
    auto num = [&](const char* k, double& v) {
        if (j.contains(k)) v = number(j[k], std::string("grid.") + k);
    };
    auto integral = [&](const char* k, int& v) {
        if (j.contains(k)) v = integer(j[k], std::string("grid.") + k);
    };
    num("dt", g.dt);
    num("dz", g.dz);
    num("z_min", g.z_min);
    num("z_max", g.z_max);
    num("first_step", g.first_step);
    num("step_growth", g.step_growth);
    num("dense_window", g.dense_window);
    num("robin_kappa", g.robin_kappa);
    num("newton_tol", g.newton_tol);
    integral("store_t_stride", g.store_t_stride);
    integral("store_z_stride", g.store_z_stride);
    integral("max_newton", g.max_newton);
    if (j.contains("left_boundary")) {
        const std::string lb = j["left_boundary"].is_string() ? j["left_boundary"].get<std::string>() : "";
        if (lb == "proportional") g.left_boundary = LeftBoundary::Proportional;
        else if (lb == "relax") g.left_boundary = LeftBoundary::RelaxToGamma;
        else fail("grid.left_boundary must be 'proportional' or 'relax'");
    }
    if (j.contains("scheme")) {
        const std::string s = j["scheme"].is_string() ? j["scheme"].get<std::string>() : "";
        if (s == "bdf2") g.scheme = TimeScheme::Bdf2;
        else if (s == "euler") g.scheme = TimeScheme::BackwardEuler;
        else fail("grid.scheme must be 'bdf2' or 'euler'");
    }
    try {
        g.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
    if (preset_out) *preset_out = preset;
    return g;
}

json grid_to_json(const GridSpec& g, const std::string& preset) {
    return {{"preset", preset},
            {"dt", g.dt},
            {"dz", g.dz},
            {"z_min", g.z_min},
            {"z_max", g.z_max},
            {"first_step", g.first_step},
            {"step_growth", g.step_growth},
            {"store_t_stride", g.store_t_stride},
            {"store_z_stride", g.store_z_stride},
            {"dense_window", g.dense_window},
            {"left_boundary", g.left_boundary == LeftBoundary::Proportional ? "proportional" : "relax"},
            {"robin_kappa", g.robin_kappa},
            {"scheme", g.scheme == TimeScheme::Bdf2 ? "bdf2" : "euler"},
            {"max_newton", g.max_newton},
            {"newton_tol", g.newton_tol}};
}

SweepGrid sweep_from_json(const json& j) {
    require_object(j, "sweep");
    allow_keys(j, "sweep",
               {"preset", "mu1", "mu2", "sigma1", "sigma2", "correlation", "gammas", "rate", "horizon", "total"});
    SweepGrid s = SweepGrid::desk();
    if (j.contains("preset")) {
        const std::string p = j["preset"].is_string() ? j["preset"].get<std::string>() : "";
        if (p == "full") s = SweepGrid::full();
        else if (p != "desk") fail("sweep.preset must be 'desk' or 'full'");
    }
    auto list = [&](const char* k, std::vector<double>& v) {
        if (j.contains(k)) v = numbers(j[k], std::string("sweep.") + k);
    };
    list("mu1", s.mu1);
    list("mu2", s.mu2);
    list("sigma1", s.sigma1);
    list("sigma2", s.sigma2);
    list("correlation", s.correlation);
    list("gammas", s.gammas);
    if (j.contains("rate")) s.rate = number(j["rate"], "sweep.rate");
    if (j.contains("horizon")) s.horizon = number(j["horizon"], "sweep.horizon");
    if (j.contains("total")) s.total_contribution = number(j["total"], "sweep.total");
    s.validate();
    return s;
}

json sweep_to_json(const SweepGrid& s) {
    return {{"mu1", s.mu1},         {"mu2", s.mu2},
            {"sigma1", s.sigma1},   {"sigma2", s.sigma2},
            {"correlation", s.correlation}, {"gammas", s.gammas},
            {"rate", s.rate},       {"horizon", s.horizon},
            {"total", s.total_contribution}};
}

Config config_from_json(const json& j) {
    require_object(j, "config");
    allow_keys(j, "config", {"schema_version", "market", "schedule", "grid", "gamma", "x0", "monte_carlo", "sweep"});
    if (!j.contains("schema_version")) fail("config needs 'schema_version'");
    if (integer(j["schema_version"], "schema_version") != kConfigSchemaVersion) {
        fail("unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");
    }
    Config c;
    if (j.contains("market")) c.market = market_from_json(j["market"]);
    if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"]);
    c.grid = j.contains("grid") ? grid_from_json(j["grid"], c.schedule.horizon(), &c.grid_preset)
                                : GridSpec::desk(c.schedule.horizon());
    if (j.contains("gamma")) {
        c.gamma = number(j["gamma"], "gamma");
        if (!(c.gamma > 0.0)) fail("gamma must be > 0");
    }
    if (j.contains("x0")) {
        c.x0 = number(j["x0"], "x0");
        if (!(c.x0 >= 0.0)) fail("x0 must be >= 0");
    }
    if (j.contains("monte_carlo")) {
        const json& m = j["monte_carlo"];
        require_object(m, "monte_carlo");
        allow_keys(m, "monte_carlo", {"n_paths", "dt", "seed", "threads"});
        if (m.contains("n_paths")) {
            if (!m["n_paths"].is_number_integer() || m["n_paths"].get<long>() < 2) fail("monte_carlo.n_paths must be an integer >= 2");
            c.mc.n_paths = m["n_paths"].get<long>();
        }
        if (m.contains("dt")) {
            c.mc.dt = number(m["dt"], "monte_carlo.dt");
            if (!(c.mc.dt > 0.0)) fail("monte_carlo.dt must be > 0");
        }
        if (m.contains("seed")) {
            const json& seed = m["seed"];
            if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0)) fail("monte_carlo.seed must be a non-negative integer");
            c.mc.seed = m["seed"].get<std::uint64_t>();
        }
        if (m.contains("threads")) c.mc.threads = integer(m["threads"], "monte_carlo.threads");
    }
    if (j.contains("sweep")) c.sweep = sweep_from_json(j["sweep"]);
    return c;
}

json config_to_json(const Config& c) {
    json j = {{"schema_version", kConfigSchemaVersion},
              {"market", market_to_json(c.market)},
              {"schedule", schedule_to_json(c.schedule)},
              {"grid", grid_to_json(c.grid, c.grid_preset)},
              {"gamma", c.gamma},
              {"x0", c.x0},
              {"monte_carlo", {{"n_paths", c.mc.n_paths}, {"dt", c.mc.dt}, {"seed", c.mc.seed}, {"threads", c.mc.threads}}}};
    if (c.sweep) j["sweep"] = sweep_to_json(*c.sweep);
    return j;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail("'" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string_view library_version() { return LIFESTYLE_VERSION; }

std::string config_hash(const json& j) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

}  // namespace lifestyle
