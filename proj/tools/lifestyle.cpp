#include "lifestyle/api.hpp"
#include "lifestyle/config.hpp"
#include "lifestyle/errors.hpp"
#include "lifestyle/hjb_solver.hpp"
#include "lifestyle/robustness_sweep.hpp"
#include "lifestyle/service.hpp"
#include "lifestyle/surface_cache.hpp"
#include "lifestyle/welfare_evaluator.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using namespace lifestyle;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kDomain = 3, kSolver = 4 };

/// Carries an exit code out of a subcommand.
struct Failure {
    int code;
    std::string message;
};

struct Common {
    std::string config_path;
    std::string grid_preset;
    std::string cache_dir;
    std::optional<double> gamma;
};

Config load(const Common& c) {
    Config cfg = c.config_path.empty() ? Config{} : load_config(c.config_path);
    if (!c.grid_preset.empty()) {
        cfg.grid_preset = c.grid_preset;
        cfg.grid = grid_preset(c.grid_preset, cfg.schedule.horizon());
    }
    if (c.gamma) cfg.gamma = *c.gamma;
    return cfg;
}

std::string cache_dir_of(const Common& c) { return c.cache_dir.empty() ? default_cache_dir() : c.cache_dir; }

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigError: return kConfig;
        case ErrorCode::NonConvergence:
        case ErrorCode::InvariantViolated:
        case ErrorCode::CharacteristicExitsDomain:
        case ErrorCode::AllCellsFailed:
        case ErrorCode::CacheError: return kSolver;
        default: return kDomain;
    }
}

int exit_code_for(const api::ApiError& e) {
    switch (e.status()) {
        case 404: return kConfig;
        case 409:
        case 500: return kSolver;
        default: return e.code() == "ConfigError" ? kConfig : kDomain;
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Failure{kConfig, "cannot write '" + path + "'"};
    return out;
}

// --- allocate ---------------------------------------------------------------

struct AllocateArgs {
    std::string strategy = "pi3";
    std::optional<double> alpha, time, wealth;
    std::string format = "table";
};

/// The request body the service would receive for the same flags.
json allocate_request(const Config& cfg, const AllocateArgs& a) {
    json req = {{"gamma", cfg.gamma},
                {"strategy", a.strategy},
                {"market", market_to_json(cfg.market)},
                {"schedule", schedule_to_json(cfg.schedule)},
                {"grid", grid_to_json(cfg.grid, cfg.grid_preset)}};
    if (a.alpha) req["alpha"] = *a.alpha;
    if (a.time) req["time"] = *a.time;
    if (a.wealth) req["wealth"] = *a.wealth;
    return req;
}

void print_allocation_table(const json& r) {
    std::printf("strategy                 %s\n", r["strategy"].get<std::string>().c_str());
    std::printf("gamma                    %.12g\n", r["gamma"].get<double>());
    if (!r["alpha"].is_null()) std::printf("alpha                    %.12g\n", r["alpha"].get<double>());
    const auto& w = r["weights"];
    for (std::size_t i = 0; i < w.size(); ++i) {
        std::printf("weight[%zu]                %.6f  (%.1f%%)\n", i, w[i].get<double>(), 100.0 * w[i].get<double>());
    }
    std::printf("budget                   %.6f\n", r["budget"].get<double>());
    std::printf("effective risk aversion  %.6f\n", r["effective_risk_aversion"].get<double>());
    std::string labels;
    for (const auto& l : r["binding"]) labels += (labels.empty() ? "" : ", ") + l.get<std::string>();
    std::printf("binding                  %s\n", labels.empty() ? "none" : labels.c_str());
}

int run_allocate(const Common& common, const AllocateArgs& a) {
    const Config cfg = load(common);
    const json r = api::allocate(allocate_request(cfg, a), cache_dir_of(common));
    if (a.format == "json") {
        std::cout << r.dump() << '\n';
    } else {
        print_allocation_table(r);
    }
    return kOk;
}

// --- solve-hjb --------------------------------------------------------------

struct SolveArgs {
    std::optional<double> dt, dz;
    bool no_cache = false;
};

void print_probe_table(const RiskAversionSurface& s) {
    const double T = s.schedule().horizon();
    const double ts[] = {0.0, T / 4, T / 2, 3 * T / 4, T - 0.025};
    const double ws[] = {1e-5, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 20.0};
    std::printf("pi*(t, W), gamma = %g\n%-8s", s.gamma(), "W");
    for (double t : ts) std::printf(" | t=%-11g", t);
    std::printf("\n");
    for (double w : ws) {
        std::printf("%-8g", w);
        for (double t : ts) {
            const Eigen::VectorXd p = optimal_policy(s, t, w).weights;
            std::printf(" |");
            for (Eigen::Index i = 0; i < p.size(); ++i) std::printf(" %.3f", p(i));
        }
        std::printf("\n");
    }
}

int run_solve(const Common& common, const SolveArgs& a) {
    Config cfg = load(common);
    if (a.dt) cfg.grid.dt = *a.dt;
    if (a.dz) cfg.grid.dz = *a.dz;
    try {
        cfg.grid.validate();
    } catch (const Error& e) {
        throw Failure{kConfig, e.what()};
    }
    const RiskAversionSurface s = solve_rho(cfg.market, cfg.schedule, cfg.gamma, cfg.grid);
    std::fprintf(stderr, "solved gamma=%g: %d steps, %ld Newton iterations, rho in [%.6g, %.6g], %.2f s\n", s.gamma(),
                 s.stats.time_steps, s.stats.newton_iterations, s.stats.rho_min, s.stats.rho_max, s.stats.runtime_s);
    if (!a.no_cache) std::fprintf(stderr, "surface cached at %s\n", store_surface(cache_dir_of(common), s).c_str());
    print_probe_table(s);
    return kOk;
}

// --- welfare ----------------------------------------------------------------

struct WelfareArgs {
    std::vector<double> gammas;
    std::vector<std::string> strategies{"pi0", "pi1", "pi2", "pi3", "optimal"};
    std::string method = "pde";
    std::optional<long> paths;
    std::optional<double> mc_dt;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out;
    bool runtime = false;
};

std::shared_ptr<const RiskAversionSurface> surface_for(const Config& cfg, double gamma, const std::string& dir) {
    if (auto s = find_cached_surface(dir, cfg.market, cfg.schedule, gamma, cfg.grid)) return s;
    std::fprintf(stderr, "solving the risk-aversion surface for gamma=%g\n", gamma);
    auto s = std::make_shared<RiskAversionSurface>(solve_rho(cfg.market, cfg.schedule, gamma, cfg.grid));
    store_surface(dir, *s);
    return s;
}

int run_welfare(const Common& common, const WelfareArgs& a) {
    const Config cfg = load(common);
    WelfareOptions options;
    options.grid = cfg.grid;
    options.x0 = cfg.x0;
    options.mc = cfg.mc;
    if (a.paths) options.mc.n_paths = *a.paths;
    if (a.mc_dt) options.mc.dt = *a.mc_dt;
    if (a.seed) options.mc.seed = *a.seed;
    if (a.threads > 0) options.mc.threads = a.threads;
    const WelfareMethod method = welfare_method_from_string(a.method);
    const std::vector<double> gammas = a.gammas.empty() ? std::vector<double>{cfg.gamma} : a.gammas;

    WelfareReport all;
    for (double g : gammas) {
        std::vector<StrategySpec> specs;
        for (const auto& name : a.strategies) {
            const StrategyKind kind = strategy_kind_from_string(name);
            if (kind == StrategyKind::Optimal) {
                specs.push_back(StrategySpec::optimal(surface_for(cfg, g, cache_dir_of(common))));
            } else if (kind == StrategyKind::FixedWeights) {
                throw Failure{kConfig, "strategy 'fixed' needs weights; use a config file"};
            } else {
                specs.push_back(StrategySpec::heuristic(kind, g));
            }
        }
        const WelfareReport r = compare_strategies(specs, cfg.market, cfg.schedule, method, options);
        all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
    }
    if (a.out.empty()) {
        write_welfare_csv(std::cout, all, a.runtime);
    } else {
        auto out = open_out(a.out);
        write_welfare_csv(out, all, a.runtime);
    }
    return kOk;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
    std::string preset = "desk";
    std::string out_dir = "sweep-out";
    int threads = 0;
};

int run_sweep_cmd(const Common& common, const SweepArgs& a) {
    Config cfg = load(common);
    SweepGrid grid;
    if (cfg.sweep) {
        grid = *cfg.sweep;
    } else if (a.preset == "desk") {
        grid = SweepGrid::desk();
    } else if (a.preset == "full") {
        grid = SweepGrid::full();
    } else {
        throw Failure{kConfig, "unknown sweep preset '" + a.preset + "' (available: desk, full)"};
    }
    SweepOptions options;
    options.preset = cfg.grid_preset;
    options.grid = grid_preset(cfg.grid_preset, grid.horizon);
    options.threads = a.threads;
    const auto t0 = std::chrono::steady_clock::now();
    options.progress = [t0](std::size_t done, std::size_t total) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "\r%zu/%zu cells, %.0f s elapsed, about %.0f s left   ", done, total, s,
                     s / static_cast<double>(done) * static_cast<double>(total - done));
        if (done == total) std::fprintf(stderr, "\n");
    };
    const SweepResult result = run_sweep(grid, options);
    const auto rows = aggregate(result);

    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    {
        auto out = open_out((dir / "cells.csv").string());
        write_sweep_cells_csv(out, result);
    }
    {
        auto out = open_out((dir / "aggregate.csv").string());
        write_sweep_aggregate_csv(out, rows);
    }
    {
        auto out = open_out((dir / "manifest.json").string());
        out << sweep_manifest(grid, options, result).dump(2) << '\n';
    }
    write_sweep_aggregate_csv(std::cout, rows);
    const auto failed = result.failed();
    if (!failed.empty()) {
        std::fprintf(stderr, "%zu failed cells (excluded from aggregates):", failed.size());
        for (auto i : failed) std::fprintf(stderr, " %zu", i);
        std::fprintf(stderr, "\n");
    }
    return kOk;
}

// --- serve ------------------------------------------------------------------

std::unique_ptr<Service> g_service;

int run_serve(const Common& common, const std::string& host, int port) {
    ServiceOptions o;
    o.host = host;
    o.port = port;
    o.cache_dir = cache_dir_of(common);
    g_service = std::make_unique<Service>(o);
    std::signal(SIGINT, [](int) { g_service->stop(); });
    std::signal(SIGTERM, [](int) { g_service->stop(); });
    std::fprintf(stderr, "serving on http://%s:%d (cache %s)\n", host.c_str(), port, o.cache_dir.c_str());
    g_service->run();
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lifestyle investment strategies for defined-contribution savers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(library_version()));

    Common common;
    auto add_common = [&](CLI::App* sub, bool with_gamma) {
        sub->add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--grid", common.grid_preset, "HJB grid preset")->check(CLI::IsMember({"desk", "paper"}));
        sub->add_option("--cache-dir", common.cache_dir, "surface cache directory (default $LIFESTYLE_CACHE_DIR)");
        if (with_gamma) sub->add_option("--gamma", common.gamma, "relative risk aversion");
    };

    AllocateArgs alloc;
    auto* allocate = app.add_subcommand("allocate", "print the allocation of one strategy");
    add_common(allocate, true);
    allocate->add_option("--strategy", alloc.strategy, "pi0, pi1, pi2, pi3 or optimal")->capture_default_str();
    allocate->add_option("--alpha", alloc.alpha, "capital ratio W/(W + PV_t)");
    allocate->add_option("--time", alloc.time, "time t in years");
    allocate->add_option("--wealth", alloc.wealth, "accumulated savings W_t");
    allocate->add_option("--format", alloc.format)->check(CLI::IsMember({"table", "json"}))->capture_default_str();

    SolveArgs solve;
    auto* solve_hjb = app.add_subcommand("solve-hjb", "solve for the risk-aversion surface and cache it");
    add_common(solve_hjb, true);
    solve_hjb->add_option("--dt", solve.dt, "override the time step");
    solve_hjb->add_option("--dz", solve.dz, "override the log-wealth step");
    solve_hjb->add_flag("--no-cache", solve.no_cache, "do not write the surface cache");

    WelfareArgs welf;
    auto* welfare = app.add_subcommand("welfare", "certainty equivalents and IRRs as CSV");
    add_common(welfare, false);
    welfare->add_option("--gamma", welf.gammas, "one or more risk aversions");
    welfare->add_option("--strategies", welf.strategies)->capture_default_str();
    welfare->add_option("--method", welf.method)->check(CLI::IsMember({"pde", "mc", "both"}))->capture_default_str();
    welfare->add_option("--paths", welf.paths, "Monte Carlo paths");
    welfare->add_option("--mc-dt", welf.mc_dt, "Monte Carlo time step");
    welfare->add_option("--seed", welf.seed, "Monte Carlo seed");
    welfare->add_option("--threads", welf.threads, "Monte Carlo threads (0: all cores)");
    welfare->add_option("--out", welf.out, "CSV path (default stdout)");
    welfare->add_flag("--runtime", welf.runtime, "fill the runtime_s column");

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "robustness sweep over market parameters");
    add_common(sweep, false);
    sweep->add_option("--preset", sw.preset, "desk (3x3 sub-grid) or full (324 markets)")->capture_default_str();
    sweep->add_option("--out-dir", sw.out_dir)->capture_default_str();
    sweep->add_option("--threads", sw.threads, "worker threads (0: all cores)");

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "HTTP/JSON service");
    add_common(serve, false);
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }

    try {
        if (*allocate) return run_allocate(common, alloc);
        if (*solve_hjb) return run_solve(common, solve);
        if (*welfare) return run_welfare(common, welf);
        if (*sweep) return run_sweep_cmd(common, sw);
        if (*serve) return run_serve(common, host, port);
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << '\n';
        return f.code;
    } catch (const api::ApiError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSolver;
    }
    return kOk;
}
