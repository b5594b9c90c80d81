#include "lifestyle/robustness_sweep.hpp"

#include "lifestyle/errors.hpp"
#include "lifestyle/welfare_evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace lifestyle {

namespace {

constexpr double kOrderingSlack = 1e-3;

void evaluate_cell(SweepCell& cell, const SweepGrid& grid, const GridSpec& spec) {
    Eigen::Matrix2d corr;
    corr << 1.0, cell.correlation, cell.correlation, 1.0;
    const MarketParams params = MarketParams::from_volatilities(grid.rate, Eigen::Vector2d(cell.mu1, cell.mu2),
                                                                Eigen::Vector2d(cell.sigma1, cell.sigma2), corr);
    const ContributionSchedule schedule = ContributionSchedule::uniform(grid.horizon, grid.total_contribution);
    const StrategyKind kinds[] = {StrategyKind::Pi0, StrategyKind::Pi1, StrategyKind::Pi2, StrategyKind::Pi3};
    for (int i = 0; i < 4; ++i) {
        cell.ce[i] = value_pde(StrategySpec::heuristic(kinds[i], cell.gamma), params, schedule, spec)
                         .certainty_equivalent(0.0);
    }
    auto surface = std::make_shared<RiskAversionSurface>(solve_rho(params, schedule, cell.gamma, spec));
    cell.ce_star = value_pde(StrategySpec::optimal(std::move(surface)), params, schedule, spec).certainty_equivalent(0.0);
    for (int i = 0; i < 4; ++i) cell.gap[i] = (cell.ce_star - cell.ce[i]) / cell.ce_star;
    cell.ordering_ok = cell.gap[1] >= cell.gap[2] - kOrderingSlack && cell.gap[2] >= cell.gap[3] - kOrderingSlack &&
                       cell.gap[3] >= -kOrderingSlack;
    cell.ok = true;
}

}  // namespace

std::vector<std::size_t> SweepResult::failed() const {
    std::vector<std::size_t> out;
    for (const auto& c : cells) {
        if (!c.ok) out.push_back(c.index);
    }
    return out;
}

SweepResult run_sweep(const SweepGrid& grid, const SweepOptions& options) {
    grid.validate();
    GridSpec spec = options.grid;
    spec.t_max = grid.horizon;
    spec.validate();

    SweepResult result;
    result.preset = options.preset;
    for (double a : grid.mu1)
        for (double b : grid.mu2)
            for (double s1 : grid.sigma1)
                for (double s2 : grid.sigma2)
                    for (double c : grid.correlation)
                        for (double g : grid.gammas) {
                            SweepCell cell;
                            cell.index = result.cells.size();
                            cell.mu1 = a;
                            cell.mu2 = b;
                            cell.sigma1 = s1;
                            cell.sigma2 = s2;
                            cell.correlation = c;
                            cell.gamma = g;
                            result.cells.push_back(cell);
                        }

    std::atomic<std::size_t> next{0};
    std::size_t done = 0;
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < result.cells.size(); k = next++) {
            SweepCell& cell = result.cells[k];
            try {
                evaluate_cell(cell, grid, spec);
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
            if (options.progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                options.progress(++done, result.cells.size());
            }
        }
    };
    int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, 64);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return result;
}

std::vector<AggregateRow> aggregate(const SweepResult& result) {
    std::vector<AggregateRow> rows;
    std::map<double, std::size_t> slot;
    bool any_ok = false;
    for (const auto& c : result.cells) {
        auto it = slot.find(c.gamma);
        if (it == slot.end()) {
            it = slot.emplace(c.gamma, rows.size()).first;
            rows.push_back({});
            rows.back().gamma = c.gamma;
            rows.back().max.fill(-std::numeric_limits<double>::infinity());
        }
        AggregateRow& r = rows[it->second];
        if (!c.ok) {
            ++r.failed;
            continue;
        }
        any_ok = true;
        ++r.cells;
        for (int i = 0; i < 4; ++i) {
            r.avg[i] += c.gap[i];
            r.max[i] = std::max(r.max[i], c.gap[i]);
        }
    }
    if (!result.cells.empty() && !any_ok) throw Error(ErrorCode::AllCellsFailed, "no sweep cell succeeded");
    for (auto& r : rows) {
        for (int i = 0; i < 4; ++i) {
            if (r.cells > 0) {
                r.avg[i] /= static_cast<double>(r.cells);
            } else {
                r.avg[i] = r.max[i] = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return rows;
}

const SweepCell& max_gap_cell(const SweepResult& result, int strategy) {
    if (strategy < 0 || strategy > 3) throw Error(ErrorCode::InvalidArgument, "strategy index must be 0..3");
    const SweepCell* best = nullptr;
    for (const auto& c : result.cells) {
        if (c.ok && (!best || c.gap[strategy] > best->gap[strategy])) best = &c;
    }
    if (!best) throw Error(ErrorCode::AllCellsFailed, "no sweep cell succeeded");
    return *best;
}

void write_sweep_cells_csv(std::ostream& os, const SweepResult& result) {
    os << "index,mu1,mu2,sigma1,sigma2,correlation,gamma,ok,ce_pi0,ce_pi1,ce_pi2,ce_pi3,ce_star,"
          "gap_pi0,gap_pi1,gap_pi2,gap_pi3,ordering_ok,error\n";
    for (const auto& c : result.cells) {
        std::ostringstream line;
        line << std::setprecision(12) << c.index << ',' << c.mu1 << ',' << c.mu2 << ',' << c.sigma1 << ','
             << c.sigma2 << ',' << c.correlation << ',' << c.gamma << ',' << (c.ok ? 1 : 0);
        if (c.ok) {
            for (double v : c.ce) line << ',' << v;
            line << ',' << c.ce_star;
            for (double v : c.gap) line << ',' << v;
            line << ',' << (c.ordering_ok ? 1 : 0) << ',';
        } else {
            std::string msg = c.error;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            line << ",,,,,,,,,,,\"" << msg << '"';
        }
        os << line.str() << '\n';
    }
}

void write_sweep_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
    os << "gamma,cells,failed,avg_pi0,max_pi0,avg_pi1,max_pi1,avg_pi2,max_pi2,avg_pi3,max_pi3\n";
    for (const auto& r : rows) {
        std::ostringstream line;
        line << std::setprecision(12) << r.gamma << ',' << r.cells << ',' << r.failed;
        for (int i = 0; i < 4; ++i) line << ',' << r.avg[i] << ',' << r.max[i];
        os << line.str() << '\n';
    }
}

nlohmann::json sweep_manifest(const SweepGrid& grid, const SweepOptions& options, const SweepResult& result) {
    GridSpec spec = options.grid;
    spec.t_max = grid.horizon;
    const nlohmann::json config = {{"sweep", sweep_to_json(grid)}, {"grid", grid_to_json(spec, options.preset)}};
    return {{"config_hash", config_hash(config)},
            {"preset", options.preset},
            {"code_version", std::string(library_version())},
            {"cells", result.cells.size()},
            {"failed_cells", result.failed()},
            {"config", config}};
}

}  // namespace lifestyle
