#pragma once

#include "lifestyle/config.hpp"
#include "lifestyle/hjb_solver.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace lifestyle {

/// One (market, γ) combination. Strategy index i ∈ {0, 1, 2, 3} is π⁽ⁱ⁾.
struct SweepCell {
    std::size_t index = 0;  ///< position in lexicographic order
    double mu1 = 0.0, mu2 = 0.0, sigma1 = 0.0, sigma2 = 0.0, correlation = 0.0, gamma = 0.0;

    bool ok = false;
    std::string error;  ///< set when !ok

    std::array<double, 4> ce{};
    double ce_star = 0.0;
    /// (CE* - CE⁽ⁱ⁾)/CE*
    std::array<double, 4> gap{};
    /// gap(π⁽¹⁾) ≥ gap(π⁽²⁾) ≥ gap(π⁽³⁾) ≥ 0, each up to 1e-3.
    bool ordering_ok = false;
};

struct SweepOptions {
    std::string preset = "desk";
    GridSpec grid = GridSpec::desk();  ///< t_max is reset to the sweep horizon
    int threads = 0;                   ///< 0: hardware concurrency
    /// Called after each finished cell with (cells done, total), serialised
    /// across workers.
    std::function<void(std::size_t, std::size_t)> progress;
};

struct SweepResult {
    std::string preset;
    std::vector<SweepCell> cells;
    std::vector<std::size_t> failed() const;
};

/// Solves ρ and evaluates π⁽⁰⁾..π⁽³⁾ and π* by the value PDE for every cell
/// of the grid. Cells run concurrently; failures are recorded per cell.
/// Output order is lexicographic in (μ₁, μ₂, σ₁, σ₂, correlation, γ) indices.
SweepResult run_sweep(const SweepGrid& grid, const SweepOptions& options);

struct AggregateRow {
    double gamma = 0.0;
    std::size_t cells = 0;   ///< successful cells
    std::size_t failed = 0;
    std::array<double, 4> avg{};
    std::array<double, 4> max{};
};

/// Mean and maximum gap per γ over successful cells, in order of first
/// appearance. Throws AllCellsFailed when the result has cells but none
/// succeeded; an empty result gives an empty table.
std::vector<AggregateRow> aggregate(const SweepResult& result);

/// Successful cell with the largest gap for strategy `i`; AllCellsFailed if none.
const SweepCell& max_gap_cell(const SweepResult& result, int strategy);

/// Per-cell CSV. Contains no timings, so identical inputs give identical bytes.
void write_sweep_cells_csv(std::ostream& os, const SweepResult& result);
/// Columns: gamma,cells,failed,avg_pi0,max_pi0,...,avg_pi3,max_pi3.
void write_sweep_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);
/// {config_hash, preset, code_version, cells, failed_cells, config}.
nlohmann::json sweep_manifest(const SweepGrid& grid, const SweepOptions& options, const SweepResult& result);

}  // namespace lifestyle
