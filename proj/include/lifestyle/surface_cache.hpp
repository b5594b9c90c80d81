#pragma once

#include "lifestyle/hjb_solver.hpp"
#include "lifestyle/market_model.hpp"

#include <memory>
#include <string>

namespace lifestyle {

/// FNV-1a hex key of (market, schedule, γ, grid), independent of the preset name.
std::string surface_cache_key(const MarketParams& params, const ContributionSchedule& schedule, double gamma,
                              const GridSpec& grid);

/// $LIFESTYLE_CACHE_DIR, or ".lifestyle-cache" when unset.
std::string default_cache_dir();
/// <dir>/surface-<key>.bin
std::string surface_cache_path(const std::string& dir, const std::string& key);

/// File layout: the line "lifestyle-surface\n", an 8-byte little-endian header
/// length, a JSON header (market, schedule, gamma, grid, table shape, stats),
/// then the time nodes and the ρ table as little-endian doubles.
/// Throws CacheError on I/O failure.
void save_surface(const RiskAversionSurface& surface, const std::string& path);
/// Throws CacheError for missing, truncated or malformed files.
RiskAversionSurface load_surface(const std::string& path);

/// Loads the surface for these inputs from `dir` if present, else nullptr.
std::shared_ptr<const RiskAversionSurface> find_cached_surface(const std::string& dir, const MarketParams& params,
                                                               const ContributionSchedule& schedule, double gamma,
                                                               const GridSpec& grid);
/// Writes to surface_cache_path(dir, key), creating `dir`; returns the path.
std::string store_surface(const std::string& dir, const RiskAversionSurface& surface);

}  // namespace lifestyle
