#include "lifestyle/surface_cache.hpp"

#include "lifestyle/config.hpp"
#include "lifestyle/errors.hpp"

#include <bit>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace lifestyle {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "lifestyle-surface\n";

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorCode::CacheError, message); }

json key_json(const MarketParams& params, const ContributionSchedule& schedule, double gamma, const GridSpec& grid) {
    json g = grid_to_json(grid, "");
    g.erase("preset");
    g["t_max"] = grid.t_max;
    return {{"market", market_to_json(params)}, {"schedule", schedule_to_json(schedule)}, {"gamma", gamma}, {"grid", g}};
}

}  // namespace

std::string surface_cache_key(const MarketParams& params, const ContributionSchedule& schedule, double gamma,
                              const GridSpec& grid) {
    return config_hash(key_json(params, schedule, gamma, grid));
}

std::string default_cache_dir() {
    const char* env = std::getenv("LIFESTYLE_CACHE_DIR");
    return env && *env ? std::string(env) : std::string(".lifestyle-cache");
}

std::string surface_cache_path(const std::string& dir, const std::string& key) {
    return (std::filesystem::path(dir) / ("surface-" + key + ".bin")).string();
}

void save_surface(const RiskAversionSurface& s, const std::string& path) {
    const GridTable& t = s.table();
    json header = key_json(s.params(), s.schedule(), s.gamma(), s.grid());
    header["table"] = {{"nt", t.nt()}, {"nz", t.nz()}, {"z_min", t.z_min()}, {"dz", t.dz()}};
    header["stats"] = {{"time_steps", s.stats.time_steps},
                       {"newton_iterations", s.stats.newton_iterations},
                       {"max_newton_per_step", s.stats.max_newton_per_step},
                       {"rho_min", s.stats.rho_min},
                       {"rho_max", s.stats.rho_max},
                       {"runtime_s", s.stats.runtime_s}};
    const std::string h = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '" + path + "'");
    out.write(kMagic, sizeof kMagic - 1);
    const std::uint64_t len = h.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(reinterpret_cast<const char*>(t.times().data()), static_cast<std::streamsize>(t.times().size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.values().size() * sizeof(double)));
    if (!out) fail("write to '" + path + "' failed");
}

RiskAversionSurface load_surface(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path + "'");
    std::string magic(sizeof kMagic - 1, '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (!in || magic != kMagic) fail("'" + path + "' is not a surface cache file");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > (std::uint64_t{1} << 26)) fail("'" + path + "' has a bad header length");
    std::string h(len, '\0');
    in.read(h.data(), static_cast<std::streamsize>(len));
    if (!in) fail("'" + path + "' is truncated");
    try {
        const json header = json::parse(h);
        const MarketParams params = market_from_json(header.at("market"));
        const ContributionSchedule schedule = schedule_from_json(header.at("schedule"));
        const double gamma = header.at("gamma").get<double>();
        json gj = header.at("grid");
        const double t_max = gj.at("t_max").get<double>();
        gj.erase("t_max");
        const GridSpec grid = grid_from_json(gj, t_max);
        const json& tab = header.at("table");
        const int nt = tab.at("nt").get<int>();
        const int nz = tab.at("nz").get<int>();
        if (nt < 2 || nz < 2) fail("'" + path + "' has an empty table");
        std::vector<double> times(static_cast<std::size_t>(nt));
        std::vector<double> values(static_cast<std::size_t>(nt) * nz);
        in.read(reinterpret_cast<char*>(times.data()), static_cast<std::streamsize>(times.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (!in) fail("'" + path + "' is truncated");
        if (in.peek() != std::ifstream::traits_type::eof()) fail("'" + path + "' has trailing bytes");
        RiskAversionSurface s(GridTable(std::move(times), tab.at("z_min").get<double>(), tab.at("dz").get<double>(),
                                        nz, std::move(values)),
                              gamma, params, schedule, grid);
        const json& st = header.at("stats");
        s.stats.time_steps = st.at("time_steps").get<int>();
        s.stats.newton_iterations = st.at("newton_iterations").get<long>();
        s.stats.max_newton_per_step = st.at("max_newton_per_step").get<int>();
        s.stats.rho_min = st.at("rho_min").get<double>();
        s.stats.rho_max = st.at("rho_max").get<double>();
        s.stats.runtime_s = st.at("runtime_s").get<double>();
        return s;
    } catch (const json::exception& e) {
        fail("'" + path + "' has a malformed header: " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CacheError) throw;
        fail("'" + path + "' has an invalid header: " + e.what());
    }
}

std::shared_ptr<const RiskAversionSurface> find_cached_surface(const std::string& dir, const MarketParams& params,
                                                               const ContributionSchedule& schedule, double gamma,
                                                               const GridSpec& grid) {
    const std::string path = surface_cache_path(dir, surface_cache_key(params, schedule, gamma, grid));
    if (!std::filesystem::exists(path)) return nullptr;
    return std::make_shared<RiskAversionSurface>(load_surface(path));
}

std::string store_surface(const std::string& dir, const RiskAversionSurface& surface) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail("cannot create cache directory '" + dir + "': " + ec.message());
    const std::string path =
        surface_cache_path(dir, surface_cache_key(surface.params(), surface.schedule(), surface.gamma(), surface.grid()));
    // Write then rename so concurrent readers never see a partial file.
    const std::string tmp = path + ".tmp";
    save_surface(surface, tmp);
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail("cannot move '" + tmp + "' into place: " + ec.message());
    return path;
}

}  // namespace lifestyle
