#include "lcs/geo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "lcs/error.hpp"
#include "lcs/forest.hpp"
#include "lcs/stats.hpp"

namespace lcs {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

} // namespace

GridSpec make_grid_spec(std::span<const LatLon> points, double cell_size)
{
    if (points.empty())
        throw DataError("grid: no points");
    if (!(cell_size > 0.0))
        throw UsageError("grid: cell size must be positive");
    GridSpec spec;
    spec.cell_size = cell_size;
    double lat = 0.0, lon = 0.0;
    spec.origin = points.front();
    for (const auto& p : points) {
        lat += p.lat;
        lon += p.lon;
        spec.origin.lat = std::min(spec.origin.lat, p.lat);
        spec.origin.lon = std::min(spec.origin.lon, p.lon);
    }
    spec.centre = {lat / static_cast<double>(points.size()), lon / static_cast<double>(points.size())};
    return spec;
}

XY project(LatLon p, const LatLon& centre)
{
    return {earth_radius_m * (p.lon - centre.lon) * deg * std::cos(centre.lat * deg),
            earth_radius_m * (p.lat - centre.lat) * deg};
}

LatLon unproject(XY p, const LatLon& centre)
{
    return {centre.lat + p.y / (earth_radius_m * deg),
            centre.lon + p.x / (earth_radius_m * deg * std::cos(centre.lat * deg))};
}

CellIndex snap(LatLon p, const GridSpec& spec)
{
    const auto xy = project(p, spec);
    const auto o = project(spec.origin, spec);
    return {static_cast<std::int64_t>(std::floor((xy.x - o.x) / spec.cell_size)),
            static_cast<std::int64_t>(std::floor((xy.y - o.y) / spec.cell_size))};
}

std::vector<CellIndex> snap_to_grid(std::span<const LatLon> points, const GridSpec& spec)
{
    std::vector<CellIndex> out;
    out.reserve(points.size());
    for (const auto& p : points)
        out.push_back(snap(p, spec));
    return out;
}

std::vector<LatLon> cell_corners(CellIndex c, const GridSpec& spec)
{
    const auto o = project(spec.origin, spec);
    const double x0 = o.x + static_cast<double>(c.i) * spec.cell_size;
    const double y0 = o.y + static_cast<double>(c.j) * spec.cell_size;
    const double s = spec.cell_size;
    return {unproject({x0, y0}, spec), unproject({x0 + s, y0}, spec), unproject({x0 + s, y0 + s}, spec),
            unproject({x0, y0 + s}, spec)};
}

LatLon cell_centre(CellIndex c, const GridSpec& spec)
{
    const auto o = project(spec.origin, spec);
    return unproject({o.x + (static_cast<double>(c.i) + 0.5) * spec.cell_size,
                      o.y + (static_cast<double>(c.j) + 0.5) * spec.cell_size},
                     spec);
}

double bootstrap_median_se(std::span<const double> values, std::size_t resamples, std::uint64_t seed)
{
    if (values.empty())
        throw DataError("bootstrap: empty sample");
    if (resamples < 2)
        throw UsageError("bootstrap: need at least 2 resamples");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> draw(0, values.size() - 1);
    std::vector<double> sample(values.size());
    std::vector<double> medians(resamples);
    for (auto& m : medians) {
        for (auto& s : sample)
            s = values[draw(rng)];
        m = median(sample);
    }
    const double mean = std::accumulate(medians.begin(), medians.end(), 0.0) / static_cast<double>(resamples);
    double ss = 0.0;
    for (double m : medians)
        ss += (m - mean) * (m - mean);
    return std::sqrt(ss / static_cast<double>(resamples - 1));
}

std::vector<GridSummary> summarize_cells(const std::vector<CellIndex>& cells, const std::vector<double>& values,
                                         const std::vector<std::string>& run_ids, const BootstrapOptions& options)
{
    if (cells.size() != values.size() || cells.size() != run_ids.size())
        throw DataError("summarize_cells: cells, values and run ids differ in length");
    struct Acc {
        std::vector<double> values;
        std::set<std::string> runs;
    };
    std::map<CellIndex, Acc> groups;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (!std::isfinite(values[k]))
            throw DataError("summarize_cells: non-finite value");
        auto& g = groups[cells[k]];
        g.values.push_back(values[k]);
        g.runs.insert(run_ids[k]);
    }
    std::vector<GridSummary> out;
    out.reserve(groups.size());
    for (auto& [cell, g] : groups) {
        GridSummary s;
        s.cell = cell;
        s.n_measurements = g.values.size();
        s.n_runs = g.runs.size();
        s.single_run = s.n_runs == 1;
        s.median = median(g.values);
        if (g.values.size() == 1) {
            s.se_undefined = true;
        } else {
            const auto cell_seed = derive_seed(options.seed, static_cast<std::uint64_t>(cell.i),
                                               static_cast<std::uint64_t>(cell.j));
            s.bootstrap_se = bootstrap_median_se(g.values, options.resamples, cell_seed);
            if (s.median > 0.0)
                s.normalized_se = *s.bootstrap_se / s.median;
        }
        s.unstable = !s.normalized_se || *s.normalized_se >= options.unstable_threshold;
        out.push_back(s);
    }
    return out;
}

std::vector<GridSummary> filter_stable(const std::vector<GridSummary>& summaries, double max_normalized_se)
{
    std::vector<GridSummary> out;
    for (const auto& s : summaries)
        if (s.n_runs > 1 && s.normalized_se && *s.normalized_se < max_normalized_se)
            out.push_back(s);
    return out;
}

} // namespace lcs
