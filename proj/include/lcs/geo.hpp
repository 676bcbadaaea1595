#ifndef LCS_GEO_HPP
#define LCS_GEO_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lcs {

inline constexpr double earth_radius_m = 6371000.0;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

/// Metres east (x) and north (y) of the projection centre.
struct XY {
    double x = 0.0;
    double y = 0.0;
};

/// Local equirectangular projection about the campaign centroid and a square grid
/// whose origin is the bounding-box minimum corner.
struct GridSpec {
    LatLon centre;
    LatLon origin;
    double cell_size = 50.0;
};

/// Centroid (mean) and bounding-box minimum of the points. Throws DataError on empty input
/// or non-positive cell size.
GridSpec make_grid_spec(std::span<const LatLon> points, double cell_size = 50.0);

XY project(LatLon p, const LatLon& centre);
LatLon unproject(XY p, const LatLon& centre);

inline XY project(LatLon p, const GridSpec& spec) { return project(p, spec.centre); }
inline LatLon unproject(XY p, const GridSpec& spec) { return unproject(p, spec.centre); }

struct CellIndex {
    std::int64_t i = 0; ///< east
    std::int64_t j = 0; ///< north
    auto operator<=>(const CellIndex&) const = default;
};

/// Half-open cells: a point on a grid line belongs to the higher-index cell.
CellIndex snap(LatLon p, const GridSpec& spec);
std::vector<CellIndex> snap_to_grid(std::span<const LatLon> points, const GridSpec& spec);

/// Corners of a cell (SW, SE, NE, NW) in geographic coordinates.
std::vector<LatLon> cell_corners(CellIndex c, const GridSpec& spec);
LatLon cell_centre(CellIndex c, const GridSpec& spec);

struct GridSummary {
    CellIndex cell;
    std::size_t n_measurements = 0;
    std::size_t n_runs = 0;
    double median = 0.0;
    /// Absent when n = 1.
    std::optional<double> bootstrap_se;
    /// se / median; absent when the median is not positive or se is undefined.
    std::optional<double> normalized_se;
    bool single_run = false;
    bool unstable = false; ///< normalized_se >= 0.20 or undefined
    bool se_undefined = false;
};

struct BootstrapOptions {
    std::size_t resamples = 1000;
    std::uint64_t seed = 1;
    double unstable_threshold = 0.20;
};

/// Standard deviation (B - 1 denominator) of the medians of `resamples` with-replacement
/// resamples of `values`.
double bootstrap_median_se(std::span<const double> values, std::size_t resamples, std::uint64_t seed);

/// Per-cell median, bootstrap SE and sampling counts, ordered by cell index.
/// Each cell's resampling stream is derived from (seed, cell), so results do not depend on
/// evaluation order.
std::vector<GridSummary> summarize_cells(const std::vector<CellIndex>& cells, const std::vector<double>& values,
                                         const std::vector<std::string>& run_ids,
                                         const BootstrapOptions& options = {});

/// Cells sampled over more than one run with normalized SE strictly below `max_normalized_se`.
std::vector<GridSummary> filter_stable(const std::vector<GridSummary>& summaries, double max_normalized_se = 0.20);

} // namespace lcs

#endif // LCS_GEO_HPP
