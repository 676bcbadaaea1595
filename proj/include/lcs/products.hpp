#ifndef LCS_PRODUCTS_HPP
#define LCS_PRODUCTS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcs/geo.hpp"
#include "lcs/hotspots.hpp"

namespace lcs {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string fnv1a_hex(std::string_view bytes);
/// "fnv1a64:<16 hex digits>" of a file's bytes.
std::string hash_file(const std::string& path);

/// Identifies how an output was produced. Holds no wall-clock time so reruns are byte-identical.
struct Provenance {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    /// (file name, content hash)
    std::vector<std::pair<std::string, std::string>> inputs;

    void add_input(const std::string& path);
    /// '#'-prefixed lines.
    void write_csv_header(std::ostream& out) const;
    nlohmann::json to_json() const;
};

void write_grid_geojson(std::ostream& out, const std::vector<GridSummary>& cells, const GridSpec& spec,
                        double max_normalized_se, const Provenance& prov);
void write_grid_csv(std::ostream& out, const std::vector<GridSummary>& cells, const GridSpec& spec,
                    double max_normalized_se, const Provenance& prov);

void write_hotspots_geojson(std::ostream& out, const HotspotResult& result, const Provenance& prov);
void write_hotspots_csv(std::ostream& out, const HotspotResult& result, const Provenance& prov);
/// One row per selected point with its cluster label.
void write_hotspot_points_csv(std::ostream& out, const HotspotResult& result, const std::vector<HotspotPoint>& points,
                              const Provenance& prov);

} // namespace lcs

#endif // LCS_PRODUCTS_HPP
