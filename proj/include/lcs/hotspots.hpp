#ifndef LCS_HOTSPOTS_HPP
#define LCS_HOTSPOTS_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lcs/geo.hpp"

namespace lcs {

enum class Linkage { single, complete, average };

std::string to_string(Linkage l);
std::optional<Linkage> parse_linkage(std::string_view text);

/// One agglomeration step. `a` and `b` are cluster ids: 0..n-1 are the input points,
/// n + k is the cluster formed by merge k (the usual linkage-matrix convention).
struct Merge {
    std::size_t a = 0;
    std::size_t b = 0;
    double height = 0.0;
    std::size_t size = 0;
};

/// Agglomerative clustering on Euclidean distances (nearest-neighbour chain, O(n^2) memory).
/// Merges are returned sorted by height.
std::vector<Merge> agglomerate(const std::vector<XY>& points, Linkage linkage = Linkage::complete);

/// Flat clusters from cutting the dendrogram at `height` (merges with height <= cut are kept).
/// Labels are 0..k-1 in order of each cluster's smallest member index.
std::vector<std::size_t> cut_tree(const std::vector<Merge>& merges, std::size_t n_points, double height);

struct HotspotPoint {
    LatLon position;
    double pm25 = 0.0;
    std::string run_id;
};

struct HotspotOptions {
    double percentile = 99.0;
    double cutoff_m = 100.0;
    /// persistent requires n > min_members and nr > min_runs
    std::size_t min_members = 5;
    std::size_t min_runs = 1;
    Linkage linkage = Linkage::complete;
};

struct HotspotCluster {
    std::vector<std::size_t> members; ///< indices into the input points
    LatLon centroid;
    std::size_t n = 0;
    std::size_t nr = 0;
    bool persistent = false;
    std::map<std::string, std::size_t> count_by_run;
    /// Largest merge height inside the cluster (0 for singletons).
    double max_cophenetic = 0.0;
};

struct HotspotResult {
    double threshold = 0.0;
    std::vector<std::size_t> selected;
    std::vector<HotspotCluster> clusters; ///< by decreasing n, ties by first member
};

bool is_persistent(std::size_t n, std::size_t nr, const HotspotOptions& options = {});

/// Selects readings at or above the type-7 percentile, clusters them on projected
/// coordinates and cuts the dendrogram at the distance cut-off.
HotspotResult detect_hotspots(const std::vector<HotspotPoint>& points, const HotspotOptions& options = {});

} // namespace lcs

#endif // LCS_HOTSPOTS_HPP
