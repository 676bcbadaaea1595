#include "lcs/hotspots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "lcs/error.hpp"
#include "lcs/log.hpp"
#include "lcs/stats.hpp"

namespace lcs {

namespace {

// Condensed symmetric distance matrix.
class DistanceMatrix {
public:
    explicit DistanceMatrix(const std::vector<XY>& p) : n_(p.size()), d_(n_ * (n_ - 1) / 2)
    {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                at(i, j) = std::hypot(p[i].x - p[j].x, p[i].y - p[j].y);
    }
    double& at(std::size_t i, std::size_t j)
    {
        if (i > j)
            std::swap(i, j);
        return d_[n_ * i - i * (i + 1) / 2 + (j - i - 1)];
    }

private:
    std::size_t n_;
    std::vector<double> d_;
};

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x)
    {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    }
};

} // namespace

std::string to_string(Linkage l)
{
    switch (l) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
    }
    return "?";
}

std::optional<Linkage> parse_linkage(std::string_view text)
{
    if (text == "single")
        return Linkage::single;
    if (text == "complete")
        return Linkage::complete;
    if (text == "average")
        return Linkage::average;
    return std::nullopt;
}

std::vector<Merge> agglomerate(const std::vector<XY>& points, Linkage linkage)
{
    const auto n = points.size();
    if (n < 2)
        return {};
    DistanceMatrix d(points);
    std::vector<char> active(n, 1);
    std::vector<std::size_t> size(n, 1);

    // merges in terms of representative point indices; relabelled afterwards
    struct RawMerge {
        std::size_t a, b;
        double height;
    };
    std::vector<RawMerge> raw;
    raw.reserve(n - 1);
    std::vector<std::size_t> chain;
    std::size_t remaining = n;
    std::size_t next_start = 0;
    while (remaining > 1) {
        if (chain.empty()) {
            while (!active[next_start])
                ++next_start;
            chain.push_back(next_start);
        }
        std::size_t a = 0, b = 0;
        for (;;) {
            a = chain.back();
            std::size_t best = n;
            double best_d = std::numeric_limits<double>::infinity();
            if (chain.size() >= 2) {
                best = chain[chain.size() - 2];
                best_d = d.at(a, best);
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (!active[k] || k == a)
                    continue;
                const double dk = d.at(a, k);
                if (dk < best_d) {
                    best_d = dk;
                    best = k;
                }
            }
            b = best;
            if (chain.size() >= 2 && b == chain[chain.size() - 2])
                break;
            chain.push_back(b);
        }
        chain.pop_back();
        chain.pop_back();
        const double h = d.at(a, b);
        // keep the merged cluster at the smaller index
        const auto keep = std::min(a, b);
        const auto drop = std::max(a, b);
        raw.push_back({keep, drop, h});
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == a || k == b)
                continue;
            const double da = d.at(keep, k), db = d.at(drop, k);
            double v = 0.0;
            switch (linkage) {
            case Linkage::single: v = std::min(da, db); break;
            case Linkage::complete: v = std::max(da, db); break;
            case Linkage::average:
                v = (static_cast<double>(size[keep]) * da + static_cast<double>(size[drop]) * db) /
                    static_cast<double>(size[keep] + size[drop]);
                break;
            }
            d.at(keep, k) = v;
        }
        size[keep] += size[drop];
        active[drop] = 0;
        --remaining;
    }

    std::stable_sort(raw.begin(), raw.end(), [](const RawMerge& x, const RawMerge& y) { return x.height < y.height; });
    // relabel to linkage-matrix ids
    UnionFind uf(n);
    std::vector<std::size_t> cluster_id(n);
    std::iota(cluster_id.begin(), cluster_id.end(), 0);
    std::vector<std::size_t> cluster_size(n, 1);
    std::vector<Merge> merges;
    merges.reserve(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const auto ra = uf.find(raw[k].a), rb = uf.find(raw[k].b);
        Merge m;
        m.a = std::min(cluster_id[ra], cluster_id[rb]);
        m.b = std::max(cluster_id[ra], cluster_id[rb]);
        m.height = raw[k].height;
        m.size = cluster_size[ra] + cluster_size[rb];
        const auto root = std::min(ra, rb);
        uf.parent[std::max(ra, rb)] = root;
        cluster_id[root] = n + k;
        cluster_size[root] = m.size;
        merges.push_back(m);
    }
    return merges;
}

std::vector<std::size_t> cut_tree(const std::vector<Merge>& merges, std::size_t n_points, double height)
{
    // node id -> one member point, to union through
    std::vector<std::size_t> representative(n_points + merges.size());
    std::iota(representative.begin(), representative.begin() + static_cast<std::ptrdiff_t>(n_points), 0);
    UnionFind uf(n_points);
    for (std::size_t k = 0; k < merges.size(); ++k) {
        const auto ra = representative[merges[k].a];
        const auto rb = representative[merges[k].b];
        representative[n_points + k] = ra;
        if (merges[k].height <= height)
            uf.parent[uf.find(rb)] = uf.find(ra);
    }
    std::vector<std::size_t> labels(n_points);
    std::vector<std::size_t> label_of_root(n_points, n_points);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n_points; ++i) {
        const auto r = uf.find(i);
        if (label_of_root[r] == n_points)
            label_of_root[r] = next++;
        labels[i] = label_of_root[r];
    }
    return labels;
}

bool is_persistent(std::size_t n, std::size_t nr, const HotspotOptions& options)
{
    return n > options.min_members && nr > options.min_runs;
}

HotspotResult detect_hotspots(const std::vector<HotspotPoint>& points, const HotspotOptions& options)
{
    HotspotResult result;
    if (points.empty())
        return result;
    if (!(options.percentile > 0.0 && options.percentile <= 100.0))
        throw UsageError("hotspots: percentile must lie in (0, 100]");
    if (points.size() < 100)
        warn("hotspots: only " + std::to_string(points.size()) + " points; the top percentile is degenerate");

    std::vector<double> values;
    values.reserve(points.size());
    for (const auto& p : points) {
        if (!std::isfinite(p.pm25))
            throw DataError("hotspots: non-finite concentration");
        values.push_back(p.pm25);
    }
    result.threshold = quantile(values, options.percentile / 100.0);
    for (std::size_t i = 0; i < points.size(); ++i)
        if (points[i].pm25 >= result.threshold)
            result.selected.push_back(i);

    std::vector<LatLon> all;
    all.reserve(points.size());
    for (const auto& p : points)
        all.push_back(p.position);
    const auto spec = make_grid_spec(all);
    std::vector<XY> xy;
    for (auto i : result.selected)
        xy.push_back(project(points[i].position, spec));

    const auto merges = agglomerate(xy, options.linkage);
    const auto labels = cut_tree(merges, xy.size(), options.cutoff_m);
    const std::size_t k = xy.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

    result.clusters.resize(k);
    for (std::size_t s = 0; s < labels.size(); ++s)
        result.clusters[labels[s]].members.push_back(result.selected[s]);
    // the top merge of each kept cluster is its largest cophenetic distance
    {
        std::vector<std::size_t> rep(xy.size() + merges.size());
        std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(xy.size()), 0);
        for (std::size_t m = 0; m < merges.size(); ++m) {
            rep[xy.size() + m] = rep[merges[m].a];
            if (merges[m].height <= options.cutoff_m) {
                auto& c = result.clusters[labels[rep[merges[m].a]]];
                c.max_cophenetic = std::max(c.max_cophenetic, merges[m].height);
            }
        }
    }
    for (auto& c : result.clusters) {
        double lat = 0.0, lon = 0.0;
        for (auto i : c.members) {
            lat += points[i].position.lat;
            lon += points[i].position.lon;
            ++c.count_by_run[points[i].run_id];
        }
        c.n = c.members.size();
        c.nr = c.count_by_run.size();
        c.centroid = {lat / static_cast<double>(c.n), lon / static_cast<double>(c.n)};
        c.persistent = is_persistent(c.n, c.nr, options);
    }
    std::stable_sort(result.clusters.begin(), result.clusters.end(),
                     [](const HotspotCluster& x, const HotspotCluster& y) { return x.n > y.n; });
    return result;
}

} // namespace lcs
