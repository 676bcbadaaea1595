#include "lcs/products.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>

#include "lcs/csv.hpp"
#include "lcs/error.hpp"

namespace lcs {

namespace {

bool is_stable(const GridSummary& s, double max_nse)
{
    return s.n_runs > 1 && s.normalized_se && *s.normalized_se < max_nse;
}

std::string opt(const std::optional<double>& v)
{
    return v ? csv::format_double(*v) : std::string();
}

nlohmann::json opt_json(const std::optional<double>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string runs_field(const std::map<std::string, std::size_t>& counts)
{
    std::string s;
    for (const auto& [run, n] : counts) {
        if (!s.empty())
            s += ';';
        s += run + ':' + std::to_string(n);
    }
    return s;
}

} // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a_hex(std::string_view bytes)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::string hash_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path);
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return "fnv1a64:" + fnv1a_hex(bytes);
}

void Provenance::add_input(const std::string& path)
{
    inputs.emplace_back(std::filesystem::path(path).filename().string(), hash_file(path));
}

void Provenance::write_csv_header(std::ostream& out) const
{
    out << "# generator: lcsmap " << LCS_VERSION << '\n';
    out << "# command: " << command << '\n';
    out << "# config_hash: " << config_hash << '\n';
    out << "# seed: " << seed << '\n';
    for (const auto& [name, hash] : inputs)
        out << "# input: " << name << ' ' << hash << '\n';
}

nlohmann::json Provenance::to_json() const
{
    nlohmann::json j;
    j["generator"] = std::string("lcsmap ") + LCS_VERSION;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["inputs"] = nlohmann::json::array();
    for (const auto& [name, hash] : inputs)
        j["inputs"].push_back({{"file", name}, {"hash", hash}});
    return j;
}

void write_grid_geojson(std::ostream& out, const std::vector<GridSummary>& cells, const GridSpec& spec,
                        double max_normalized_se, const Provenance& prov)
{
    nlohmann::json fc;
    fc["type"] = "FeatureCollection";
    fc["provenance"] = prov.to_json();
    fc["grid"] = {{"origin", {spec.origin.lon, spec.origin.lat}},
                  {"centre", {spec.centre.lon, spec.centre.lat}},
                  {"cell_size_m", spec.cell_size}};
    auto& features = fc["features"] = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json ring = nlohmann::json::array();
        auto corners = cell_corners(c.cell, spec);
        corners.push_back(corners.front());
        for (const auto& p : corners)
            ring.push_back({p.lon, p.lat});
        nlohmann::json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}};
        f["properties"] = {{"i", c.cell.i},
                           {"j", c.cell.j},
                           {"n", c.n_measurements},
                           {"n_runs", c.n_runs},
                           {"median", c.median},
                           {"se", opt_json(c.bootstrap_se)},
                           {"normalized_se", opt_json(c.normalized_se)},
                           {"single_run", c.single_run},
                           {"unstable", c.unstable},
                           {"se_undefined", c.se_undefined},
                           {"stable", is_stable(c, max_normalized_se)}};
        features.push_back(std::move(f));
    }
    out << fc.dump(1) << '\n';
}

void write_grid_csv(std::ostream& out, const std::vector<GridSummary>& cells, const GridSpec& spec,
                    double max_normalized_se, const Provenance& prov)
{
    prov.write_csv_header(out);
    out << "i,j,centre_lat,centre_lon,n,n_runs,median,se,normalized_se,single_run,unstable,se_undefined,stable\n";
    for (const auto& c : cells) {
        const auto centre = cell_centre(c.cell, spec);
        out << c.cell.i << ',' << c.cell.j << ',' << csv::format_double(centre.lat) << ','
            << csv::format_double(centre.lon) << ',' << c.n_measurements << ',' << c.n_runs << ','
            << csv::format_double(c.median) << ',' << opt(c.bootstrap_se) << ',' << opt(c.normalized_se) << ','
            << c.single_run << ',' << c.unstable << ',' << c.se_undefined << ','
            << is_stable(c, max_normalized_se) << '\n';
    }
}

void write_hotspots_geojson(std::ostream& out, const HotspotResult& result, const Provenance& prov)
{
    nlohmann::json fc;
    fc["type"] = "FeatureCollection";
    fc["provenance"] = prov.to_json();
    fc["threshold"] = result.threshold;
    fc["n_selected"] = result.selected.size();
    auto& features = fc["features"] = nlohmann::json::array();
    for (std::size_t k = 0; k < result.clusters.size(); ++k) {
        const auto& c = result.clusters[k];
        nlohmann::json by_run = nlohmann::json::object();
        for (const auto& [run, n] : c.count_by_run)
            by_run[run] = n;
        nlohmann::json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {c.centroid.lon, c.centroid.lat}}};
        f["properties"] = {{"cluster", k},
                           {"n", c.n},
                           {"nr", c.nr},
                           {"persistent", c.persistent},
                           {"max_cophenetic_m", c.max_cophenetic},
                           {"count_by_run", by_run}};
        features.push_back(std::move(f));
    }
    out << fc.dump(1) << '\n';
}

void write_hotspots_csv(std::ostream& out, const HotspotResult& result, const Provenance& prov)
{
    prov.write_csv_header(out);
    out << "# threshold: " << csv::format_double(result.threshold) << '\n';
    out << "cluster,centroid_lat,centroid_lon,n,nr,persistent,max_cophenetic_m,count_by_run\n";
    for (std::size_t k = 0; k < result.clusters.size(); ++k) {
        const auto& c = result.clusters[k];
        out << k << ',' << csv::format_double(c.centroid.lat) << ',' << csv::format_double(c.centroid.lon) << ','
            << c.n << ',' << c.nr << ',' << c.persistent << ',' << csv::format_double(c.max_cophenetic) << ','
            << csv::escape(runs_field(c.count_by_run)) << '\n';
    }
}

void write_hotspot_points_csv(std::ostream& out, const HotspotResult& result, const std::vector<HotspotPoint>& points,
                              const Provenance& prov)
{
    std::vector<std::pair<std::size_t, std::size_t>> rows; // point, cluster
    for (std::size_t k = 0; k < result.clusters.size(); ++k)
        for (auto m : result.clusters[k].members)
            rows.emplace_back(m, k);
    std::sort(rows.begin(), rows.end());
    prov.write_csv_header(out);
    out << "point,lat,lon,pm25,run_id,cluster\n";
    for (const auto& [m, k] : rows) {
        const auto& p = points.at(m);
        out << m << ',' << csv::format_double(p.position.lat) << ',' << csv::format_double(p.position.lon) << ','
            << csv::format_double(p.pm25) << ',' << csv::escape(p.run_id) << ',' << k << '\n';
    }
}

} // namespace lcs
