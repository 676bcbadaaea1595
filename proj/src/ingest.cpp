#include "lcs/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "lcs/csv.hpp"
#include "lcs/error.hpp"
#include "lcs/log.hpp"

namespace lcs {

namespace {

constexpr double magnus_a = 17.625;
constexpr double magnus_b = 243.04;

// Sensor supersaturation up to this value is clamped; above it the row is corrupt.
constexpr double rh_clamp_limit = 105.0;

struct OptionalMean {
    double sum = 0.0;
    std::size_t count = 0;
    void add(const std::optional<double>& v)
    {
        if (v) {
            sum += *v;
            ++count;
        }
    }
    std::optional<double> value() const
    {
        if (count == 0)
            return std::nullopt;
        return sum / static_cast<double>(count);
    }
};

} // namespace

std::string to_string(Orientation o)
{
    switch (o) {
    case Orientation::parallel: return "parallel";
    case Orientation::perpendicular: return "perpendicular";
    case Orientation::none: return "";
    }
    return "";
}

double derive_dewpoint(double temp, double rh)
{
    if (!std::isfinite(temp) || !std::isfinite(rh))
        throw std::domain_error("dewpoint: non-finite temperature or humidity");
    if (rh <= 0.0)
        throw std::domain_error("dewpoint: relative humidity must be > 0");
    if (rh > 100.0) {
        warn("dewpoint: relative humidity " + csv::format_double(rh) + "% clamped to 100%");
        rh = 100.0;
    }
    const double gamma = std::log(rh / 100.0) + magnus_a * temp / (magnus_b + temp);
    return magnus_b * gamma / (magnus_a - gamma);
}

void derive_dewpoints(std::vector<Measurement>& records)
{
    for (auto& m : records)
        if (m.rh > 0.0)
            m.dewpoint = derive_dewpoint(m.temp, m.rh);
}

std::vector<AlignedRecord> average_window(std::vector<Measurement> records, Window window, std::size_t min_samples)
{
    std::vector<AlignedRecord> out;
    if (records.empty())
        return out;
    const std::string& device = records.front().device_id;
    for (const auto& m : records)
        if (m.device_id != device)
            throw DataError("average_window: records from devices '" + device + "' and '" + m.device_id +
                            "' passed together");
    std::stable_sort(records.begin(), records.end(),
                     [](const Measurement& x, const Measurement& y) { return x.timestamp < y.timestamp; });

    std::size_t begin = 0;
    while (begin < records.size()) {
        const Timestamp start = window_start(records[begin].timestamp, window);
        std::size_t end = begin;
        while (end < records.size() && window_start(records[end].timestamp, window) == start)
            ++end;
        const auto n = end - begin;
        if (n >= std::max<std::size_t>(min_samples, 1)) {
            AlignedRecord r;
            r.timestamp = start;
            r.window = window;
            r.device_id = device;
            r.run_id = records[begin].run_id;
            r.orientation = records[begin].orientation;
            r.road_class = records[begin].road_class;
            double pm = 0, rh = 0, t = 0, lat = 0, lon = 0;
            OptionalMean dew, speed, svf;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& m = records[i];
                pm += m.pm25;
                rh += m.rh;
                t += m.temp;
                lat += m.lat;
                lon += m.lon;
                dew.add(m.dewpoint);
                speed.add(m.speed);
                svf.add(m.svf);
            }
            const double dn = static_cast<double>(n);
            r.pm25 = pm / dn;
            r.rh = rh / dn;
            r.temp = t / dn;
            r.lat = lat / dn;
            r.lon = lon / dn;
            r.dewpoint = dew.value();
            r.speed = speed.value();
            r.svf = svf.value();
            r.sample_count = n;
            out.push_back(std::move(r));
        }
        begin = end;
    }
    return out;
}

std::vector<CoincidentPair> merge_coincident(const std::vector<AlignedRecord>& a, const std::vector<AlignedRecord>& b)
{
    auto index = [](const std::vector<AlignedRecord>& v, const char* side) {
        std::map<Timestamp, const AlignedRecord*> m;
        for (const auto& r : v)
            if (!m.emplace(r.timestamp, &r).second)
                throw DataError(std::string("merge_coincident: duplicate timestamp ") + format_iso8601(r.timestamp) +
                                " in input " + side);
        return m;
    };
    if (!a.empty() && !b.empty() && a.front().window != b.front().window)
        throw DataError("merge_coincident: inputs have different window sizes (" + to_string(a.front().window) +
                        " vs " + to_string(b.front().window) + ")");
    const auto ia = index(a, "a");
    const auto ib = index(b, "b");
    std::vector<CoincidentPair> out;
    auto pa = ia.begin();
    auto pb = ib.begin();
    while (pa != ia.end() && pb != ib.end()) {
        if (pa->first < pb->first) {
            ++pa;
        } else if (pb->first < pa->first) {
            ++pb;
        } else {
            out.push_back({pa->first, *pa->second, *pb->second});
            ++pa;
            ++pb;
        }
    }
    return out;
}

namespace {

const std::vector<std::string> required_columns = {"timestamp", "device_id", "pm25", "rh",
                                                   "temp",      "lat",       "lon",  "run_id"};

struct ColumnMap {
    std::size_t timestamp, device_id, pm25, rh, temp, lat, lon, run_id;
    std::optional<std::size_t> speed, orientation, road_class, svf, dewpoint;
};

ColumnMap map_columns(const csv::Table& t)
{
    for (const auto& c : required_columns)
        if (!t.column(c))
            throw DataError("campaign file is missing required column '" + c + "'");
    ColumnMap m{*t.column("timestamp"), *t.column("device_id"), *t.column("pm25"), *t.column("rh"),
                *t.column("temp"),      *t.column("lat"),       *t.column("lon"),  *t.column("run_id"),
                t.column("speed"),      t.column("orientation"), t.column("road_class"), t.column("svf"),
                t.column("dewpoint")};
    return m;
}

std::string row_error(std::size_t row, const std::string& what)
{
    return "row " + std::to_string(row) + ": " + what;
}

double require_number(const std::vector<std::string>& f, std::size_t col, std::size_t row, const char* name)
{
    auto v = csv::parse_double(f[col]);
    if (!v || !std::isfinite(*v))
        throw DataError(row_error(row, std::string("non-numeric ") + name + " '" + f[col] + "'"));
    return *v;
}

std::optional<double> optional_number(const std::vector<std::string>& f, std::optional<std::size_t> col,
                                      std::size_t row, const char* name)
{
    if (!col || f[*col].empty())
        return std::nullopt;
    auto v = csv::parse_double(f[*col]);
    if (!v || !std::isfinite(*v))
        throw DataError(row_error(row, std::string("non-numeric ") + name + " '" + f[*col] + "'"));
    return v;
}

Measurement parse_row(const std::vector<std::string>& f, const ColumnMap& c, std::size_t header_size, std::size_t row)
{
    if (f.size() != header_size)
        throw DataError(row_error(row, "expected " + std::to_string(header_size) + " fields, found " +
                                           std::to_string(f.size())));
    Measurement m;
    auto ts = parse_iso8601(f[c.timestamp]);
    if (!ts)
        throw DataError(row_error(row, "malformed timestamp '" + f[c.timestamp] + "'"));
    m.timestamp = *ts;
    m.device_id = f[c.device_id];
    m.run_id = f[c.run_id];
    m.pm25 = require_number(f, c.pm25, row, "pm25");
    if (m.pm25 < 0.0)
        throw DataError(row_error(row, "negative pm25 " + f[c.pm25]));
    m.rh = require_number(f, c.rh, row, "rh");
    if (m.rh < 0.0 || m.rh > rh_clamp_limit)
        throw DataError(row_error(row, "rh " + f[c.rh] + " outside [0, 100]"));
    if (m.rh > 100.0) {
        warn(row_error(row, "rh " + f[c.rh] + " clamped to 100"));
        m.rh = 100.0;
    }
    m.temp = require_number(f, c.temp, row, "temp");
    m.lat = require_number(f, c.lat, row, "lat");
    m.lon = require_number(f, c.lon, row, "lon");
    if (m.lat < -90.0 || m.lat > 90.0 || m.lon < -180.0 || m.lon > 180.0)
        throw DataError(row_error(row, "coordinates out of range"));
    m.speed = optional_number(f, c.speed, row, "speed");
    m.dewpoint = optional_number(f, c.dewpoint, row, "dewpoint");
    m.svf = optional_number(f, c.svf, row, "svf");
    if (m.svf && (*m.svf < 0.0 || *m.svf > 1.0))
        throw DataError(row_error(row, "svf " + f[*c.svf] + " outside [0, 1]"));
    if (c.orientation) {
        const auto& o = f[*c.orientation];
        if (o == "parallel")
            m.orientation = Orientation::parallel;
        else if (o == "perpendicular")
            m.orientation = Orientation::perpendicular;
        else if (!o.empty())
            throw DataError(row_error(row, "unknown orientation '" + o + "'"));
    }
    if (auto rc = optional_number(f, c.road_class, row, "road_class")) {
        if (*rc != std::floor(*rc) || *rc < 1 || *rc > 9)
            throw DataError(row_error(row, "road_class " + f[*c.road_class] + " not an integer in 1-9"));
        m.road_class = static_cast<int>(*rc);
    }
    return m;
}

} // namespace

std::vector<Measurement> load_campaign(std::istream& in, const LoadOptions& options)
{
    const auto table = csv::read(in);
    const auto cols = map_columns(table);
    std::vector<Measurement> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t row = i + 1;
        try {
            out.push_back(parse_row(table.rows[i], cols, table.header.size(), row));
        } catch (const DataError& e) {
            if (!options.skip_invalid)
                throw;
            warn(std::string("skipped ") + e.what());
        }
    }
    return out;
}

std::vector<Measurement> load_campaign(const std::string& path, const LoadOptions& options)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open campaign file '" + path + "'");
    try {
        return load_campaign(in, options);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_campaign(std::ostream& out, const std::vector<Measurement>& records)
{
    out << "timestamp,device_id,pm25,rh,temp,lat,lon,run_id,speed,orientation,road_class,svf\n";
    auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
    for (const auto& m : records) {
        out << format_iso8601(m.timestamp) << ',' << csv::escape(m.device_id) << ',' << csv::format_double(m.pm25)
            << ',' << csv::format_double(m.rh) << ',' << csv::format_double(m.temp) << ','
            << csv::format_double(m.lat) << ',' << csv::format_double(m.lon) << ',' << csv::escape(m.run_id) << ','
            << opt(m.speed) << ',' << to_string(m.orientation) << ','
            << (m.road_class ? std::to_string(*m.road_class) : std::string()) << ',' << opt(m.svf) << '\n';
    }
}

std::vector<Measurement> select_device(const std::vector<Measurement>& records, std::string_view device_id)
{
    std::vector<Measurement> out;
    for (const auto& m : records)
        if (m.device_id == device_id)
            out.push_back(m);
    return out;
}

} // namespace lcs
