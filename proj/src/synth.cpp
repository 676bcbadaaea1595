#include "lcs/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

#include "lcs/calibration.hpp"
#include "lcs/error.hpp"

namespace lcs {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

struct Leg {
    XY from;
    XY to;
    bool east_west = true;
    std::size_t street = 0;
};

// East-west lawnmower over every street, then north-south over every avenue.
std::vector<Leg> lawnmower(double area, double spacing)
{
    const auto streets = static_cast<std::size_t>(std::floor(area / spacing + 1e-9)) + 1;
    std::vector<Leg> legs;
    XY at{0.0, 0.0};
    auto go = [&](XY to, bool ew, std::size_t street) {
        legs.push_back({at, to, ew, street});
        at = to;
    };
    for (std::size_t k = 0; k < streets; ++k) {
        const double y = static_cast<double>(k) * spacing;
        if (k > 0)
            go({at.x, y}, false, k % 2 == 1 ? streets - 1 : 0);
        go({k % 2 == 0 ? area : 0.0, y}, true, k);
    }
    const bool at_east = at.x > 0.5 * area;
    for (std::size_t k = 0; k < streets; ++k) {
        const std::size_t avenue = at_east ? streets - 1 - k : k;
        const double x = static_cast<double>(avenue) * spacing;
        if (k > 0)
            go({x, at.y}, true, streets - 1);
        go({x, at.y > 0.5 * area ? 0.0 : area}, false, avenue);
    }
    return legs;
}

Timestamp parse_or_throw(const char* text)
{
    const auto t = parse_iso8601(text);
    if (!t)
        throw std::logic_error("bad synthetic base time");
    return *t;
}

} // namespace

double SensorModel::reading(double concentration, double rh, double temp) const
{
    return (concentration - bias(rh, derive_dewpoint(temp, rh))) / s1;
}

double SynthTruth::field(LatLon p) const
{
    const XY xy = project(p, centre);
    const double u = xy.x / area_m + 0.5;
    const double v = xy.y / area_m + 0.5;
    double c = base + gradient_east * u + gradient_north * v;
    for (const auto& s : sites) {
        const XY d = project(s.position, centre);
        const double r2 = (xy.x - d.x) * (xy.x - d.x) + (xy.y - d.y) * (xy.y - d.y);
        c += s.amplitude * std::exp(-0.5 * r2 / (s.sigma_m * s.sigma_m));
    }
    return c;
}

double SynthTruth::dusttrak_ratio(double rh) const
{
    return dusttrak_s1 + dusttrak_s2 * nonlinear_rh(rh);
}

SynthCampaign generate_campaign(const SynthOptions& o)
{
    if (o.runs < 2 || o.area_m <= 0.0 || o.street_spacing_m <= 0.0 || o.speed_mps <= 0.0 || o.sample_s <= 0)
        throw UsageError("synth: invalid options");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto uniform = [&](double a, double b) { return a + (b - a) * unif(rng); };

    SynthCampaign out;
    SynthTruth& truth = out.truth;
    truth.centre = o.centre;
    truth.area_m = o.area_m;
    auto local = [&](double x, double y) { return unproject(XY{x - 0.5 * o.area_m, y - 0.5 * o.area_m}, o.centre); };
    // two intersections well inside the area
    const double sp = o.street_spacing_m;
    truth.sites = {{local(std::round(0.25 * o.area_m / sp) * sp, std::round(0.375 * o.area_m / sp) * sp), 40.0, 35.0},
                   {local(std::round(0.75 * o.area_m / sp) * sp, std::round(0.625 * o.area_m / sp) * sp), 40.0, 35.0}};

    // collocation
    {
        const Timestamp t0 = parse_or_throw("2023-03-01T00:00:00Z");
        const auto n = static_cast<Timestamp>(o.collocation_days * 86400.0) / o.sample_s;
        const Timestamp per_minute = 60 / o.sample_s;
        double ar = 0.0;
        double c_sum = 0.0;
        double rh_sum = 0.0;
        double temp_sum = 0.0;
        for (Timestamp i = 0; i < n; ++i) {
            const Timestamp t = t0 + i * o.sample_s;
            const double phase = two_pi * static_cast<double>(t - t0) / 86400.0;
            ar = 0.998 * ar + 0.2 * gauss(rng);
            const double c = std::max(1.0, 12.0 + 5.0 * std::sin(phase) + ar);
            const double rh = 62.0 + 25.0 * std::sin(phase - 0.5 * std::numbers::pi);
            const double temp = 14.0 - 8.0 * std::sin(phase - 0.5 * std::numbers::pi) + 0.1 * gauss(rng);

            Measurement m;
            m.timestamp = t;
            m.device_id = "opc1";
            m.run_id = "collocation";
            m.rh = rh;
            m.temp = temp;
            m.lat = o.centre.lat;
            m.lon = o.centre.lon;
            m.pm25 = std::max(0.0, truth.sensor.reading(c, rh, temp) + o.sensor_noise * gauss(rng));
            out.collocation_lcs.push_back(m);

            c_sum += c;
            rh_sum += rh;
            temp_sum += temp;
            if ((i + 1) % per_minute == 0) {
                const double k = static_cast<double>(per_minute);
                Measurement r = m;
                r.timestamp = window_start(t, Window::min1);
                r.device_id = "ref";
                r.rh = rh_sum / k;
                r.temp = temp_sum / k;
                r.pm25 = std::max(0.0, c_sum / k + o.reference_noise * gauss(rng));
                out.collocation_reference.push_back(r);
                Measurement d = r;
                d.device_id = "dusttrak";
                d.pm25 = std::max(0.0, c_sum / k * truth.dusttrak_ratio(r.rh) + 0.3 * gauss(rng));
                out.collocation_research.push_back(d);
                c_sum = rh_sum = temp_sum = 0.0;
            }
        }
    }

    // mobile runs
    const auto legs = lawnmower(o.area_m, o.street_spacing_m);
    double route_length = 0.0;
    for (const auto& l : legs)
        route_length += std::hypot(l.to.x - l.from.x, l.to.y - l.from.y);
    const std::size_t streets = static_cast<std::size_t>(std::floor(o.area_m / sp + 1e-9)) + 1;
    const Timestamp day0 = parse_or_throw("2023-03-06T00:00:00Z");

    for (std::size_t r = 0; r < o.runs; ++r) {
        const std::string run_id = "run" + std::to_string(r + 1);
        const Timestamp start = day0 + static_cast<Timestamp>(r) * 86400 + static_cast<Timestamp>(7 + (3 * r) % 10) * 3600;
        const double speed = uniform(0.8, 1.2) * o.speed_mps;
        const double level = uniform(3.0, 8.0);
        const double amp = uniform(1.0, 3.0);
        const double period = uniform(1800.0, 3600.0);
        const double phi = uniform(0.0, two_pi);
        const double rh_base = uniform(45.0, 80.0);
        const bool reverse = r % 2 == 1;

        for (Timestamp k = 0;; ++k) {
            const double tau = static_cast<double>(k * o.sample_s);
            double s = speed * tau;
            if (s > route_length)
                break;
            if (reverse)
                s = route_length - s;
            std::size_t li = 0;
            double len = 0.0;
            for (; li < legs.size(); ++li) {
                len = std::hypot(legs[li].to.x - legs[li].from.x, legs[li].to.y - legs[li].from.y);
                if (s <= len || li + 1 == legs.size())
                    break;
                s -= len;
            }
            const Leg& leg = legs[li];
            const double f = len > 0.0 ? std::clamp(s / len, 0.0, 1.0) : 0.0;
            const double x = leg.from.x + f * (leg.to.x - leg.from.x) + o.gps_noise_m * gauss(rng);
            const double y = leg.from.y + f * (leg.to.y - leg.from.y) + o.gps_noise_m * gauss(rng);
            const LatLon pos = local(x, y);

            const double rh = rh_base + 4.0 * std::sin(two_pi * tau / 3600.0) + 0.3 * gauss(rng);
            const double temp = 28.0 - 0.25 * rh + 0.2 * gauss(rng);
            double c = truth.field(pos) + level + amp * std::sin(two_pi * tau / period + phi);
            if (unif(rng) < o.spike_fraction)
                c += uniform(3.0, 12.0);

            Measurement m;
            m.timestamp = start + k * o.sample_s;
            m.device_id = "opc1";
            m.run_id = run_id;
            m.lat = pos.lat;
            m.lon = pos.lon;
            m.rh = rh;
            m.temp = temp;
            m.speed = std::max(0.0, speed + 0.5 * gauss(rng));
            m.orientation = leg.east_west ? Orientation::parallel : Orientation::perpendicular;
            m.road_class = static_cast<int>((leg.street + (leg.east_west ? 0 : 3)) % 5) + 1;
            if (!(leg.east_west && leg.street == 0))
                m.svf = 0.3 + 0.6 * static_cast<double>(leg.street) / static_cast<double>(streets);
            m.pm25 = std::max(0.0, truth.sensor.reading(c, rh, temp) + o.sensor_noise * gauss(rng));
            out.mobile_lcs.push_back(m);

            Measurement d = m;
            d.device_id = "dusttrak";
            d.pm25 = std::max(0.0, c * truth.dusttrak_ratio(rh) + 0.3 * gauss(rng));
            out.mobile_research.push_back(d);
        }
    }
    return out;
}

void write_synth_campaign(const SynthCampaign& campaign, const SynthOptions& options, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::vector<Measurement>& rows) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f)
            throw DataError("cannot write " + (fs::path(dir) / name).string());
        write_campaign(f, rows);
    };
    write("collocation_lcs.csv", campaign.collocation_lcs);
    write("collocation_reference.csv", campaign.collocation_reference);
    write("collocation_dusttrak.csv", campaign.collocation_research);
    write("mobile_lcs.csv", campaign.mobile_lcs);
    write("mobile_dusttrak.csv", campaign.mobile_research);

    const auto& t = campaign.truth;
    nlohmann::json j;
    j["seed"] = options.seed;
    j["runs"] = options.runs;
    j["centre"] = {{"lat", t.centre.lat}, {"lon", t.centre.lon}};
    j["area_m"] = t.area_m;
    j["field"] = {{"base", t.base}, {"gradient_east", t.gradient_east}, {"gradient_north", t.gradient_north}};
    j["sites"] = nlohmann::json::array();
    for (const auto& s : t.sites)
        j["sites"].push_back(
            {{"lat", s.position.lat}, {"lon", s.position.lon}, {"amplitude", s.amplitude}, {"sigma_m", s.sigma_m}});
    j["sensor"] = {{"model", 6},
                   {"intercept", t.sensor.s0},
                   {"pm25", t.sensor.s1},
                   {"rh", t.sensor.s2},
                   {"dewpoint", t.sensor.s3},
                   {"rh*dewpoint", t.sensor.s4},
                   {"reference_noise", options.reference_noise}};
    j["dusttrak"] = {{"method", "DT2"}, {"s1", t.dusttrak_s1}, {"s2", t.dusttrak_s2}};
    {
        std::ofstream f(fs::path(dir) / "truth.json", std::ios::binary);
        f << j.dump(2) << '\n';
    }
    std::ofstream conf(fs::path(dir) / "campaign.conf", std::ios::binary);
    conf << "# synthetic campaign, seed " << options.seed << "\n"
         << "collocation.lcs = collocation_lcs.csv\n"
         << "collocation.reference = collocation_reference.csv\n"
         << "collocation.research = collocation_dusttrak.csv\n"
         << "mobile.lcs = mobile_lcs.csv\n"
         << "mobile.research = mobile_dusttrak.csv\n"
         << "fit.models = 0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17\n"
         << "fit.windows = 1min,1h\n"
         << "dusttrak.method = DT2\n"
         << "transfer.model = 6\n"
         << "transfer.window = 1min\n"
         << "background.method = spline\n"
         << "seed = " << options.seed << "\n"
         << "out_dir = out\n";
}

} // namespace lcs
