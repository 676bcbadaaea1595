#include "lcs/background.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "lcs/csv.hpp"
#include "lcs/error.hpp"
#include "lcs/smoothing_spline.hpp"
#include "lcs/stats.hpp"

namespace lcs {

namespace {

void validate(const RunSeries& run)
{
    if (run.timestamps.size() != static_cast<std::size_t>(run.pm25.size()))
        throw DataError("run '" + run.run_id + "': timestamp and value counts differ");
    if (run.timestamps.empty())
        throw DataError("run '" + run.run_id + "' is empty");
    if (!std::is_sorted(run.timestamps.begin(), run.timestamps.end()))
        throw DataError("run '" + run.run_id + "': timestamps are not sorted");
    if (!run.pm25.allFinite())
        throw DataError("run '" + run.run_id + "': non-finite concentrations");
}

BackgroundSeries finish(const RunSeries& run, BackgroundMethod method, Eigen::VectorXd bkg)
{
    BackgroundSeries s;
    s.run_id = run.run_id;
    s.method = method;
    s.timestamps = run.timestamps;
    s.bkg = std::move(bkg);
    s.run_median_bkg = median(s.bkg);
    return s;
}

} // namespace

std::string to_string(BackgroundMethod m)
{
    return m == BackgroundMethod::percentile10 ? "percentile10" : "spline_of_minimums";
}

std::optional<BackgroundMethod> parse_background_method(std::string_view text)
{
    if (text == "percentile10" || text == "percentile")
        return BackgroundMethod::percentile10;
    if (text == "spline_of_minimums" || text == "spline")
        return BackgroundMethod::spline_of_minimums;
    return std::nullopt;
}

BackgroundSeries background_percentile(const RunSeries& run, const PercentileOptions& options)
{
    validate(run);
    const double run_level = quantile(run.pm25, options.probability);
    std::map<Timestamp, std::vector<double>> hours;
    for (std::size_t i = 0; i < run.timestamps.size(); ++i)
        hours[window_start(run.timestamps[i], Window::hour1)].push_back(run.pm25(static_cast<Eigen::Index>(i)));
    std::map<Timestamp, double> level;
    for (auto& [hour, values] : hours)
        level[hour] = values.size() >= options.min_samples_per_hour ? quantile(std::move(values), options.probability)
                                                                    : run_level;
    Eigen::VectorXd bkg(run.pm25.size());
    for (std::size_t i = 0; i < run.timestamps.size(); ++i)
        bkg(static_cast<Eigen::Index>(i)) = level.at(window_start(run.timestamps[i], Window::hour1));
    return finish(run, BackgroundMethod::percentile10, std::move(bkg));
}

Eigen::VectorXd rolling_mean(const std::vector<Timestamp>& t, const Eigen::VectorXd& v, Timestamp window_s)
{
    const auto n = t.size();
    Eigen::VectorXd out(v.size());
    const Timestamp half = window_s / 2;
    std::size_t lo = 0, hi = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        while (hi < n && t[hi] <= t[i] + half)
            sum += v(static_cast<Eigen::Index>(hi++));
        while (t[lo] < t[i] - half)
            sum -= v(static_cast<Eigen::Index>(lo++));
        out(static_cast<Eigen::Index>(i)) = sum / static_cast<double>(hi - lo);
    }
    return out;
}

std::vector<SegmentMinimum> segment_minima(const std::vector<Timestamp>& t, const Eigen::VectorXd& v,
                                           Timestamp segment_s)
{
    std::vector<SegmentMinimum> out;
    if (t.empty())
        return out;
    const Timestamp t0 = t.front();
    Timestamp current = -1;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const Timestamp seg = (t[i] - t0) / segment_s;
        const double value = v(static_cast<Eigen::Index>(i));
        if (seg != current) {
            out.push_back({t[i], value});
            current = seg;
        } else if (value < out.back().value) {
            out.back() = {t[i], value};
        }
    }
    return out;
}

BackgroundSeries background_spline(const RunSeries& run, const SplineOptions& options)
{
    validate(run);
    const auto smoothed = rolling_mean(run.timestamps, run.pm25, options.rolling_window_s);
    const auto minima = segment_minima(run.timestamps, smoothed, options.segment_s);
    if (minima.size() < 2)
        throw DataError("run '" + run.run_id + "': only " + std::to_string(minima.size()) +
                        " segment minimum; the spline-of-minimums background needs a run of at least two segments "
                        "(use the percentile10 method)");

    const auto k = static_cast<Eigen::Index>(minima.size());
    Eigen::VectorXd kx(k), ky(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        kx(i) = static_cast<double>(minima[static_cast<std::size_t>(i)].timestamp - run.timestamps.front());
        ky(i) = minima[static_cast<std::size_t>(i)].value;
    }
    Eigen::VectorXd at(run.pm25.size());
    for (std::size_t i = 0; i < run.timestamps.size(); ++i)
        at(static_cast<Eigen::Index>(i)) = static_cast<double>(run.timestamps[i] - run.timestamps.front());

    Eigen::VectorXd bkg(at.size());
    if (k <= 3) {
        for (Eigen::Index i = 0; i < at.size(); ++i)
            bkg(i) = interpolate_linear(kx, ky, at(i));
    } else {
        bkg = CubicSmoothingSpline::fit_gcv(kx, ky)(at);
    }
    const double upper = run.pm25.maxCoeff();
    bkg = bkg.cwiseMax(0.0).cwiseMin(upper);
    return finish(run, BackgroundMethod::spline_of_minimums, std::move(bkg));
}

BackgroundSeries estimate_background(const RunSeries& run, BackgroundMethod method)
{
    return method == BackgroundMethod::percentile10 ? background_percentile(run) : background_spline(run);
}

CorrectedSeries apply_background_correction(const Eigen::VectorXd& raw, const BackgroundSeries& bkg)
{
    if (raw.size() != bkg.bkg.size())
        throw DataError("background correction: series of length " + std::to_string(raw.size()) +
                        " does not match background of length " + std::to_string(bkg.bkg.size()));
    CorrectedSeries out;
    out.pm25_c.resize(raw.size());
    out.modes.resize(static_cast<std::size_t>(raw.size()));
    const double med = bkg.run_median_bkg;
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        const double b = bkg.bkg(i);
        if (b <= raw(i)) {
            out.pm25_c(i) = raw(i) - b + med;
            out.modes[static_cast<std::size_t>(i)] = CorrectionMode::additive;
        } else {
            out.pm25_c(i) = raw(i) * med / b;
            out.modes[static_cast<std::size_t>(i)] = CorrectionMode::multiplicative;
        }
    }
    return out;
}

void write_background_csv(std::ostream& out, const std::vector<BackgroundSeries>& series)
{
    out << "timestamp,run_id,method,bkg,run_median_bkg\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.timestamps.size(); ++i)
            out << format_iso8601(s.timestamps[i]) << ',' << csv::escape(s.run_id) << ',' << to_string(s.method) << ','
                << csv::format_double(s.bkg(static_cast<Eigen::Index>(i))) << ','
                << csv::format_double(s.run_median_bkg) << '\n';
}

} // namespace lcs
