#ifndef LCS_BACKGROUND_HPP
#define LCS_BACKGROUND_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcs/timeutil.hpp"

namespace lcs {

enum class BackgroundMethod { percentile10, spline_of_minimums };

std::string to_string(BackgroundMethod m);
std::optional<BackgroundMethod> parse_background_method(std::string_view text);

/// One sampling run, timestamps ascending.
struct RunSeries {
    std::string run_id;
    std::vector<Timestamp> timestamps;
    Eigen::VectorXd pm25;
};

struct BackgroundSeries {
    std::string run_id;
    BackgroundMethod method = BackgroundMethod::spline_of_minimums;
    std::vector<Timestamp> timestamps;
    Eigen::VectorXd bkg;
    double run_median_bkg = 0.0;
};

enum class CorrectionMode { additive, multiplicative };

struct CorrectedSeries {
    Eigen::VectorXd pm25_c;
    std::vector<CorrectionMode> modes;
};

struct PercentileOptions {
    double probability = 0.10;
    /// Hours with fewer samples use the run-level percentile.
    std::size_t min_samples_per_hour = 10;
};

/// Per clock hour, the 10th percentile (type 7) of that hour's readings.
BackgroundSeries background_percentile(const RunSeries& run, const PercentileOptions& options = {});

struct SplineOptions {
    Timestamp rolling_window_s = 30;
    Timestamp segment_s = 600;
};

/// Centred time-based rolling mean: the mean of samples with |t_j - t_i| <= window/2.
Eigen::VectorXd rolling_mean(const std::vector<Timestamp>& t, const Eigen::VectorXd& v, Timestamp window_s);

struct SegmentMinimum {
    Timestamp timestamp;
    double value;
};

/// Minimum of each non-empty segment [t0 + k*len, t0 + (k+1)*len), located at its timestamp
/// (first occurrence on ties). Segments are anchored at the first timestamp.
std::vector<SegmentMinimum> segment_minima(const std::vector<Timestamp>& t, const Eigen::VectorXd& v,
                                           Timestamp segment_s);

/// Spline-of-minimums background: rolling mean, per-segment minima, then a GCV cubic
/// smoothing spline through the minima (linear interpolation for 2-3 minima),
/// evaluated at every timestamp and clipped to [0, max raw].
/// Throws DataError when fewer than two segment minima exist.
BackgroundSeries background_spline(const RunSeries& run, const SplineOptions& options = {});

BackgroundSeries estimate_background(const RunSeries& run, BackgroundMethod method);

/// Additive correction raw - bkg + median where bkg <= raw, otherwise the
/// multiplicative raw * median / bkg.
CorrectedSeries apply_background_correction(const Eigen::VectorXd& raw, const BackgroundSeries& bkg);

/// CSV: timestamp,run_id,method,bkg,run_median_bkg
void write_background_csv(std::ostream& out, const std::vector<BackgroundSeries>& series);

} // namespace lcs

#endif // LCS_BACKGROUND_HPP
