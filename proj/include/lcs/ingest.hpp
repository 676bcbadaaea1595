#ifndef LCS_INGEST_HPP
#define LCS_INGEST_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lcs/timeutil.hpp"

namespace lcs {

enum class Orientation { none, parallel, perpendicular };

std::string to_string(Orientation o);

/// One timestamped, geo-located instrument reading.
struct Measurement {
    Timestamp timestamp = 0;
    std::string device_id;
    double pm25 = 0.0; ///< µg/m³, finite and >= 0
    double rh = 0.0;   ///< percent, [0, 100]
    double temp = 0.0; ///< °C
    std::optional<double> dewpoint;
    double lat = 0.0;
    double lon = 0.0;
    std::string run_id;
    std::optional<double> speed;
    Orientation orientation = Orientation::none;
    std::optional<int> road_class;
    std::optional<double> svf;
};

/// Window mean for one device.
struct AlignedRecord {
    Timestamp timestamp = 0; ///< window start
    Window window = Window::min1;
    std::string device_id;
    std::string run_id; ///< run of the first contributing sample
    double pm25 = 0.0;
    double rh = 0.0;
    double temp = 0.0;
    std::optional<double> dewpoint;
    double lat = 0.0;
    double lon = 0.0;
    std::optional<double> speed;
    Orientation orientation = Orientation::none; ///< first contributing sample
    std::optional<int> road_class;               ///< first contributing sample
    std::optional<double> svf;
    std::size_t sample_count = 0;
};

struct CoincidentPair {
    Timestamp timestamp = 0;
    AlignedRecord a;
    AlignedRecord b;
};

/// Magnus dew point (a = 17.625, b = 243.04 °C).
/// Throws std::domain_error for rh <= 0 or non-finite input; rh > 100 is clamped with a warning.
double derive_dewpoint(double temp, double rh);

/// Fills Measurement::dewpoint where it can be derived; rows with rh == 0 are left without one.
void derive_dewpoints(std::vector<Measurement>& records);

/// Averages one device's records into epoch-aligned half-open windows.
/// Windows with fewer than `min_samples` raw samples are dropped.
/// Throws DataError if records from more than one device are passed.
std::vector<AlignedRecord> average_window(std::vector<Measurement> records, Window window,
                                          std::size_t min_samples = 1);

/// Inner join on window start. Output is sorted by timestamp.
/// Throws DataError naming the timestamp if either side repeats one, or if the window sizes differ.
std::vector<CoincidentPair> merge_coincident(const std::vector<AlignedRecord>& a,
                                             const std::vector<AlignedRecord>& b);

struct LoadOptions {
    /// Skip invalid rows with a warning instead of throwing.
    bool skip_invalid = false;
};

/// Parses a campaign CSV (see README for the column schema).
/// Errors name the 1-based data row (the header is not counted).
std::vector<Measurement> load_campaign(std::istream& in, const LoadOptions& options = {});
std::vector<Measurement> load_campaign(const std::string& path, const LoadOptions& options = {});

/// Writes measurements in the campaign schema; optional columns are always emitted.
void write_campaign(std::ostream& out, const std::vector<Measurement>& records);

/// Records belonging to `device_id`, preserving order.
std::vector<Measurement> select_device(const std::vector<Measurement>& records, std::string_view device_id);

} // namespace lcs

#endif // LCS_INGEST_HPP
