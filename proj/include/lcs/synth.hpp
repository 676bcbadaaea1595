#ifndef LCS_SYNTH_HPP
#define LCS_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lcs/geo.hpp"
#include "lcs/ingest.hpp"

namespace lcs {

/// A Gaussian emission source added to the concentration field.
struct PlantedSite {
    LatLon position;
    double amplitude = 40.0; ///< µg/m³ at the centre
    double sigma_m = 35.0;
};

/// Low-cost sensor response, written as the calibration it needs:
///   reference = s0 + s1*pm25 + s2*rh + s3*dewpoint + s4*rh*dewpoint
struct SensorModel {
    double s0 = -1.0;
    double s1 = 0.8;
    double s2 = -0.1;
    double s3 = 0.05;
    double s4 = -0.001;

    double bias(double rh, double dewpoint) const { return s0 + s2 * rh + s3 * dewpoint + s4 * rh * dewpoint; }
    /// Raw reading that the calibration maps back to `concentration`.
    double reading(double concentration, double rh, double temp) const;
};

struct SynthOptions {
    std::uint64_t seed = 1;
    std::size_t runs = 8;
    double area_m = 800.0;
    double street_spacing_m = 100.0;
    double speed_mps = 5.0;
    Timestamp sample_s = 5;
    double collocation_days = 2.0;
    double spike_fraction = 0.05;
    double reference_noise = 0.5;
    double sensor_noise = 0.3;
    double gps_noise_m = 3.0;
    LatLon centre{42.3601, -71.0589};
};

struct SynthTruth {
    LatLon centre;
    double area_m = 800.0;
    double base = 8.0;
    double gradient_east = 3.0;  ///< µg/m³ across the area, west to east
    double gradient_north = 1.5; ///< µg/m³ across the area, south to north
    std::vector<PlantedSite> sites;
    SensorModel sensor;
    double dusttrak_s1 = 1.0;
    double dusttrak_s2 = 0.25;

    /// Time-invariant concentration field at a location (no background, no spikes).
    double field(LatLon p) const;
    double dusttrak_ratio(double rh) const;
};

struct SynthCampaign {
    SynthTruth truth;
    std::vector<Measurement> collocation_lcs;       ///< device "opc1", 5 s
    std::vector<Measurement> collocation_reference; ///< device "ref", 1 min
    std::vector<Measurement> collocation_research;  ///< device "dusttrak", 1 min
    std::vector<Measurement> mobile_lcs;            ///< device "opc1", 5 s, one run per day
    std::vector<Measurement> mobile_research;       ///< device "dusttrak", 5 s
};

SynthCampaign generate_campaign(const SynthOptions& options = {});

/// Writes the campaign CSVs, truth.json and a ready-to-run campaign.conf into `dir`.
void write_synth_campaign(const SynthCampaign& campaign, const SynthOptions& options, const std::string& dir);

} // namespace lcs

#endif // LCS_SYNTH_HPP
