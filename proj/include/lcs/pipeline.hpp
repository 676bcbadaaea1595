#ifndef LCS_PIPELINE_HPP
#define LCS_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcs/background.hpp"
#include "lcs/calibration.hpp"
#include "lcs/forest.hpp"
#include "lcs/geo.hpp"
#include "lcs/hotspots.hpp"
#include "lcs/ingest.hpp"
#include "lcs/timeutil.hpp"

namespace lcs {

/// Declarative run configuration. Precedence, lowest first: built-in defaults, the config
/// file, `--set key=value` flags, then the dedicated flags (--seed, --out-dir, --window).
/// Relative paths in a config file are resolved against the file's directory; paths given
/// on the command line against the working directory.
struct PipelineConfig {
    // inputs
    std::string collocation_lcs;
    std::string collocation_reference;
    std::string collocation_research;
    /// Reference series the research-grade instrument is fitted against; defaults to collocation_reference.
    std::string collocation_research_reference;
    std::string mobile_lcs;
    std::string mobile_research;

    // fitting
    std::vector<int> models{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17};
    std::vector<Window> windows{Window::min1, Window::hour1};
    std::size_t min_samples = 1;
    DustTrakMethod dusttrak_method = DustTrakMethod::dt2;
    Window dusttrak_window = Window::min1;
    std::size_t forest_n_tree = 500;
    bool forest_tune = true;
    std::size_t forest_tune_forests = 10;
    std::size_t cv_folds = 10;

    // transfer and mapping
    int transfer_model = 6;
    Window transfer_window = Window::min1;
    bool clip_negative = false;
    BackgroundMethod background_method = BackgroundMethod::spline_of_minimums;
    double cell_size = 50.0;
    std::size_t bootstrap_b = 1000;
    double max_normalized_se = 0.20;

    HotspotOptions hotspots;
    bool hotspots_corrected = false;

    std::vector<std::string> anova_factors;

    std::uint64_t seed = 1;
    std::string out_dir = "out";

    PipelineConfig();

    /// Reads `key = value` lines ('#' starts a comment).
    static PipelineConfig load(const std::string& path);
    /// Sets one key. `base_dir` resolves relative paths. Throws UsageError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value, const std::string& base_dir = "");
    /// Canonical key/value form; the config hash is taken over it.
    std::map<std::string, std::string> to_map() const;
    std::string hash() const;
};

/// One fitted model and its report line.
struct FitReportRow {
    std::string device;
    Window window = Window::min1;
    ModelId model = ModelId::table(0);
    std::size_t n = 0;
    std::optional<MetricPair> training;
    std::optional<std::size_t> m_try;
    std::optional<double> oob_pseudo_r2;
    std::optional<MetricPair> cv;
};

struct FitOutput {
    std::vector<CorrectionModel> models;
    std::vector<FitReportRow> report;
    std::optional<CorrectionModel> research;
};

/// Row of the corrected mobile series (the transfer stage's product).
struct CorrectedRecord {
    Timestamp timestamp = 0;
    std::string device_id;
    std::string run_id;
    double lat = 0.0;
    double lon = 0.0;
    double rh = 0.0;
    double temp = 0.0;
    std::optional<double> speed;
    Orientation orientation = Orientation::none;
    std::optional<int> road_class;
    std::optional<double> svf;
    double pm25_raw = 0.0;
    double pm25_corrected = 0.0;
    std::optional<double> research_raw;
    std::optional<double> research_corrected;
};

struct TransferRow {
    std::string device;
    Window window = Window::min1;
    ModelId model = ModelId::table(0);
    std::string scope; ///< "all" or a run id
    std::size_t n = 0;
    std::optional<double> r;
    double rmse = 0.0;
};

struct BackgroundCorrectedRecord {
    Timestamp timestamp = 0;
    std::string device_id;
    std::string run_id;
    double lat = 0.0;
    double lon = 0.0;
    double pm25_corrected = 0.0;
    double bkg = 0.0;
    double pm25_c = 0.0;
    CorrectionMode mode = CorrectionMode::additive;
};

struct MapOutput {
    GridSpec spec;
    std::vector<GridSummary> cells;
    std::size_t n_stable = 0;
};

// Stages. Each reads its inputs from the config (or the previous stage's files in out_dir)
// and writes its products to out_dir.
FitOutput cmd_fit(const PipelineConfig& config);
std::vector<TransferRow> cmd_transfer_eval(const PipelineConfig& config);
std::vector<BackgroundCorrectedRecord> cmd_background(const PipelineConfig& config);
/// Uses background_corrected.csv when present, otherwise derives it from corrected_mobile.csv in memory.
MapOutput cmd_map(const PipelineConfig& config);
HotspotResult cmd_hotspots(const PipelineConfig& config);
void cmd_anova(const PipelineConfig& config);
/// fit, transfer-eval, background, map, hotspots, anova.
void cmd_run(const PipelineConfig& config);

/// Applies a saved model to a campaign CSV, optionally averaging first.
void cmd_apply(const std::string& model_path, const std::string& input_path, const std::string& output_path,
               std::optional<Window> window, const PipelineConfig& config);

// Intermediate formats.
void write_corrected_csv(std::ostream& out, const std::vector<CorrectedRecord>& rows);
std::vector<CorrectedRecord> read_corrected_csv(const std::string& path);
void write_background_corrected_csv(std::ostream& out, const std::vector<BackgroundCorrectedRecord>& rows);
std::vector<BackgroundCorrectedRecord> read_background_corrected_csv(const std::string& path);

/// Background estimation and correction per (device, run) of a corrected series.
std::vector<BackgroundCorrectedRecord> correct_background(const std::vector<CorrectedRecord>& rows,
                                                          BackgroundMethod method,
                                                          std::vector<BackgroundSeries>* series = nullptr);

} // namespace lcs

#endif // LCS_PIPELINE_HPP
