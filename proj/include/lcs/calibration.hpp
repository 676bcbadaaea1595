#ifndef LCS_CALIBRATION_HPP
#define LCS_CALIBRATION_HPP

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcs/forest.hpp"
#include "lcs/metrics.hpp"
#include "lcs/ols.hpp"
#include "lcs/timeutil.hpp"

namespace lcs {

enum class DustTrakMethod { dt1, dt2, dt3 };

/// Identifies a correction: table models 0-17 or one of the three research-grade
/// instrument corrections DT1-DT3.
class ModelId {
public:
    static ModelId table(int id);
    static ModelId dusttrak(DustTrakMethod method);
    /// Accepts "0".."17", "DT1".."DT3" (case-insensitive prefix).
    static std::optional<ModelId> parse(std::string_view text);

    bool is_dusttrak() const { return code_ >= dusttrak_base; }
    int table_id() const; ///< throws for DustTrak ids
    DustTrakMethod method() const; ///< throws for table ids
    std::string name() const;

    auto operator<=>(const ModelId&) const = default;

private:
    static constexpr int dusttrak_base = 100;
    explicit ModelId(int code) : code_(code) {}
    int code_ = 0;
};

constexpr int random_forest_model = 17;

enum class Covariate { pm25, rh, temp, dewpoint, nonlinear_rh };

/// Product of covariates forming one slope column.
using Term = std::vector<Covariate>;

/// Slope terms of table model 1-16, in the published order. Model 0 has none.
const std::vector<Term>& model_terms(int model_id);
std::string term_name(const Term& term);
bool model_uses(int model_id, Covariate c);

/// Hygroscopic growth term f^2 / (1 - f) with f = rh / 100.
/// Throws NumericalError at rh >= 100 where it is singular.
double nonlinear_rh(double rh_percent);

/// Column-wise covariates. `dewpoint` may be empty when no model in use needs it.
struct Covariates {
    Eigen::VectorXd pm25;
    Eigen::VectorXd rh;
    Eigen::VectorXd temp;
    Eigen::VectorXd dewpoint;

    Eigen::Index size() const { return pm25.size(); }
};

struct DesignMatrix {
    Eigen::MatrixXd X;
    std::vector<std::string> terms;
};

/// Slope columns of table model 1-16 (the intercept is added by the fitter).
DesignMatrix build_design_matrix(int model_id, const Covariates& rows);

/// A fitted correction.
struct CorrectionModel {
    ModelId id = ModelId::table(0);
    std::vector<std::string> terms;
    Eigen::VectorXd slopes;
    double intercept = 0.0;
    Eigen::VectorXd slope_se;
    double intercept_se = 0.0;
    Window training_window = Window::min1;
    std::string training_device;
    std::size_t n = 0;
    std::optional<MetricPair> training_metrics;
    /// Model 17 only.
    std::optional<Forest> forest;
    /// Model 17 only: tuned m_try and its OOB pseudo R².
    std::optional<double> oob_pseudo_r2;

    /// term name -> value, intercept last.
    std::vector<std::pair<std::string, double>> coefficients() const;
};

struct FitMetadata {
    Window window = Window::min1;
    std::string device;
};

/// Fits table model 0-16 by least squares of `reference` on the model's design.
/// Model 17 goes through fit_forest_model.
CorrectionModel fit_linear_model(int model_id, const Covariates& rows, const Eigen::VectorXd& reference,
                                 const FitMetadata& meta = {});

/// Predictor matrix (pm25, temp, rh) used by model 17.
Eigen::MatrixXd forest_predictors(const Covariates& rows);

CorrectionModel fit_forest_model(const Covariates& rows, const Eigen::VectorXd& reference,
                                 const ForestConfig& config, const FitMetadata& meta = {});

struct Prediction {
    Eigen::VectorXd values;
    /// Rows with a negative corrected value (kept, not clipped).
    std::vector<std::size_t> negative;
};

/// Applies a fitted model. For DustTrak models, `rows.pm25` is the raw research-grade
/// reading and `rows.rh` the humidity used for the overestimation ratio.
Prediction apply_model(const CorrectionModel& model, const Covariates& rows);

/// Fits one of the research-grade corrections:
///   DT1  reference = s1 + s2 * dusttrak
///   DT2  dusttrak / reference = s1 + s2 * (rh/100)^2 / (1 - rh/100)
///   DT3  dusttrak / reference = s1 + s2 * rh
/// `timestamps`, when given, name the offending records in error messages.
CorrectionModel fit_dusttrak(DustTrakMethod method, const Eigen::VectorXd& dusttrak,
                             const Eigen::VectorXd& reference, const Eigen::VectorXd& rh,
                             const std::vector<Timestamp>& timestamps = {}, const FitMetadata& meta = {});

/// Overestimation ratio predicted by a DT2/DT3 model at the given humidity.
double overestimation_ratio(const CorrectionModel& model, double rh_percent);

} // namespace lcs

#endif // LCS_CALIBRATION_HPP
