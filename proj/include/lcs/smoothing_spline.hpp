#ifndef LCS_SMOOTHING_SPLINE_HPP
#define LCS_SMOOTHING_SPLINE_HPP

#include <Eigen/Dense>

namespace lcs {

/// Natural cubic smoothing spline minimising
///   sum_i (y_i - f(x_i))^2 + lambda * integral f''(x)^2 dx
/// solved with the Reinsch formulation (value/second-derivative representation).
/// Abscissae are rescaled to [0, 1] internally, so lambda is relative to that scale.
/// Outside [x_0, x_{n-1}] the spline continues linearly.
class CubicSmoothingSpline {
public:
    /// `x` strictly increasing, at least 3 points.
    static CubicSmoothingSpline fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double lambda);

    /// Chooses lambda by minimising the generalised cross-validation score
    /// n * RSS / (n - tr A)^2 over a log grid refined by golden-section search.
    static CubicSmoothingSpline fit_gcv(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

    double operator()(double x) const;
    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;

    double lambda() const { return lambda_; }
    double gcv_score() const { return gcv_; }
    /// Effective degrees of freedom, tr A.
    double effective_df() const { return edf_; }
    const Eigen::VectorXd& fitted() const { return g_; }

private:
    Eigen::VectorXd u_;     // rescaled knots
    Eigen::VectorXd g_;     // fitted values at the knots
    Eigen::VectorXd gamma_; // second derivatives (w.r.t. u) at all knots, zero at the ends
    double x0_ = 0.0;
    double span_ = 1.0;
    double lambda_ = 0.0;
    double gcv_ = 0.0;
    double edf_ = 0.0;
};

/// Linear interpolation through (x, y), constant beyond the end points.
double interpolate_linear(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double at);

} // namespace lcs

#endif // LCS_SMOOTHING_SPLINE_HPP
