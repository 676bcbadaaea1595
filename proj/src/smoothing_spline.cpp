#include "lcs/smoothing_spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcs/error.hpp"

namespace lcs {

namespace {

struct Band {
    Eigen::MatrixXd Q; // n x (n-2)
    Eigen::MatrixXd R; // (n-2) x (n-2)
};

Band make_band(const Eigen::VectorXd& u)
{
    const auto n = u.size();
    const auto m = n - 2;
    Band b{Eigen::MatrixXd::Zero(n, m), Eigen::MatrixXd::Zero(m, m)};
    for (Eigen::Index j = 0; j < m; ++j) {
        const double h0 = u(j + 1) - u(j);
        const double h1 = u(j + 2) - u(j + 1);
        b.Q(j, j) = 1.0 / h0;
        b.Q(j + 1, j) = -1.0 / h0 - 1.0 / h1;
        b.Q(j + 2, j) = 1.0 / h1;
        b.R(j, j) = (h0 + h1) / 3.0;
        if (j + 1 < m) {
            b.R(j, j + 1) = h1 / 6.0;
            b.R(j + 1, j) = h1 / 6.0;
        }
    }
    return b;
}

struct Solution {
    Eigen::VectorXd g;
    Eigen::VectorXd gamma_interior;
    double gcv;
    double edf;
};

Solution solve(const Band& b, const Eigen::VectorXd& y, double lambda)
{
    const auto n = y.size();
    const Eigen::MatrixXd QtQ = b.Q.transpose() * b.Q;
    const Eigen::MatrixXd M = b.R + lambda * QtQ;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    Solution s;
    s.gamma_interior = ldlt.solve(b.Q.transpose() * y);
    s.g = y - lambda * b.Q * s.gamma_interior;
    // I - A = lambda Q M^-1 Q^T, so n - tr A = lambda tr(M^-1 Q^T Q)
    const double residual_df = lambda * ldlt.solve(QtQ).trace();
    s.edf = static_cast<double>(n) - residual_df;
    const double rss = (y - s.g).squaredNorm();
    s.gcv = residual_df > 0.0 ? static_cast<double>(n) * rss / (residual_df * residual_df)
                              : std::numeric_limits<double>::infinity();
    return s;
}

void validate(const Eigen::VectorXd& x, const Eigen::VectorXd& y)
{
    if (x.size() != y.size())
        throw DataError("smoothing spline: x and y lengths differ");
    if (x.size() < 3)
        throw DataError("smoothing spline: need at least 3 knots");
    for (Eigen::Index i = 1; i < x.size(); ++i)
        if (!(x(i) > x(i - 1)))
            throw DataError("smoothing spline: knots must be strictly increasing");
    if (!y.allFinite())
        throw DataError("smoothing spline: non-finite values");
}

} // namespace

CubicSmoothingSpline CubicSmoothingSpline::fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double lambda)
{
    validate(x, y);
    if (!(lambda >= 0.0))
        throw DataError("smoothing spline: lambda must be >= 0");
    CubicSmoothingSpline s;
    s.x0_ = x(0);
    s.span_ = x(x.size() - 1) - x(0);
    s.u_ = (x.array() - s.x0_) / s.span_;
    const auto band = make_band(s.u_);
    const auto sol = solve(band, y, lambda);
    s.lambda_ = lambda;
    s.g_ = sol.g;
    s.gamma_ = Eigen::VectorXd::Zero(x.size());
    s.gamma_.segment(1, x.size() - 2) = sol.gamma_interior;
    s.gcv_ = sol.gcv;
    s.edf_ = sol.edf;
    return s;
}

CubicSmoothingSpline CubicSmoothingSpline::fit_gcv(const Eigen::VectorXd& x, const Eigen::VectorXd& y)
{
    validate(x, y);
    const Eigen::VectorXd u = (x.array() - x(0)) / (x(x.size() - 1) - x(0));
    const auto band = make_band(u);
    auto score = [&](double log_lambda) { return solve(band, y, std::pow(10.0, log_lambda)).gcv; };

    constexpr double lo = -10.0, hi = 4.0, step = 0.25;
    double best_log = lo;
    double best = std::numeric_limits<double>::infinity();
    for (double l = lo; l <= hi + 1e-9; l += step) {
        const double v = score(l);
        if (v < best) {
            best = v;
            best_log = l;
        }
    }
    // golden-section refinement in the bracketing cell
    double a = std::max(lo, best_log - step), b = std::min(hi, best_log + step);
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = score(c), fd = score(d);
    for (int it = 0; it < 40; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = score(d);
        }
    }
    const double refined = fc < fd ? c : d;
    const double chosen = std::min(fc, fd) < best ? refined : best_log;
    return fit(x, y, std::pow(10.0, chosen));
}

double CubicSmoothingSpline::operator()(double x) const
{
    const double u = (x - x0_) / span_;
    const auto n = u_.size();
    if (u <= u_(0)) {
        const double h = u_(1) - u_(0);
        const double slope = (g_(1) - g_(0)) / h - h * gamma_(1) / 6.0;
        return g_(0) + slope * (u - u_(0));
    }
    if (u >= u_(n - 1)) {
        const double h = u_(n - 1) - u_(n - 2);
        const double slope = (g_(n - 1) - g_(n - 2)) / h + h * gamma_(n - 2) / 6.0;
        return g_(n - 1) + slope * (u - u_(n - 1));
    }
    const auto* it = std::upper_bound(u_.data(), u_.data() + n, u);
    const auto i = static_cast<Eigen::Index>(it - u_.data()) - 1;
    const double h = u_(i + 1) - u_(i);
    const double a = u - u_(i);
    const double b = u_(i + 1) - u;
    return (a * g_(i + 1) + b * g_(i)) / h -
           a * b / 6.0 * ((1.0 + a / h) * gamma_(i + 1) + (1.0 + b / h) * gamma_(i));
}

Eigen::VectorXd CubicSmoothingSpline::operator()(const Eigen::VectorXd& x) const
{
    return x.unaryExpr([this](double v) { return (*this)(v); });
}

double interpolate_linear(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double at)
{
    const auto n = x.size();
    if (n == 0)
        throw DataError("interpolate_linear: no knots");
    if (at <= x(0))
        return y(0);
    if (at >= x(n - 1))
        return y(n - 1);
    const auto* it = std::upper_bound(x.data(), x.data() + n, at);
    const auto i = static_cast<Eigen::Index>(it - x.data()) - 1;
    const double w = (at - x(i)) / (x(i + 1) - x(i));
    return y(i) + w * (y(i + 1) - y(i));
}

} // namespace lcs
