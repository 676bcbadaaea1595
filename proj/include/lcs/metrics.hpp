#ifndef LCS_METRICS_HPP
#define LCS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "lcs/error.hpp"

namespace lcs {

/// Pearson correlation and root-mean-square difference between two series.
struct MetricPair {
    /// Absent when either series is constant.
    std::optional<double> r;
    double rmse = 0.0;
    std::size_t n = 0;
};

template <typename DerivedA, typename DerivedB>
MetricPair metrics(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    if (a.size() != b.size())
        throw DataError("metrics: series lengths differ (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
    if (a.size() < 2)
        throw DataError("metrics: need at least 2 paired values");
    const auto da = a.template cast<double>().eval();
    const auto db = b.template cast<double>().eval();
    MetricPair m;
    m.n = static_cast<std::size_t>(a.size());
    m.rmse = std::sqrt((da - db).squaredNorm() / static_cast<double>(m.n));
    const Eigen::VectorXd ca = da.array() - da.mean();
    const Eigen::VectorXd cb = db.array() - db.mean();
    const double saa = ca.squaredNorm();
    const double sbb = cb.squaredNorm();
    if (saa > 0.0 && sbb > 0.0)
        m.r = std::clamp(ca.dot(cb) / std::sqrt(saa * sbb), -1.0, 1.0);
    return m;
}

} // namespace lcs

#endif // LCS_METRICS_HPP
