#ifndef LCS_STATS_HPP
#define LCS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace lcs {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
template <typename Scalar>
Scalar quantile_sorted(const std::vector<Scalar>& sorted, Scalar p)
{
    if (sorted.empty())
        throw std::invalid_argument("quantile of empty sample");
    const Scalar h = static_cast<Scalar>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<Scalar>(lo)) * (sorted[hi] - sorted[lo]);
}

template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& values, typename Derived::Scalar p)
{
    using Scalar = typename Derived::Scalar;
    std::vector<Scalar> v(values.derived().data(), values.derived().data() + values.size());
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, p);
}

template <typename Scalar>
Scalar quantile(std::vector<Scalar> values, Scalar p)
{
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

/// Median; averages the two middle values for even sizes (equals type-7 at p = 0.5).
template <typename Scalar>
Scalar median(std::vector<Scalar> values)
{
    if (values.empty())
        throw std::invalid_argument("median of empty sample");
    const auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const Scalar upper = values[mid];
    if (values.size() % 2 == 1)
        return upper;
    const Scalar lower = *std::max_element(values.begin(), values.begin() + mid);
    return (lower + upper) / Scalar(2);
}

template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& values)
{
    using Scalar = typename Derived::Scalar;
    std::vector<Scalar> v(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i)
        v[static_cast<std::size_t>(i)] = values.derived().coeff(i);
    return median(std::move(v));
}

/// Copies a std::vector into an Eigen column vector.
inline Eigen::VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace lcs

#endif // LCS_STATS_HPP
