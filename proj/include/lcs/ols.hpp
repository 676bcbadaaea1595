#ifndef LCS_OLS_HPP
#define LCS_OLS_HPP

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcs/error.hpp"

namespace lcs {

/// Least-squares fit of y = X * slopes + intercept.
template <typename Scalar>
struct OlsFit {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Vector slopes;
    Scalar intercept = Scalar(0);
    Vector slope_se;
    Scalar intercept_se = Scalar(0);
    Scalar rss = Scalar(0);
    Eigen::Index n = 0;

    Eigen::Index residual_df() const { return n - slopes.size() - 1; }
};

/// Fits y on X with an implicit intercept column.
///
/// Columns are centred and scaled to unit norm before a column-pivoted Householder QR,
/// which keeps interaction designs with large dynamic range well conditioned. The
/// intercept is recovered from the column means. Throws NumericalError naming the
/// offending columns when X (plus the intercept) is rank deficient, and DataError
/// when there are not more rows than coefficients + 1.
template <typename DerivedX, typename DerivedY>
OlsFit<typename DerivedX::Scalar> fit_ols(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y,
                                          const std::vector<std::string>& column_names = {},
                                          typename DerivedX::Scalar rank_tolerance = 1e-10)
{
    using Scalar = typename DerivedX::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n)
        throw DataError("fit_ols: response length " + std::to_string(y.size()) + " does not match " +
                        std::to_string(n) + " design rows");
    if (n <= p + 1)
        throw DataError("fit_ols: need more than " + std::to_string(p + 1) + " rows, got " + std::to_string(n));

    auto name_of = [&](Eigen::Index j) {
        return static_cast<std::size_t>(j) < column_names.size() ? column_names[static_cast<std::size_t>(j)]
                                                                   : "column " + std::to_string(j);
    };

    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> means = X.colwise().mean();
    Matrix centred = X.rowwise() - means;
    Vector scale = centred.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(scale(j) > Scalar(0)) || !std::isfinite(static_cast<double>(scale(j))))
            throw NumericalError("fit_ols: rank-deficient design; '" + name_of(j) +
                                 "' is constant and collinear with the intercept");
        centred.col(j) /= scale(j);
    }
    const Scalar y_mean = y.mean();
    const Vector yc = y.array() - y_mean;

    Eigen::ColPivHouseholderQR<Matrix> qr(n, p);
    qr.setThreshold(rank_tolerance);
    qr.compute(centred);
    if (qr.rank() < p) {
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k)
            names += (names.empty() ? "'" : ", '") + name_of(perm(k)) + "'";
        throw NumericalError("fit_ols: rank-deficient design; collinear column(s) " + names);
    }

    OlsFit<Scalar> fit;
    fit.n = n;
    const Vector scaled_beta = qr.solve(yc);
    fit.slopes = scaled_beta.array() / scale.array();
    fit.intercept = y_mean - means.dot(fit.slopes);
    fit.rss = ((y - X * fit.slopes).array() - fit.intercept).matrix().squaredNorm();

    // (Xs^T Xs)^-1 = P R^-1 R^-T P^T
    const Matrix R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    const Matrix R_inv = R.template triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
    const Matrix perm = qr.colsPermutation();
    const Matrix scaled_cov = perm * (R_inv * R_inv.transpose()) * perm.transpose();
    const Scalar sigma2 = fit.rss / static_cast<Scalar>(n - p - 1);
    const Vector inv_scale = scale.cwiseInverse();
    const Matrix cov = inv_scale.asDiagonal() * scaled_cov * inv_scale.asDiagonal();
    fit.slope_se = (sigma2 * cov.diagonal()).cwiseSqrt();
    const Scalar var_b = sigma2 * (Scalar(1) / static_cast<Scalar>(n) + means * cov * means.transpose());
    fit.intercept_se = std::sqrt(var_b);
    return fit;
}

} // namespace lcs

#endif // LCS_OLS_HPP
